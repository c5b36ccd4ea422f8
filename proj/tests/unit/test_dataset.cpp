#include <doctest.h>

#include <random>
#include <set>

#include "forge/dataset.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/text.hpp"
#include "testkit.hpp"

using namespace forge;

namespace {

std::filesystem::path write_tmp(const std::string& name, const std::string& contents) {
  const auto dir = testkit::fresh_dir("dataset");
  write_file_atomic(dir / name, contents);
  return dir / name;
}

const char* kLine1 =
    R"({"id":"a","question":"Is it safe?","answer":"Yes it is safe.","must_have":["It is safe"],"nice_to_have":[],"ambiguous":false,"source":"t"})";
const char* kLine2 =
    R"({"id":"b","question":"Dose?","answer":"Take one tablet daily.","must_have":["Take one tablet"],"nice_to_have":["Daily use"],"ambiguous":false,"source":"t"})";

}  // namespace

TEST_SUITE("text") {
  TEST_CASE("tokenize lowercases and splits on non alphanumerics") {
    CHECK(tokenize("Lexapro, 10mg!") == Tokens{"lexapro", "10mg"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("A a A") == Tokens{"a", "a", "a"});
    CHECK(tokenize("  --  ").empty());
    CHECK(tokenize("caf\xc3\xa9 ok") == Tokens{"caf\xc3\xa9", "ok"});
  }

  TEST_CASE("count_words uses whitespace") {
    CHECK(count_words("one two  three\tfour\n") == 4);
    CHECK(count_words("") == 0);
    CHECK(count_words("don't-stop now") == 2);
  }

  TEST_CASE("split_sentences") {
    CHECK(split_sentences("A b. C d! E f? G") == std::vector<std::string>{"A b.", "C d!", "E f?", "G"});
    CHECK(split_sentences("Take 2.5 mg. Then rest.") == std::vector<std::string>{"Take 2.5 mg.", "Then rest."});
    CHECK(split_sentences("   ").empty());
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("two well formed lines load without errors") {
    const auto path = write_tmp("two.jsonl", std::string(kLine1) + "\n" + kLine2 + "\n");
    const auto r = load_dataset(path, "two");
    CHECK(r.ok());
    REQUIRE(r.dataset.instances.size() == 2);
    CHECK(r.dataset.instances[0].id == "a");
    CHECK(r.dataset.instances[1].nice_to_have.size() == 1);
    CHECK(r.dataset.instances[1].nice_to_have[0].kind == StatementKind::kNiceToHave);
  }

  TEST_CASE("empty file gives zero instances and a warning") {
    const auto r = load_dataset(write_tmp("empty.jsonl", ""), "empty");
    CHECK(r.ok());
    CHECK(r.dataset.instances.empty());
    CHECK(r.warnings.size() == 1);
  }

  TEST_CASE("missing must_have is a schema error naming line and field") {
    const auto path = write_tmp(
        "bad.jsonl", R"({"id":"a","question":"q","answer":"x","nice_to_have":[]})" "\n");
    const auto r = load_dataset(path, "bad");
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].line == 1);
    CHECK(r.errors[0].field == "must_have");
    try {
      load_dataset_strict(path, "bad");
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.kind() == ErrorKind::kSchema);
      CHECK(e.line() == 1);
      CHECK(e.field() == "must_have");
    }
  }

  TEST_CASE("malformed lines are collected while valid ones are kept in order") {
    const auto path = write_tmp("mixed.jsonl", std::string(kLine1) + "\n{not json\n" +
                                                   R"({"id":"c","question":"q","answer":"x","must_have":"oops","nice_to_have":[]})" +
                                                   "\n" + kLine2 + "\n");
    const auto r = load_dataset(path, "mixed");
    CHECK(r.dataset.instances.size() == 2);
    REQUIRE(r.errors.size() == 2);
    CHECK(r.errors[0].line == 2);
    CHECK(r.errors[1].line == 3);
    CHECK(r.errors[1].field == "must_have");
  }

  TEST_CASE("duplicate ids and missing files") {
    const auto r = load_dataset(write_tmp("dup.jsonl", std::string(kLine1) + "\n" + kLine1 + "\n"), "dup");
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].field == "id");
    CHECK_THROWS_AS(load_dataset("/nonexistent/forge.jsonl", "x"), Error);
    try {
      load_dataset("/nonexistent/forge.jsonl", "x");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIo);
    }
  }

  TEST_CASE("non-ambiguous instances need an answer; ambiguous ones do not") {
    CHECK_THROWS_AS(parse_instance(R"({"id":"a","question":"q","answer":"","must_have":["x"],"nice_to_have":[]})", 1),
                    SchemaError);
    const auto amb = parse_instance(
        R"({"id":"a","question":"q","answer":"","must_have":[],"nice_to_have":[],"ambiguous":true})", 1);
    CHECK(amb.ambiguous);
  }

  TEST_CASE("serialization canonicalises field order and round-trips") {
    const auto inst = parse_instance(
        R"({"source":"s","nice_to_have":["n"],"ambiguous":false,"must_have":["m"],"answer":"ans","question":"q?","id":"z"})",
        1);
    CHECK(serialize_instance(inst) ==
          R"({"id":"z","question":"q?","answer":"ans","must_have":["m"],"nice_to_have":["n"],"ambiguous":false,"source":"s"})");
  }

  TEST_CASE("property: serialize(parse(serialize(x))) == serialize(x) for random instances") {
    std::mt19937_64 gen(11);
    const std::vector<std::string> words{"dose", "r\xc3\xa9" "action", "\"quoted\"", "tab\tbed", "ok", "50mg", "why?"};
    auto phrase = [&](std::size_t n) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[gen() % words.size()];
      return s + " ok";
    };
    for (int trial = 0; trial < 200; ++trial) {
      Instance inst;
      inst.id = "id" + std::to_string(trial);
      inst.question = phrase(1 + gen() % 5);
      inst.answer = phrase(1 + gen() % 9);
      for (std::size_t i = 0, n = 1 + gen() % 4; i < n; ++i) inst.must_have.push_back({phrase(2), StatementKind::kMustHave});
      for (std::size_t i = 0, n = gen() % 3; i < n; ++i) inst.nice_to_have.push_back({phrase(2), StatementKind::kNiceToHave});
      inst.source = "src";
      const std::string once = serialize_instance(inst);
      const Instance back = parse_instance(once, 1);
      CHECK(back == inst);
      CHECK(serialize_instance(back) == once);
    }
  }

  TEST_CASE("save then load reproduces the file bytes") {
    const auto corpus = testkit::synthetic_corpus(6, 1);
    const auto dir = testkit::fresh_dir("roundtrip");
    save_dataset(corpus.datasets[0], dir / "d.jsonl");
    const auto loaded = load_dataset_strict(dir / "d.jsonl", "synth_0");
    CHECK(loaded.instances == corpus.datasets[0].instances);
    CHECK(serialize_dataset(loaded) == read_file(dir / "d.jsonl"));
  }

  TEST_CASE("ingest_raw accepts loosely keyed arrays") {
    const auto path = write_tmp("raw.json", R"([
      {"Question": "What is X?", "Free_form_answer": "X is a drug. It helps.", "Must_have": ["X is a drug"], "Nice_to_have": ["It helps"]},
      {"Question": "Vague?", "Free_form_answer": ""},
      {"question": "Y?", "answer": "Y works.", "MH": "Y works. Y is safe.", "NH": []}
    ])");
    const auto r = ingest_raw(path, "kqa");
    CHECK(r.ok());
    REQUIRE(r.dataset.instances.size() == 3);
    CHECK(r.dataset.instances[0].id == "kqa-1");
    CHECK(r.dataset.instances[0].source == "kqa");
    CHECK_FALSE(r.dataset.instances[0].ambiguous);
    CHECK(r.dataset.instances[1].ambiguous);
    CHECK(r.dataset.instances[2].must_have.size() == 2);
  }

  TEST_CASE("leave_one_out_split") {
    std::vector<Dataset> ds;
    for (const char* name : {"LiveQA", "MedicationQA", "HealthSearchQA", "K-QA Golden", "K-QA Silver"}) {
      Dataset d{name, {}};
      for (int i = 0; i < 3; ++i) {
        Instance inst = testkit::synthetic_instance(static_cast<std::size_t>(i), name);
        inst.id = std::string(name) + "-" + std::to_string(i);
        d.instances.push_back(inst);
      }
      ds.push_back(d);
    }
    const auto split = leave_one_out_split(ds, "LiveQA");
    CHECK(split.test.name == "LiveQA");
    REQUIRE(split.train.size() == 4);
    CHECK(split.train[0].name == "MedicationQA");
    CHECK(split.train[3].name == "K-QA Silver");

    std::set<std::string> train_ids, test_ids, all_ids;
    for (const auto& d : split.train) for (const auto& i : d.instances) train_ids.insert(i.id);
    for (const auto& i : split.test.instances) test_ids.insert(i.id);
    for (const auto& d : ds) for (const auto& i : d.instances) all_ids.insert(i.id);
    std::set<std::string> both;
    for (const auto& id : test_ids) if (train_ids.count(id)) both.insert(id);
    CHECK(both.empty());
    std::set<std::string> uni = train_ids;
    uni.insert(test_ids.begin(), test_ids.end());
    CHECK(uni == all_ids);

    try {
      leave_one_out_split(ds, "Unknown");
      FAIL("expected UnknownDataset");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUnknownDataset);
    }
    try {
      leave_one_out_split({ds[0]}, "LiveQA");
      FAIL("expected DegenerateSplit");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDegenerateSplit);
    }
  }

  TEST_CASE("dataset_statistics") {
    Dataset d{"s", {}};
    Instance a;
    a.id = "a";
    a.question = "q";
    a.answer = "one two three four";
    a.must_have = {{"m1", StatementKind::kMustHave}};
    Instance b = a;
    b.id = "b";
    b.answer = "one two three four five six";
    b.must_have = {{"m1", StatementKind::kMustHave}, {"m2", StatementKind::kMustHave}, {"m3", StatementKind::kMustHave}};
    b.nice_to_have = {{"n1", StatementKind::kNiceToHave}};
    Instance amb = a;
    amb.id = "c";
    amb.ambiguous = true;
    amb.answer = "ignored entirely because the instance is ambiguous";
    d.instances = {a, b, amb};
    const auto s = dataset_statistics(d);
    CHECK(s.n_instances == 3);
    CHECK(s.n_ambiguous == 1);
    // (4 + 6) / 2 words and (1 + 3) / 2 must-have statements.
    CHECK(*s.avg_answer_words == doctest::Approx(5.0));
    CHECK(*s.avg_mh == doctest::Approx(2.0));
    CHECK(*s.avg_nh == doctest::Approx(0.5));

    const auto empty = dataset_statistics(Dataset{"e", {}});
    CHECK(empty.n_instances == 0);
    CHECK_FALSE(empty.avg_answer_words.has_value());
    CHECK_FALSE(empty.avg_mh.has_value());
    CHECK_FALSE(empty.avg_nh.has_value());
  }
}
