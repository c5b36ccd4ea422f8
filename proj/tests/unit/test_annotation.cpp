#include <doctest.h>

#include <random>
#include <set>
#include <thread>

#include "forge/annotation.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "testkit.hpp"

using namespace forge;

namespace {

struct Fixture {
  std::vector<Instance> instances;
  AnswerSource model{"model", {}};
  AnswerSource expert{"expert", {}};
};

Fixture fixture(std::size_t n) {
  Fixture f;
  for (std::size_t i = 0; i < n; ++i) {
    auto inst = testkit::synthetic_instance(i, "s");
    f.model.answers[inst.id] = "generated reply " + std::to_string(i);
    f.expert.answers[inst.id] = inst.answer;
    f.instances.push_back(inst);
  }
  return f;
}

AnnotationRecord record(const std::string& task, const std::string& who, std::map<CriterionCode, Side> choices) {
  return {task, who, std::move(choices), "2026-01-01T00:00:00Z"};
}

std::map<CriterionCode, Side> all(Side s) {
  std::map<CriterionCode, Side> m;
  for (const auto& c : criteria()) m[c.code] = s;
  return m;
}

}  // namespace

TEST_SUITE("annotation") {
  TEST_CASE("nine criteria with fixed polarity and verbatim definitions") {
    REQUIRE(criteria().size() == 9);
    const char* positive[] = {"MC", "RC", "KR", "R"};
    const char* negative[] = {"IRC", "OII", "PDB", "PHE", "PHL"};
    for (const char* p : positive) CHECK(criterion(parse_criterion(p)).polarity == Polarity::kPositiveWhenSelected);
    for (const char* n : negative) CHECK(criterion(parse_criterion(n)).polarity == Polarity::kNegativeWhenSelected);
    CHECK(criterion(CriterionCode::kMC).definition ==
          "Which answer better reflects the current consensus of the scientific and clinical community?");
    CHECK(criterion(CriterionCode::kOII).definition == "Which answer omits more important information?");
    CHECK_THROWS_AS(parse_criterion("XX"), Error);
  }

  TEST_CASE("create_tasks is deterministic per seed and blinds both ways") {
    const auto f = fixture(10);
    const auto a = create_tasks(f.instances, f.model, f.expert, 7);
    const auto b = create_tasks(f.instances, f.model, f.expert, 7);
    REQUIRE(a.tasks.size() == 10);
    std::set<std::string> a_sources;
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(a.tasks[i].to_json_line() == b.tasks[i].to_json_line());
      CHECK(a.tasks[i].source_a != a.tasks[i].source_b);
      const auto& text_a = a.tasks[i].side_a;
      const auto& expected = a.tasks[i].source_a == "model" ? f.model.answers.at(a.tasks[i].task_id)
                                                            : f.expert.answers.at(a.tasks[i].task_id);
      CHECK(text_a == expected);
      a_sources.insert(a.tasks[i].source_a);
    }
    CHECK(a_sources.size() == 2);
    const auto c = create_tasks(f.instances, f.model, f.expert, 8);
    bool differs = false;
    for (std::size_t i = 0; i < 10; ++i) differs |= c.tasks[i].source_a != a.tasks[i].source_a;
    CHECK(differs);
  }

  TEST_CASE("create_tasks errors and rejections") {
    auto f = fixture(3);
    f.expert.answers.erase(f.instances[1].id);
    try {
      create_tasks(f.instances, f.model, f.expert, 1);
      FAIL("expected MissingAnswer");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kMissingAnswer);
      CHECK(std::string(e.what()).find(f.instances[1].id) != std::string::npos);
    }
    f = fixture(3);
    f.expert.answers[f.instances[2].id] = f.model.answers[f.instances[2].id];
    const auto out = create_tasks(f.instances, f.model, f.expert, 1);
    CHECK(out.tasks.size() == 2);
    REQUIRE(out.rejected.size() == 1);
    CHECK(out.rejected[0].instance_id == f.instances[2].id);
  }

  TEST_CASE("blinded payload never names the sources") {
    auto f = fixture(1);
    const auto t = create_tasks(f.instances, f.model, f.expert, 3).tasks.at(0);
    const auto payload = t.blinded_json();
    CHECK(payload.find("\"model\"") == std::string::npos);
    CHECK(payload.find("\"expert\"") == std::string::npos);
    CHECK(ComparisonTask::from_json_line(t.to_json_line()).source_b == t.source_b);
  }

  TEST_CASE("agreement examples") {
    ComparisonTask t{"t", "q", "a text", "b text", "model", "expert"};
    auto mc_plus = [](Side first, Side second, Side third) {
      std::vector<std::map<CriterionCode, Side>> out(3, all(Side::kA));
      out[0][CriterionCode::kMC] = first;
      out[1][CriterionCode::kMC] = second;
      out[2][CriterionCode::kMC] = third;
      return out;
    };
    const auto c = mc_plus(Side::kA, Side::kA, Side::kB);
    const auto rep = compute_agreement({t}, {record("t", "x", c[0]), record("t", "y", c[1]), record("t", "z", c[2])});
    REQUIRE(rep.tasks.size() == 1);
    const auto& mc = rep.tasks[0].outcomes.at(CriterionCode::kMC);
    CHECK(mc.agreed);
    CHECK(mc.votes_a == 2);
    CHECK(*mc.majority == Side::kA);
    CHECK(mc.better_source == "model");
    // [A, A, A] on a negative criterion favours the other side.
    const auto& irc = rep.tasks[0].outcomes.at(CriterionCode::kIRC);
    CHECK(*irc.majority == Side::kA);
    CHECK(irc.better_source == "expert");

    const auto two = compute_agreement({t}, {record("t", "x", all(Side::kA)), record("t", "y", all(Side::kB))});
    CHECK(two.tasks.empty());
    CHECK(two.incomplete == std::vector<std::string>{"t"});
    CHECK(two.summary.at(CriterionCode::kMC).complete == 0);
  }

  TEST_CASE("store: submissions, duplicates, replay and snapshot") {
    const auto f = fixture(10);
    const auto tasks = create_tasks(f.instances, f.model, f.expert, 7).tasks;
    const auto dir = testkit::fresh_dir("store");
    const auto path = dir / "records.jsonl";

    std::mt19937_64 gen(1);
    std::vector<AnnotationRecord> scripted;
    {
      AnnotationStore store(tasks, path, {}, 10);
      for (const char* who : {"ann1", "ann2", "ann3"}) {
        std::set<std::string> seen;
        while (auto t = store.next_task(who)) {
          CHECK(seen.insert(t->task_id).second);
          std::map<CriterionCode, Side> ch;
          for (const auto& c : criteria()) ch[c.code] = gen() % 2 ? Side::kA : Side::kB;
          AnnotationRecord r{t->task_id, who, ch, ""};
          store.submit(r);
          scripted.push_back(r);
        }
        CHECK(seen.size() == 10);
      }
      CHECK_FALSE(store.next_task("ann4").has_value());

      AnnotationRecord dup{tasks[0].task_id, "ann1", all(Side::kA), ""};
      try {
        store.submit(dup);
        FAIL("expected DuplicateSubmission");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kDuplicateSubmission);
      }
      AnnotationRecord partial{tasks[0].task_id, "ann9", all(Side::kA), ""};
      partial.choices.erase(CriterionCode::kPHL);
      try {
        store.submit(partial);
        FAIL("expected IncompleteChoices");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kIncompleteChoices);
      }
      try {
        store.submit({"missing", "ann1", all(Side::kA), ""});
        FAIL("expected UnknownTask");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kUnknownTask);
      }

      // Brute-force recomputation of every majority from the scripted choices.
      const auto rep = store.report();
      CHECK(rep.tasks.size() == 10);
      CHECK(rep.incomplete.empty());
      std::map<CriterionCode, std::size_t> agreed;
      for (const auto& task : tasks) {
        const auto* ta = &rep.tasks[0];
        for (const auto& x : rep.tasks) if (x.task_id == task.task_id) ta = &x;
        for (const auto& c : criteria()) {
          int a = 0, b = 0;
          for (const auto& r : scripted) {
            if (r.task_id != task.task_id) continue;
            (r.choices.at(c.code) == Side::kA ? a : b)++;
          }
          const auto& o = ta->outcomes.at(c.code);
          CHECK(o.votes_a == a);
          CHECK(o.votes_b == b);
          CHECK(o.agreed == (std::max(a, b) >= 2));
          const Side top = a > b ? Side::kA : Side::kB;
          const Side better = c.polarity == Polarity::kPositiveWhenSelected ? top : other(top);
          CHECK(o.better_source == task.source_of(better));
          agreed[c.code] += std::max(a, b) >= 2;
        }
      }
      for (const auto& [code, s] : rep.summary) {
        CHECK(s.agreed == agreed[code]);
        CHECK(s.agreement_rate == doctest::Approx(static_cast<double>(agreed[code]) / 10));
      }
    }
    auto snapshot = path;
    snapshot += ".snapshot.json";
    CHECK(std::filesystem::exists(snapshot));

    // Replay from the append-only file reproduces the exact report.
    const auto replayed = load_records(path);
    CHECK(replayed.size() == 30);
    for (std::size_t i = 0; i < replayed.size(); ++i) {
      CHECK(replayed[i].task_id == scripted[i].task_id);
      CHECK(replayed[i].annotator_id == scripted[i].annotator_id);
    }
    AnnotationStore reopened(tasks, path);
    CHECK(reopened.report().to_json() == compute_agreement(tasks, replayed).to_json());
    CHECK(read_file(snapshot) == compute_agreement(tasks, replayed).to_json());
    CHECK_FALSE(reopened.next_task("ann1").has_value());
  }

  TEST_CASE("concurrent annotators never double-answer") {
    const auto f = fixture(6);
    const auto tasks = create_tasks(f.instances, f.model, f.expert, 2).tasks;
    const auto dir = testkit::fresh_dir("store-mt");
    AnnotationStore store(tasks, dir / "records.jsonl");
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w) {
      threads.emplace_back([&, w] {
        const std::string who = "ann" + std::to_string(w);
        while (auto t = store.next_task(who)) store.submit({t->task_id, who, all(Side::kB), ""});
      });
    }
    for (auto& t : threads) t.join();
    const auto recs = store.records();
    CHECK(recs.size() == 18);
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : recs) CHECK(keys.insert({r.task_id, r.annotator_id}).second);
    CHECK(store.report().tasks.size() == 6);
  }
}
