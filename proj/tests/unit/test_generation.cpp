#include <doctest.h>

#include <atomic>
#include <mutex>
#include <set>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/generation.hpp"
#include "forge/records.hpp"
#include "forge/stub.hpp"
#include "testkit.hpp"

using namespace forge;

namespace {

StubFixtures simple_fixtures() {
  StubFixtures fx;
  fx.add("Q?", {"det", {"s1", "s2", "s3"}, std::nullopt});
  return fx;
}

// Fails every request whose temperature is non-zero and seed matches.
class SelectiveFailure final : public InferenceClient {
 public:
  explicit SelectiveFailure(std::set<std::int64_t> bad_seeds, bool fail_all = false)
      : bad_(std::move(bad_seeds)), fail_all_(fail_all) {}
  CompletionResponse complete(const CompletionRequest& r) override {
    ++calls;
    if (fail_all_ || (r.seed && bad_.count(*r.seed))) throw Error(ErrorKind::kEndpointUnavailable, "gone");
    return {"ok " + std::to_string(r.seed.value_or(-1)), std::nullopt};
  }
  std::atomic<int> calls{0};

 private:
  std::set<std::int64_t> bad_;
  bool fail_all_;
};

class ConcurrencyProbe final : public InferenceClient {
 public:
  CompletionResponse complete(const CompletionRequest&) override {
    const int now = ++active_;
    {
      std::lock_guard<std::mutex> lock(mu_);
      peak = std::max(peak, now);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --active_;
    return {"x", std::nullopt};
  }
  int peak = 0;

 private:
  std::atomic<int> active_{0};
  std::mutex mu_;
};

}  // namespace

TEST_SUITE("generation") {
  TEST_CASE("k = 6 gives one deterministic and five sampled slots") {
    StubInferenceClient client(simple_fixtures());
    SamplingPolicy p;
    p.seed = 0;
    const auto set = sample_responses("i", "Q?", p, client);
    REQUIRE(set.responses.size() == 6);
    CHECK(set.responses[0].temperature == 0.0);
    CHECK(set.responses[0].text == "det");
    for (int s = 1; s < 6; ++s) {
      CHECK(set.responses[s].index == s);
      CHECK(set.responses[s].temperature == 1.0);
    }
    // Seed s picks samples[(s - 1) mod 3].
    CHECK(set.responses[1].text == "s1");
    CHECK(set.responses[3].text == "s3");
    CHECK(set.responses[4].text == "s1");
  }

  TEST_CASE("k = 1 gives only the deterministic slot") {
    StubInferenceClient client(simple_fixtures());
    SamplingPolicy p;
    p.k = 1;
    const auto set = sample_responses("i", "Q?", p, client);
    REQUIRE(set.responses.size() == 1);
    CHECK(set.responses[0].temperature == 0.0);
  }

  TEST_CASE("policy validation") {
    SamplingPolicy p;
    p.k = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p.k = 2;
    p.sample_temperature = -1;
    CHECK_THROWS_AS(p.validate(), Error);
  }

  TEST_CASE("stub completion is deterministic and rejects unknown prompts") {
    const auto fx = simple_fixtures();
    CompletionRequest r;
    r.prompt = "Q?";
    r.temperature = 1.0;
    r.seed = 2;
    CHECK(fx.complete(r).text == fx.complete(r).text);
    CHECK(fx.complete(r).text == "s2");
    r.temperature = 0.0;
    CHECK(fx.complete(r).text == "det");
    r.prompt = "unknown";
    try {
      fx.complete(r);
      FAIL("expected UnknownFixture");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUnknownFixture);
    }
    StubFixtures with_default = fx;
    with_default.set_default({"fallback", {}, std::nullopt});
    CHECK(with_default.complete(r).text == "fallback");
  }

  TEST_CASE("fixture files round trip") {
    auto fx = simple_fixtures();
    fx.set_logprob_scale(0.5);
    fx.set_fail_first(2);
    const auto back = StubFixtures::parse(fx.to_json());
    CHECK(back.to_json() == fx.to_json());
    CHECK(back.fail_first() == 2);

    const auto literal = StubFixtures::parse(
        R"({"entries":[{"prompt":"Q?","deterministic":"d","samples":["a"],"token_logprobs":[-0.5]}]})");
    CompletionRequest r;
    r.prompt = "Q?";
    r.logprobs = true;
    const auto res = literal.complete(r);
    CHECK(res.text == "d");
    REQUIRE(res.token_logprobs.has_value());
    CHECK(res.token_logprobs->at(0) == -0.5);
  }

  TEST_CASE("echo mode returns pseudo logprobs or MissingLogprobs") {
    auto fx = simple_fixtures();
    CompletionRequest r;
    r.prompt = "any text at all";
    r.echo = true;
    r.max_tokens = 0;
    CHECK_THROWS_AS(fx.complete(r), Error);
    fx.set_logprob_scale(1.0);
    const auto res = fx.complete(r);
    REQUIRE(res.token_logprobs.has_value());
    CHECK(res.token_logprobs->size() == 4);
    for (double lp : *res.token_logprobs) {
      CHECK(lp <= -0.05);
      CHECK(lp > -1.05);
    }
    CHECK(pseudo_logprobs("a b", 2.0)[0] == doctest::Approx(2.0 * pseudo_logprobs("a", 1.0)[0]));
  }

  TEST_CASE("wire JSON round trips") {
    CompletionRequest r;
    r.model = "m";
    r.prompt = "p \"quoted\"";
    r.temperature = 1.0;
    r.max_tokens = 12;
    r.seed = 7;
    r.logprobs = true;
    const auto back = CompletionRequest::from_json(r.to_json());
    CHECK(back.prompt == r.prompt);
    CHECK(back.seed == r.seed);
    CHECK(back.logprobs);
    CHECK(back.max_tokens == 12);
    const auto res = CompletionResponse::from_json(R"({"text":"t","token_logprobs":[-1,-2]})");
    CHECK(res.token_logprobs->size() == 2);
    CHECK(CompletionResponse::from_json(res.to_json()).text == "t");
    CHECK_THROWS_AS(CompletionResponse::from_json("{}"), Error);
  }

  TEST_CASE("a set with some failed slots is rejected as PartialSet") {
    SelectiveFailure client({2});
    SamplingPolicy p;
    p.seed = 0;
    try {
      sample_responses("i", "Q?", p, client);
      FAIL("expected PartialSet");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kPartialSet);
      CHECK(std::string(e.what()).find("[2]") != std::string::npos);
    }
    SelectiveFailure dead({}, true);
    try {
      sample_responses("i", "Q?", p, dead);
      FAIL("expected EndpointUnavailable");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEndpointUnavailable);
    }
    CHECK_THROWS_AS(sample_responses("i", "  ", p, dead), Error);
  }

  TEST_CASE("sample_instances drops failing questions and keeps the rest in order") {
    const auto corpus = testkit::synthetic_corpus(5, 1);
    auto instances = corpus.all_instances();
    Instance orphan = instances[0];
    orphan.id = "orphan";
    orphan.question = "A question with no fixture?";
    instances.insert(instances.begin() + 2, orphan);
    StubInferenceClient client(corpus.fixtures);
    SamplingPolicy p;
    p.seed = 0;
    const auto out = sample_instances(instances, p, client, {"policy", 4});
    REQUIRE(out.sets.size() == 5);
    REQUIRE(out.rejected.size() == 1);
    CHECK(out.rejected[0].instance_id == "orphan");
    CHECK(out.sets[2].instance_id == instances[3].id);
    for (const auto& s : out.sets) CHECK(s.responses.size() == 6);
  }

  TEST_CASE("in-flight requests stay within the bound") {
    ConcurrencyProbe probe;
    std::vector<Instance> instances;
    for (int i = 0; i < 6; ++i) {
      Instance inst = testkit::synthetic_instance(static_cast<std::size_t>(i), "s");
      instances.push_back(inst);
    }
    SamplingPolicy p;
    sample_instances(instances, p, probe, {"policy", 3});
    CHECK(probe.peak <= 3);
    CHECK(probe.peak >= 2);
  }

  TEST_CASE("two runs against the stub give byte-identical sample files") {
    const auto corpus = testkit::synthetic_corpus(10, 2);
    SamplingPolicy p;
    p.seed = 0;
    const auto dir = testkit::fresh_dir("samples");
    std::string digests[2];
    for (int run = 0; run < 2; ++run) {
      StubInferenceClient client(corpus.fixtures);
      const auto out = sample_instances(corpus.all_instances(), p, client, {"policy", run == 0 ? 1u : 8u});
      digests[run] = write_sampled_sets(out.sets, dir / ("s" + std::to_string(run) + ".jsonl"));
    }
    CHECK(digests[0] == digests[1]);
    const auto loaded = load_sampled_sets(dir / "s0.jsonl");
    CHECK(loaded.size() == 10);
    CHECK(loaded[0].to_json_line() == SampledSet::from_json_line(loaded[0].to_json_line()).to_json_line());
  }

  TEST_CASE("retry policy delays grow and respect the cap") {
    RetryPolicy r;
    r.jitter = 0.0;
    CHECK(r.delay_for(0).count() == 100);
    CHECK(r.delay_for(1).count() == 200);
    CHECK(r.delay_for(10).count() == 2000);
    r.jitter = 0.5;
    r.seed = 9;
    const auto a = r.delay_for(2);
    CHECK(a.count() <= 400);
    CHECK(a.count() >= 200);
    CHECK(r.delay_for(2) == a);
  }

  TEST_CASE("with_retries retries transient errors only") {
    RetryPolicy r;
    r.base_delay = std::chrono::milliseconds(1);
    int calls = 0;
    CHECK(with_retries(r, "t", [&](int) {
            if (++calls < 3) throw Error(ErrorKind::kClient, "flaky");
            return 5;
          }) == 5);
    CHECK(calls == 3);
    calls = 0;
    try {
      with_retries(r, "t", [&](int) -> int { ++calls; throw Error(ErrorKind::kClient, "down"); });
      FAIL("expected EndpointUnavailable");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEndpointUnavailable);
    }
    CHECK(calls == 3);
    calls = 0;
    CHECK_THROWS_AS(with_retries(r, "t", [&](int) -> int { ++calls; throw Error(ErrorKind::kProtocol, "bad"); }), Error);
    CHECK(calls == 1);
  }
}
