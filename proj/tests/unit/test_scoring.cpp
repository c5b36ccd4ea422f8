#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "forge/error.hpp"
#include "forge/scoring.hpp"
#include "forge/text.hpp"
#include "testkit.hpp"

using namespace forge;

namespace {

using L = EntailmentLabel;

Instance crafted_instance() {
  Instance inst;
  inst.id = "crafted";
  inst.question = "How should the drug be taken?";
  inst.answer = "Take with food and avoid alcohol. The drug is not habit forming.";
  inst.must_have = {{"take with food", StatementKind::kMustHave}, {"avoid alcohol", StatementKind::kMustHave}};
  inst.nice_to_have = {{"the drug is not habit forming", StatementKind::kNiceToHave}};
  return inst;
}

class FailingEntailment final : public EntailmentClient {
 public:
  explicit FailingEntailment(std::string bad) : bad_(std::move(bad)) {}
  EntailmentLabel classify(std::string_view, std::string_view hypothesis) override {
    if (hypothesis == bad_) throw Error(ErrorKind::kClient, "down");
    return L::kNeutral;
  }

 private:
  std::string bad_;
};

std::vector<std::size_t> argsort_desc(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace

TEST_SUITE("scoring") {
  TEST_CASE("hallucination_score") {
    CHECK(hallucination_score({L::kContradiction, L::kNeutral, L::kEntailment}) == doctest::Approx(100.0 / 3));
    CHECK(hallucination_score({L::kNeutral, L::kEntailment}) == 0.0);
    CHECK(hallucination_score({L::kContradiction, L::kContradiction}) == 100.0);
    try {
      hallucination_score({});
      FAIL("expected EmptyStatementSet");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEmptyStatementSet);
    }
  }

  TEST_CASE("comprehensiveness_score") {
    CHECK(comprehensiveness_score({L::kEntailment, L::kNeutral, L::kEntailment, L::kContradiction}) == 50.0);
    CHECK(comprehensiveness_score({L::kEntailment, L::kEntailment}) == 100.0);
    try {
      comprehensiveness_score({});
      FAIL("expected EmptyMustHave");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEmptyMustHave);
    }
  }

  TEST_CASE("HL and CP match direct counting over every verdict assignment, |S| <= 4") {
    const L labels[3] = {L::kEntailment, L::kNeutral, L::kContradiction};
    for (int mh = 1; mh <= 4; ++mh) {
      for (int nh = 0; mh + nh <= 4; ++nh) {
        const int s = mh + nh;
        int combos = 1;
        for (int i = 0; i < s; ++i) combos *= 3;
        for (int code = 0; code < combos; ++code) {
          std::vector<L> all;
          int c = code, contradicted = 0, entailed_mh = 0;
          for (int i = 0; i < s; ++i) {
            const L l = labels[c % 3];
            c /= 3;
            all.push_back(l);
            contradicted += l == L::kContradiction;
            if (i < mh) entailed_mh += l == L::kEntailment;
          }
          const std::vector<L> mh_only(all.begin(), all.begin() + mh);
          CHECK(hallucination_score(all) == 100.0 * contradicted / s);
          CHECK(comprehensiveness_score(mh_only) == 100.0 * entailed_mh / mh);
        }
      }
    }
  }

  TEST_CASE("composite_score examples") {
    CHECK(composite_score({}, {}, {0.0, 0.0}, {}).total == 0.0);

    RougeScores r;
    r.r1.f = 0.5;
    r.r2.f = 0.5;
    r.rl.f = 0.5;
    const SimilarityScores sim{0.5, 0.7};
    const FactualityScores fact{20.0, 80.0};
    const auto t = composite_score(r, sim, fact, {1, 1, 1});
    // 100*1.5 + 100*1.2 + (80 - 20)
    CHECK(t.wc_scaled == doctest::Approx(150.0));
    CHECK(t.ss_scaled == doctest::Approx(120.0));
    CHECK(t.fact_term == doctest::Approx(60.0));
    CHECK(t.total == doctest::Approx(330.0));
    CHECK(composite_score(r, sim, fact, {1, 1, 0}).total == doctest::Approx(270.0));
  }

  TEST_CASE("undefined comprehensiveness contributes -HL only") {
    const auto t = composite_score({}, {}, {25.0, std::nullopt}, {0, 0, 1});
    CHECK(t.fact_term == -25.0);
    CHECK(t.total == -25.0);
  }

  TEST_CASE("weights are validated") {
    CHECK_THROWS_AS((CompositeWeights{-1, 1, 1}.validate()), Error);
    CHECK_THROWS_AS((CompositeWeights{1, std::nan(""), 1}.validate()), Error);
    CHECK_NOTHROW((CompositeWeights{0, 0, 0}.validate()));
  }

  TEST_CASE("aggregate_report table convention") {
    RougeScores r;
    r.r1.f = 0.114;
    r.r2.f = 0.025;
    r.rl.f = 0.083;
    const auto s = aggregate_report(r, {0.505, 0.789}, {43.8, 59.9});
    CHECK(s.wc_mean == doctest::Approx(7.4).epsilon(0.05 / 7.4));
    CHECK(s.ss_mean == doctest::Approx(64.7));
    CHECK(s.fact_diff == doctest::Approx(16.1));
  }

  TEST_CASE("linearity in alpha3 and argmax invariance with alpha3 = 0") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> base, perturbed;
      for (int i = 0; i < 6; ++i) {
        RougeScores r;
        r.r1.f = u(gen);
        r.r2.f = u(gen);
        r.rl.f = u(gen);
        const SimilarityScores sim{2 * u(gen) - 1, u(gen)};
        const FactualityScores fact{100 * u(gen), 100 * u(gen)};
        const double a = 3 * u(gen);
        const double d = composite_score(r, sim, fact, {1, 1, a}).total -
                         composite_score(r, sim, fact, {1, 1, 0}).total;
        CHECK(std::abs(d - a * (*fact.comprehensiveness - fact.hallucination)) <= 1e-12);
        base.push_back(composite_score(r, sim, fact, {1, 1, 0}).total);
        const FactualityScores other{100 * u(gen), u(gen) < 0.2 ? std::nullopt : std::optional<double>(100 * u(gen))};
        perturbed.push_back(composite_score(r, sim, other, {1, 1, 0}).total);
      }
      CHECK(argsort_desc(base) == argsort_desc(perturbed));
    }
  }

  TEST_CASE("mock entailment rules") {
    MockEntailmentClient m;
    CHECK(entail("Take it with food, daily.", "take with food", m) == L::kEntailment);
    CHECK(entail("The drug is habit forming.", "the drug is not habit forming", m) == L::kContradiction);
    CHECK(entail("You should take it.", "never take it", m) == L::kContradiction);
    CHECK(entail("Take with food.", "avoid alcohol", m) == L::kNeutral);
    CHECK(entail("no", "no", m) == L::kEntailment);
    CHECK_THROWS_AS(entail("", "x", m), Error);
  }

  TEST_CASE("mock similarity is token-set Jaccard") {
    MockSimilarityClient m;
    const auto s = m.score("a b c", "b c d d");
    CHECK(s.bl == doctest::Approx(0.5));
    CHECK(s.bs == doctest::Approx(0.5));
    CHECK(m.score("", "").bs == 0.0);
  }

  TEST_CASE("score_response: identity response") {
    const auto inst = testkit::synthetic_instance(3, "s");
    const auto rep = score_response(inst, inst.answer, ScoringClients::mock(), {});
    CHECK(rep.terms.wc_scaled == doctest::Approx(300.0));
    CHECK(rep.sim.bl == 1.0);
    CHECK(rep.sim.bs == 1.0);
    CHECK(rep.fact.hallucination == 0.0);
    CHECK(*rep.fact.comprehensiveness == 100.0);
    CHECK(rep.terms.fact_term == 100.0);
    CHECK(rep.total() == doctest::Approx(600.0));
    CHECK(rep.verdicts.size() == inst.statement_count());
  }

  TEST_CASE("score_response: unrelated response") {
    const auto inst = testkit::synthetic_instance(3, "s");
    const auto rep = score_response(inst, "zzz yyy", ScoringClients::mock(), {});
    CHECK(rep.terms.wc_scaled == 0.0);
    CHECK(*rep.fact.comprehensiveness == 0.0);
  }

  TEST_CASE("score_response: crafted verdicts") {
    const auto inst = crafted_instance();
    const auto rep = score_response(inst, "Take with food. The drug is habit forming.",
                                    ScoringClients::mock(), {});
    REQUIRE(rep.verdicts.size() == 3);
    CHECK(rep.verdicts[0].label == L::kEntailment);
    CHECK(rep.verdicts[1].label == L::kNeutral);
    CHECK(rep.verdicts[2].label == L::kContradiction);
    CHECK(rep.verdicts[2].kind == StatementKind::kNiceToHave);
    CHECK(rep.verdicts[2].index == 0);
    CHECK(*rep.fact.comprehensiveness == 50.0);
    CHECK(rep.fact.hallucination == doctest::Approx(100.0 / 3));
  }

  TEST_CASE("score_response flags empty responses and missing must-have") {
    const auto inst = crafted_instance();
    const auto empty = score_response(inst, "   ", ScoringClients::mock(), {});
    CHECK(std::find(empty.flags.begin(), empty.flags.end(), "empty_response") != empty.flags.end());
    CHECK(empty.total() == 0.0);

    Instance no_mh = inst;
    no_mh.must_have.clear();
    const auto rep = score_response(no_mh, "The drug is habit forming.", ScoringClients::mock(), {});
    CHECK_FALSE(rep.fact.comprehensiveness.has_value());
    CHECK(std::find(rep.flags.begin(), rep.flags.end(), "empty_must_have") != rep.flags.end());
    CHECK(rep.terms.fact_term == -100.0);

    Instance amb = inst;
    amb.ambiguous = true;
    CHECK_THROWS_AS(score_response(amb, "x", ScoringClients::mock(), {}), Error);
  }

  TEST_CASE("client errors carry the statement index") {
    const auto inst = crafted_instance();
    ScoringClients clients = ScoringClients::mock();
    clients.entailment = std::make_shared<FailingEntailment>("the drug is not habit forming");
    try {
      score_response(inst, "anything", clients, {});
      FAIL("expected ClientError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kClient);
      CHECK(std::string(e.what()).find("statement 2") != std::string::npos);
    }
  }

  TEST_CASE("score_batch preserves order and is deterministic") {
    const auto corpus = testkit::synthetic_corpus(8, 1);
    const auto instances = corpus.all_instances();
    std::vector<ScoreJob> jobs;
    for (const auto& inst : instances) {
      jobs.push_back({&inst, inst.answer});
      jobs.push_back({&inst, inst.must_have[0].text});
    }
    const auto a = score_batch(jobs, ScoringClients::mock(), {}, 8);
    const auto b = score_batch(jobs, ScoringClients::mock(), {}, 1);
    REQUIRE(a.size() == jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto seq = score_response(*jobs[i].instance, jobs[i].response, ScoringClients::mock(), {});
      CHECK(a[i].total() == seq.total());
      CHECK(b[i].total() == seq.total());
    }
  }

  TEST_CASE("entailment labels round trip through strings") {
    for (L l : {L::kEntailment, L::kNeutral, L::kContradiction}) CHECK(parse_entailment_label(to_string(l)) == l);
    try {
      parse_entailment_label("maybe");
      FAIL("expected ProtocolError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kProtocol);
    }
  }
}
