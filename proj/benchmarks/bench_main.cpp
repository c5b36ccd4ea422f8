#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "forge/dataset.hpp"
#include "forge/preference.hpp"
#include "forge/rouge.hpp"
#include "forge/scoring.hpp"
#include "forge/text.hpp"

namespace {

forge::Tokens random_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  forge::Tokens t(n);
  for (auto& tok : t) tok = "w" + std::to_string(gen() % vocab);
  return t;
}

void BM_RougeScores(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cand = random_tokens(n, 400, 1);
  const auto ref = random_tokens(n, 400, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forge::rouge_scores(cand, ref));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RougeScores)->Arg(64)->Arg(256)->Arg(1024);

void BM_LcsLength(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tokens(n, 50, 3);
  const auto b = random_tokens(n, 50, 4);
  for (auto _ : state) benchmark::DoNotOptimize(forge::lcs_length(a, b));
}
BENCHMARK(BM_LcsLength)->Arg(256)->Arg(2048);

forge::Instance bench_instance() {
  forge::Instance inst;
  inst.id = "b0";
  inst.question = "What should I know before taking warfarin?";
  inst.answer =
      "Warfarin should be taken exactly as prescribed. Warfarin can cause serious bleeding. "
      "Regular INR blood tests are needed. Many foods rich in vitamin K change how warfarin works.";
  for (const char* s : {"Warfarin should be taken exactly as prescribed.",
                        "Warfarin can cause serious bleeding.", "Regular INR blood tests are needed."}) {
    inst.must_have.push_back({s, forge::StatementKind::kMustHave});
  }
  inst.nice_to_have.push_back(
      {"Many foods rich in vitamin K change how warfarin works.", forge::StatementKind::kNiceToHave});
  return inst;
}

void BM_ScoreResponseMock(benchmark::State& state) {
  const auto inst = bench_instance();
  const auto clients = forge::ScoringClients::mock();
  const std::string response =
      "Take warfarin exactly as prescribed. It can cause serious bleeding, so regular INR blood "
      "tests are needed.";
  for (auto _ : state) benchmark::DoNotOptimize(forge::score_response(inst, response, clients, {}));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScoreResponseMock);

void BM_PairInstance(benchmark::State& state) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 400.0);
  std::vector<forge::ScoredResponse> responses(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < responses.size(); ++i) {
    responses[i] = {"q", static_cast<int>(i), "r" + std::to_string(i), {}};
    responses[i].report.terms.total = u(gen);
  }
  for (auto _ : state) benchmark::DoNotOptimize(forge::pair_instance(responses, "q", {}));
}
BENCHMARK(BM_PairInstance)->Arg(6)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
