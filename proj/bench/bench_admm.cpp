// Serial vs OpenMP ADMM rounds and dSQP steps on the case-1 chain.
#include "dsqp/mpc.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

using namespace dsqp;

namespace {

struct Fixture {
  RunConfig cfg;
  ChainSetup setup;
  PartitionedNlp nlp;
  PrimalDualPoint p;
  QpLinearization lin;

  explicit Fixture(int S) : cfg(case_config(1)), setup(make(S)), nlp(nlp_at_start()), p(start()),
                            lin(build_qp(nlp, p, HessianMode::Auto)) {}

  ChainSetup make(int S) {
    cfg.plant.S = S;
    return make_chain_setup(cfg);
  }
  PartitionedNlp nlp_at_start() { return assemble_nlp(setup.spec, split_chain_state(cfg.initial_state())); }
  PrimalDualPoint start() {
    return solve_to_kkt(nlp, constant_guess(nlp, setup.spec, split_chain_state(cfg.initial_state())), 1e-8, 100).p;
  }
};

Fixture& fixture(int S) {
  static std::map<int, std::unique_ptr<Fixture>> cache;
  auto& f = cache[S];
  if (!f) f = std::make_unique<Fixture>(S);
  return *f;
}

void admm_rounds(benchmark::State& state, bool parallel, AveragingMode mode) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  AdmmOptions o;
  o.parallel = parallel;
  o.mode = mode;
  AdmmEngine engine(f.nlp, o);
  AdmmState s0;
  s0.z = f.p.z;
  s0.gamma = Mat(f.nlp.E_stacked()).transpose() * f.p.lambda;
  for (auto _ : state) {
    AdmmState s = engine.run(f.lin.blocks, s0, 6);
    benchmark::DoNotOptimize(s.z.data());
  }
  state.SetItemsProcessed(state.iterations() * 6);
}

void dsqp_step(benchmark::State& state, bool parallel) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  DsqpSettings s = f.cfg.dsqp;
  s.parallel = parallel;
  DsqpSolver solver(f.nlp, s);
  const Vec gamma0 = Mat(f.nlp.E_stacked()).transpose() * f.p.lambda;
  for (auto _ : state) {
    DsqpResult r = solver.run(f.nlp, f.p, gamma0);
    benchmark::DoNotOptimize(r.p.z.data());
  }
}

void BM_AdmmSerial(benchmark::State& st) { admm_rounds(st, false, AveragingMode::Centralized); }
void BM_AdmmOpenMP(benchmark::State& st) { admm_rounds(st, true, AveragingMode::Centralized); }
void BM_AdmmDecentralizedSerial(benchmark::State& st) { admm_rounds(st, false, AveragingMode::Decentralized); }
void BM_AdmmDecentralizedOpenMP(benchmark::State& st) { admm_rounds(st, true, AveragingMode::Decentralized); }
void BM_DsqpStepSerial(benchmark::State& st) { dsqp_step(st, false); }
void BM_DsqpStepOpenMP(benchmark::State& st) { dsqp_step(st, true); }

}  // namespace

BENCHMARK(BM_AdmmSerial)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdmmOpenMP)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdmmDecentralizedSerial)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdmmDecentralizedOpenMP)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DsqpStepSerial)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DsqpStepOpenMP)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
