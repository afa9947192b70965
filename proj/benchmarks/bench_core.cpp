// Microbenchmarks for the hot paths of a study: bandwidth neighborhood
// assembly, the ND system build, outcome generation, propensity solves,
// and phi0 fitting throughput.

#include <benchmark/benchmark.h>

#include <memory>

#include "netexp/auxiliary.hpp"
#include "netexp/dgp.hpp"
#include "netexp/estimators.hpp"
#include "netexp/hac.hpp"
#include "netexp/rng.hpp"

using namespace netexp;

namespace {

struct BenchFixture {
  std::shared_ptr<const Graph> graph;
  Design design = Design::constant(1, 0.5);
  ExposureSpec exposure = ExposureSpec::neighbor_count_threshold();
  std::shared_ptr<const PropensityTable> pi;
  Eigen::VectorXd x, eps;
  std::vector<std::uint8_t> d;
  std::vector<int> t;

  explicit BenchFixture(std::size_t n) {
    auto rgg = rgg_generate(n, 1.5, 99);
    graph = std::make_shared<Graph>(std::move(rgg.graph));
    const std::size_t m = graph->size();
    design = Design::constant(m, 0.5);
    pi = std::make_shared<const PropensityTable>(
        propensity_exact(exposure, design, *graph));
    Rng rng(7);
    x.resize(m);
    eps.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] = rng.normal();
      eps[i] = rng.normal() + rgg.coords[i][0] - 0.5;
    }
    d = sample_assignment(design, rng);
    t = exposure_eval(exposure, d, *graph);
  }

  Dataset dataset(Eigen::MatrixXd z) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(graph->size());
    Rng rng(13);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.normal();
    return Dataset(y, d, t, pi, std::move(z), {1, 0});
  }
};

void BM_BandwidthNeighborhoods(benchmark::State& state) {
  const BenchFixture fx(state.range(0));
  for (auto _ : state) {
    BandwidthNeighborhoods bw(*fx.graph, 3, BandwidthMode::inclusive);
    benchmark::DoNotOptimize(bw.pair_count());
  }
}
BENCHMARK(BM_BandwidthNeighborhoods)->Arg(1000)->Arg(3000);

void BM_PropensityExact(benchmark::State& state) {
  const BenchFixture fx(state.range(0));
  for (auto _ : state) {
    auto pi = propensity_exact(fx.exposure, fx.design, *fx.graph);
    benchmark::DoNotOptimize(pi.matrix().sum());
  }
}
BENCHMARK(BM_PropensityExact)->Arg(1000)->Arg(3000);

void BM_NdSolve(benchmark::State& state) {
  const BenchFixture fx(state.range(0));
  const BandwidthNeighborhoods bw(*fx.graph, 3, BandwidthMode::inclusive);
  const auto spec = AuxiliarySpec::linear_in_means_set();
  Eigen::MatrixXd xmat(fx.x.size(), 1);
  xmat.col(0) = fx.x;
  const Eigen::MatrixXd z = spec.eval(xmat, fx.d, *fx.graph);
  const Dataset ds = fx.dataset(z);
  for (auto _ : state) {
    const auto est = nd_solve(ds, Star::haj, bw, NdMode::pooled);
    benchmark::DoNotOptimize(est.sigma2_hat);
  }
}
BENCHMARK(BM_NdSolve)->Arg(1000)->Arg(3000);

void BM_LinearInMeansGenerate(benchmark::State& state) {
  const BenchFixture fx(state.range(0));
  const OutcomeGenerator gen(LinearInMeans{-1.0, 0.1, 1.0, 1.0, 1.0},
                             fx.graph);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen.generate(fx.d, fx.x, fx.eps).sum());
  }
}
BENCHMARK(BM_LinearInMeansGenerate)->Arg(1000)->Arg(3000);

void BM_Phi0FitPerRep(benchmark::State& state) {
  const BenchFixture fx(state.range(0));
  const auto spec = AuxiliarySpec::linear_in_means_set();
  Eigen::MatrixXd xmat(fx.x.size(), 1);
  xmat.col(0) = fx.x;
  const std::size_t reps = 2000;
  for (auto _ : state) {
    const auto norm = phi0_fit(spec, fx.exposure, fx.design, *fx.graph, xmat,
                               {1, 0}, *fx.pi, reps, 5, 1);
    benchmark::DoNotOptimize(norm.gamma.sum());
  }
  state.SetItemsProcessed(state.iterations() * reps);
}
BENCHMARK(BM_Phi0FitPerRep)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
