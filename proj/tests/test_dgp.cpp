#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers/oracles.hpp"
#include "netexp/dgp.hpp"
#include "netexp/error.hpp"

using namespace netexp;
using namespace netexp::testing;

namespace {

std::shared_ptr<const Graph> shared(Graph g) {
  return std::make_shared<const Graph>(std::move(g));
}

}  // namespace

TEST_CASE("linear-in-means generation") {
  SUBCASE("a1 = 0 is the direct formula") {
    const auto g = shared(path_graph(4));
    const LinearInMeans model{0.3, 0.0, 1.2, 0.7, 2.0};
    const std::vector<std::uint8_t> d{1, 0, 1, 0};
    Eigen::VectorXd x(4), eps(4);
    x << 0.1, -0.2, 0.3, 0.0;
    eps << 0.01, 0.02, -0.01, 0.0;
    const OutcomeGenerator gen(model, g);
    const Eigen::VectorXd y = gen.generate(d, x, eps);
    Eigen::VectorXd dv(4);
    dv << 1, 0, 1, 0;
    const Eigen::VectorXd od{
        Eigen::Map<const Eigen::VectorXd>(
            row_normalized_apply(*g, std::vector<double>{1, 0, 1, 0}).data(),
            4)};
    const Eigen::VectorXd expect = Eigen::VectorXd::Constant(4, 0.3) +
                                   1.2 * od + 0.7 * dv + 2.0 * x + eps;
    CHECK((y - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("frozen 3x3 path solve") {
    const auto g = shared(path_graph(3));
    const LinearInMeans model{0.5, 0.4, 1.0, 2.0, 1.5};
    const std::vector<std::uint8_t> d{1, 0, 1};
    Eigen::VectorXd x(3), eps(3);
    x << 0.2, -0.1, 0.3;
    eps << 0.05, -0.02, 0.1;
    const Eigen::VectorXd y = OutcomeGenerator(model, g).generate(d, x, eps);
    CHECK(y[0] == doctest::Approx(4.045238095238095).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(2.9880952380952386).epsilon(1e-12));
    CHECK(y[2] == doctest::Approx(4.245238095238096).epsilon(1e-12));
  }
  SUBCASE("dense and Neumann paths agree") {
    Rng rng(3);
    Graph g = random_graph(60, 0.05, rng);
    const auto gp = shared(std::move(g));
    const LinearInMeans model{-1.0, 0.1, 1.0, 1.0, 1.0};
    Eigen::VectorXd x(60), eps(60);
    std::vector<std::uint8_t> d(60);
    for (int i = 0; i < 60; ++i) {
      x[i] = rng.normal();
      eps[i] = rng.normal();
      d[i] = rng.bernoulli(0.5);
    }
    const Eigen::VectorXd dense =
        OutcomeGenerator(model, gp).generate(d, x, eps);
    // Neumann reference computed here, not through the generator.
    Eigen::VectorXd dv(60);
    for (int i = 0; i < 60; ++i) dv[i] = d[i];
    std::vector<double> dvec(dv.data(), dv.data() + 60);
    Eigen::VectorXd rhs = Eigen::VectorXd::Constant(60, -1.0) + dv + x + eps;
    {
      const auto od = row_normalized_apply(*gp, dvec);
      for (int i = 0; i < 60; ++i) rhs[i] += od[i];
    }
    Eigen::VectorXd y = rhs, term = rhs;
    for (int k = 0; k < 200; ++k) {
      std::vector<double> tv(term.data(), term.data() + 60);
      const auto ot = row_normalized_apply(*gp, tv);
      for (int i = 0; i < 60; ++i) term[i] = 0.1 * ot[i];
      y += term;
    }
    CHECK((dense - y).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("constraints") {
    const auto g = shared(path_graph(3));
    CHECK_THROWS_AS(OutcomeGenerator(LinearInMeans{0, 1.0, 0, 0, 0}, g), Error);
    CHECK_THROWS_AS(
        OutcomeGenerator(LinearInMeans{0, 0.5, 0, 0, 0},
                         shared(Graph::edgeless(3))),
        Error);
  }
}

TEST_CASE("nonlinear contagion") {
  const auto g = shared(path_graph(3));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd eps = Eigen::VectorXd::Zero(3);

  SUBCASE("a1 = 0 converges immediately") {
    const NonlinearContagion model{-0.5, 0.0, 0.0, 1.0, 0.0};
    const std::vector<std::uint8_t> d{1, 0, 0};
    const Eigen::VectorXd y = OutcomeGenerator(model, g).generate(d, x, eps);
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 0.0);
  }
  SUBCASE("spread through the network and fixed point") {
    const NonlinearContagion model{-0.5, 2.0, 0.0, 1.0, 0.0};
    const std::vector<std::uint8_t> d{1, 0, 0};
    const OutcomeGenerator gen(model, g);
    const Eigen::VectorXd y = gen.generate(d, x, eps);
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 1.0);
    CHECK(y[2] == 1.0);
    // one more application of the update map leaves y unchanged
    const auto oy = row_normalized_apply(
        *g, std::vector<double>(y.data(), y.data() + 3));
    for (int i = 0; i < 3; ++i) {
      const double next =
          (-0.5 + 2.0 * oy[i] + 1.0 * d[i] > 0.0) ? 1.0 : 0.0;
      CHECK(next == y[i]);
    }
  }
  SUBCASE("binary output on random instances") {
    Rng rng(17);
    Graph rg = random_graph(40, 0.08, rng);
    const auto gp = shared(std::move(rg));
    const NonlinearContagion model{-1.0, 1.5, 1.0, 1.0, 1.0};
    Eigen::VectorXd xr(40), er(40);
    std::vector<std::uint8_t> d(40);
    for (int i = 0; i < 40; ++i) {
      xr[i] = rng.normal();
      er[i] = rng.normal();
      d[i] = rng.bernoulli(0.5);
    }
    const Eigen::VectorXd y = OutcomeGenerator(model, gp).generate(d, xr, er);
    for (int i = 0; i < 40; ++i) CHECK((y[i] == 0.0 || y[i] == 1.0));
  }
  SUBCASE("negative a1 rejected") {
    CHECK_THROWS_AS(OutcomeGenerator(NonlinearContagion{0, -0.1, 0, 0, 0}, g),
                    Error);
  }
}

TEST_CASE("noise model") {
  SUBCASE("coordinate-shifted noise uses the x coordinate") {
    std::vector<std::array<double, 2>> coords{{0.25, 0.5}, {0.75, 0.1}};
    Rng a(5), b(5);
    const Eigen::VectorXd e1 = generate_noise(
        {NoiseSpec::Kind::coordinate_shifted, 0.0}, 2, &coords, a);
    const Eigen::VectorXd e2 = generate_noise(
        {NoiseSpec::Kind::coordinate_shifted, 0.0}, 2, &coords, b);
    CHECK(e1 == e2);
    // shifting the coordinate shifts the noise deterministically
    std::vector<std::array<double, 2>> shifted{{0.35, 0.5}, {0.85, 0.1}};
    Rng c(5);
    const Eigen::VectorXd e3 = generate_noise(
        {NoiseSpec::Kind::coordinate_shifted, 0.0}, 2, &shifted, c);
    CHECK((e3 - e1 - Eigen::VectorXd::Constant(2, 0.1)).cwiseAbs().maxCoeff() <
          1e-12);
  }
  SUBCASE("coordinates required") {
    Rng rng(1);
    CHECK_THROWS_AS(
        generate_noise({NoiseSpec::Kind::coordinate_shifted, 0.0}, 2, nullptr, rng),
        Error);
  }
}

TEST_CASE("ground truth tau") {
  Rng rng(19);
  Graph g = random_graph(50, 0.06, rng);
  const auto gp = shared(std::move(g));
  const std::size_t n = gp->size();
  const Design design = Design::constant(n, 0.5);
  const auto exposure = ExposureSpec::neighbor_count_threshold();
  const auto pi = propensity_exact(exposure, design, *gp);
  Eigen::VectorXd x(n), eps(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    eps[i] = 0.3 * rng.normal();
  }

  SUBCASE("constant-in-d outcomes have zero effect") {
    const LinearInMeans model{0.5, 0.2, 0.0, 0.0, 1.0};  // no D terms
    const OutcomeGenerator gen(model, gp);
    const auto truth = ground_truth_tau(gen, *gp, exposure, design, x, eps,
                                        {1, 0}, pi, 20000, 7, 1);
    CHECK(std::abs(truth.tau) < 4.0 * truth.mc_se + 1e-12);
  }
  SUBCASE("seed stability and SE scaling") {
    const LinearInMeans model{-1.0, 0.1, 1.0, 1.0, 1.0};
    const OutcomeGenerator gen(model, gp);
    const auto a = ground_truth_tau(gen, *gp, exposure, design, x, eps, {1, 0},
                                    pi, 4000, 99, 1);
    const auto b = ground_truth_tau(gen, *gp, exposure, design, x, eps, {1, 0},
                                    pi, 4000, 99, 1);
    CHECK(a.tau == b.tau);
    CHECK(a.mc_se == b.mc_se);
    const auto big = ground_truth_tau(gen, *gp, exposure, design, x, eps,
                                      {1, 0}, pi, 16000, 99, 1);
    const double ratio = a.mc_se / big.mc_se;
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.5);
  }
  SUBCASE("per-unit expected outcomes average to the headline tau") {
    const LinearInMeans model{-1.0, 0.1, 1.0, 1.0, 1.0};
    const OutcomeGenerator gen(model, gp);
    const auto truth = ground_truth_tau(gen, *gp, exposure, design, x, eps,
                                        {1, 0}, pi, 4000, 3, 1);
    CHECK((truth.mu_t - truth.mu_tp).mean() ==
          doctest::Approx(truth.tau).epsilon(1e-10));
  }
}

TEST_CASE("sutva counterexample model") {
  const auto g = shared(Graph::edgeless(3));
  Eigen::VectorXd pi1(3);
  pi1 << 0.25, 0.5, 0.8;
  const SutvaCounterexample model{pi1};
  Eigen::VectorXd x(3), eps(3);
  x << 1.0, -2.0, 0.5;
  eps << 0.1, 0.0, -0.1;
  const OutcomeGenerator gen(model, g);
  const Eigen::VectorXd y1 =
      gen.generate(std::vector<std::uint8_t>{1, 1, 1}, x, eps);
  CHECK(y1[0] == doctest::Approx(1.0 * (0.25 / 0.75) + 0.1).epsilon(1e-12));
  const Eigen::VectorXd y0 =
      gen.generate(std::vector<std::uint8_t>{0, 0, 0}, x, eps);
  CHECK(y0[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sutva asymptotic variances") {
  SUBCASE("frozen n=4 hand case") {
    Eigen::MatrixXd x(4, 1);
    x << 1.0, -1.0, 2.0, 0.5;
    Eigen::VectorXd pi1(4), mu1(4), mu0(4);
    pi1 << 0.3, 0.5, 0.7, 0.4;
    mu1 << 2.0, 1.0, -1.0, 0.5;
    mu0 << 1.0, -0.5, 0.0, 1.0;
    const auto v = sutva_asymptotic_variances(x, pi1, mu1, mu0);
    CHECK(v.beta_l1[0] == doctest::Approx(-0.12).epsilon(1e-12));
    CHECK(v.beta_l0[0] == doctest::Approx(0.32).epsilon(1e-12));
    CHECK(v.beta_f[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(v.sigma2_haj == doctest::Approx(2.338448660714286).epsilon(1e-12));
    CHECK(v.sigma2_f == doctest::Approx(2.4256808035714292).epsilon(1e-12));
    CHECK(v.sigma2_l == doctest::Approx(3.0961046130952377).epsilon(1e-12));
    REQUIRE(v.beta_tilde.has_value());
    CHECK(v.beta_tilde->first[0] ==
          doctest::Approx(2.6466700345205028).epsilon(1e-10));
    CHECK(v.beta_tilde->second[0] ==
          doctest::Approx(-1.4667775251887407).epsilon(1e-10));
  }
  SUBCASE("perfect linear fit with centered covariates zeroes F and L") {
    Rng rng(23);
    const int n = 40;
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = rng.normal();
    x.col(0).array() -= x.col(0).mean();
    Eigen::VectorXd pi1(n);
    for (int i = 0; i < n; ++i) pi1[i] = 0.2 + 0.6 * rng.uniform();
    const Eigen::VectorXd mu = 1.7 * x.col(0);
    const auto v = sutva_asymptotic_variances(x, pi1, mu, mu);
    CHECK(v.sigma2_f < 1e-20);
    CHECK(v.sigma2_l < 1e-20);
    CHECK(v.sigma2_haj > 0.0);
  }
  SUBCASE("counterexample construction makes F and L lose to Hajek") {
    // the Appendix-C style draw: X, eps ~ N(0, 0.25), pi uniform [0.1, 0.9]
    Rng rng(29);
    const int n = 4000;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd pi1(n), mu1(n), mu0(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 0.5 * rng.normal();
      pi1[i] = 0.1 + 0.8 * rng.uniform();
      const double e = 0.5 * rng.normal();
      mu1[i] = x(i, 0) * pi1[i] / (1.0 - pi1[i]) + e;
      mu0[i] = -x(i, 0) + e;
    }
    const auto v = sutva_asymptotic_variances(x, pi1, mu1, mu0);
    CHECK(v.sigma2_f > v.sigma2_haj);
    CHECK(v.sigma2_l > v.sigma2_haj);
  }
  SUBCASE("domain checks") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 1);
    Eigen::VectorXd pi1 = Eigen::VectorXd::Constant(3, 0.5);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
    // X'X singular with an all-zero column
    CHECK_THROWS_AS(sutva_asymptotic_variances(x, pi1, mu, mu), Error);
  }
}
