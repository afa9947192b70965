#include "netexp/dgp.hpp"

#include <cmath>
#include <string>

#include "netexp/error.hpp"
#include "netexp/parallel.hpp"
#include "netexp/stats.hpp"

namespace netexp {

namespace {

constexpr std::size_t kDenseSolveLimit = 4000;

// (O v)_i without materializing O.
Eigen::VectorXd neighbor_mean(const Graph& g, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(g.size());
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    double s = 0.0;
    for (std::uint32_t j : nb) s += v[j];
    out[i] = s / static_cast<double>(nb.size());
  }
  return out;
}

void require_no_isolated(const Graph& g, const char* what) {
  if (g.size() == 0 || g.min_degree() == 0) {
    throw_validation(std::string(what) +
                     ": graph has isolated units; row normalization "
                     "undefined");
  }
}

Eigen::VectorXd assignment_to_vector(std::span<const std::uint8_t> d) {
  Eigen::VectorXd v(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) v[i] = d[i];
  return v;
}

}  // namespace

OutcomeGenerator::OutcomeGenerator(OutcomeModel model,
                                   std::shared_ptr<const Graph> g)
    : model_(std::move(model)), graph_(std::move(g)) {
  if (!graph_) throw_validation("outcome generator: graph is null");
  const Graph& g_ref = *graph_;
  if (const auto* lim = std::get_if<LinearInMeans>(&model_)) {
    if (!(std::abs(lim->a1) < 1.0)) {
      throw_validation("linear-in-means: |a1| must be < 1");
    }
    require_no_isolated(g_ref, "linear-in-means");
    if (g_ref.size() < kDenseSolveLimit) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Identity(g_ref.size(), g_ref.size());
      for (std::uint32_t i = 0; i < g_ref.size(); ++i) {
        const auto nb = g_ref.neighbors(i);
        const double w = -lim->a1 / static_cast<double>(nb.size());
        for (std::uint32_t j : nb) m(i, j) = w;
      }
      lu_ = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(m);
    }
  } else if (const auto* con = std::get_if<NonlinearContagion>(&model_)) {
    if (con->a1 < 0.0) {
      throw_validation(
          "nonlinear contagion: a1 must be >= 0 (monotone update)");
    }
    require_no_isolated(g_ref, "nonlinear contagion");
  } else if (const auto* sut = std::get_if<SutvaCounterexample>(&model_)) {
    if (static_cast<std::size_t>(sut->pi1.size()) != g_ref.size()) {
      throw_validation("sutva counterexample: pi1 length mismatch");
    }
    for (Eigen::Index i = 0; i < sut->pi1.size(); ++i) {
      if (!(sut->pi1[i] > 0.0 && sut->pi1[i] < 1.0)) {
        throw_validation("sutva counterexample: pi1 outside (0,1)");
      }
    }
  }
}

Eigen::VectorXd OutcomeGenerator::generate(std::span<const std::uint8_t> d,
                                           const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& eps) const {
  const std::size_t n = graph_->size();
  if (d.size() != n || static_cast<std::size_t>(x.size()) != n ||
      static_cast<std::size_t>(eps.size()) != n) {
    throw_validation("generate_outcomes: input lengths do not match graph");
  }

  if (const auto* lim = std::get_if<LinearInMeans>(&model_)) {
    const Eigen::VectorXd dv = assignment_to_vector(d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, lim->a0);
    rhs += lim->a2 * neighbor_mean(*graph_, dv);
    rhs += lim->a3 * dv;
    rhs += lim->a4 * x;
    rhs += eps;

    Eigen::VectorXd y;
    if (lu_) {
      y = lu_->solve(rhs);
    } else {
      // Neumann series: (I - a1 O)^{-1} r = sum_k a1^k O^k r; geometric
      // decay since |a1| < 1 and O is row-stochastic.
      y = rhs;
      Eigen::VectorXd term = rhs;
      for (std::size_t k = 0; k < 10000; ++k) {
        term = lim->a1 * neighbor_mean(*graph_, term);
        y += term;
        if (term.cwiseAbs().maxCoeff() <
            1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff())) {
          break;
        }
      }
    }
    const Eigen::VectorXd resid =
        y - lim->a1 * neighbor_mean(*graph_, y) - rhs;
    if (resid.cwiseAbs().maxCoeff() >= 1e-8) {
      throw_numerical("linear-in-means solve residual " +
                      std::to_string(resid.cwiseAbs().maxCoeff()) +
                      " exceeds 1e-8");
    }
    return y;
  }

  if (const auto* con = std::get_if<NonlinearContagion>(&model_)) {
    const Eigen::VectorXd dv = assignment_to_vector(d);
    Eigen::VectorXd base = Eigen::VectorXd::Constant(n, con->a0);
    base += con->a2 * neighbor_mean(*graph_, dv);
    base += con->a3 * dv;
    base += con->a4 * x;
    base += eps;

    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    const std::size_t max_iters = con->max_iters == 0 ? n : con->max_iters;
    for (std::size_t it = 0; it < max_iters + 1; ++it) {
      const Eigen::VectorXd oy = neighbor_mean(*graph_, y);
      bool changed = false;
      for (std::uint32_t i = 0; i < n; ++i) {
        const double next = (base[i] + con->a1 * oy[i] > 0.0) ? 1.0 : 0.0;
        if (next < y[i]) {
          throw_numerical(
              "nonlinear contagion: update decreased a coordinate; "
              "monotonicity violated");
        }
        if (next != y[i]) {
          y[i] = next;
          changed = true;
        }
      }
      if (!changed) return y;
    }
    throw_numerical("nonlinear contagion: no fixed point within " +
                    std::to_string(max_iters) + " iterations");
  }

  const auto& sut = std::get<SutvaCounterexample>(model_);
  Eigen::VectorXd y(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double ratio = sut.pi1[i] / (1.0 - sut.pi1[i]);
    y[i] = x[i] * (d[i] ? ratio : -1.0) + eps[i];
  }
  return y;
}

Eigen::VectorXd generate_outcomes(const OutcomeModel& model, const Graph& g,
                                  std::span<const std::uint8_t> d,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& eps) {
  // non-owning alias; the temporary generator never outlives g
  std::shared_ptr<const Graph> alias(std::shared_ptr<const Graph>(), &g);
  return OutcomeGenerator(model, alias).generate(d, x, eps);
}

Eigen::VectorXd generate_noise(const NoiseSpec& spec, std::size_t n,
                               const std::vector<std::array<double, 2>>* coords,
                               Rng& rng) {
  Eigen::VectorXd eps(n);
  if (spec.kind == NoiseSpec::Kind::coordinate_shifted) {
    if (coords == nullptr || coords->size() != n) {
      throw_validation(
          "coordinate-shifted noise needs unit coordinates of matching length");
    }
    for (std::size_t i = 0; i < n; ++i) {
      eps[i] = rng.normal() + (*coords)[i][0] - 0.5;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) eps[i] = spec.sd * rng.normal();
  }
  return eps;
}

GroundTruth ground_truth_tau(const OutcomeGenerator& gen, const Graph& g,
                             const ExposureSpec& exposure, const Design& design,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& eps, Contrast contrast,
                             const PropensityTable& pi, std::size_t reps,
                             std::uint64_t seed, int threads) {
  if (reps < 2) throw_validation("ground_truth_tau: reps must be >= 2");
  const std::size_t n = g.size();
  const int kt = pi.value_index(contrast.t);
  const int ktp = pi.value_index(contrast.t_prime);

  struct Block {
    double sum_g = 0.0, sum_g2 = 0.0;
    Eigen::VectorXd s_t, s_tp;
  };
  constexpr std::size_t kBlock = 1024;
  const std::size_t n_blocks = (reps + kBlock - 1) / kBlock;
  std::vector<Block> blocks(n_blocks);

  parallel_blocks(reps, kBlock, threads, [&](std::size_t b, std::size_t begin,
                                             std::size_t end) {
    Block& acc = blocks[b];
    acc.s_t = Eigen::VectorXd::Zero(n);
    acc.s_tp = Eigen::VectorXd::Zero(n);
    Rng rng(derive_seed(seed, "truth", b));
    for (std::size_t r = begin; r < end; ++r) {
      const auto d = sample_assignment(design, rng);
      const Eigen::VectorXd y = gen.generate(d, x, eps);
      double stat = 0.0;
      for (std::uint32_t i = 0; i < n; ++i) {
        const int t_i = exposure.eval_unit(i, d, g);
        if (t_i == contrast.t) {
          acc.s_t[i] += y[i];
          stat += y[i] / pi.matrix()(i, kt);
        } else if (t_i == contrast.t_prime) {
          acc.s_tp[i] += y[i];
          stat -= y[i] / pi.matrix()(i, ktp);
        }
      }
      stat /= static_cast<double>(n);
      acc.sum_g += stat;
      acc.sum_g2 += stat * stat;
    }
  });

  KahanSum sum_g, sum_g2;
  Eigen::VectorXd s_t = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s_tp = Eigen::VectorXd::Zero(n);
  for (const auto& acc : blocks) {
    sum_g.add(acc.sum_g);
    sum_g2.add(acc.sum_g2);
    s_t += acc.s_t;
    s_tp += acc.s_tp;
  }

  const double r = static_cast<double>(reps);
  GroundTruth out;
  out.reps = reps;
  out.tau = sum_g.value() / r;
  const double var_g =
      std::max(0.0, sum_g2.value() / r - out.tau * out.tau);
  out.mc_se = std::sqrt(var_g / r);
  out.mu_t.resize(n);
  out.mu_tp.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    out.mu_t[i] = s_t[i] / (r * pi.matrix()(i, kt));
    out.mu_tp[i] = s_tp[i] / (r * pi.matrix()(i, ktp));
  }
  return out;
}

SutvaVariances sutva_asymptotic_variances(const Eigen::MatrixXd& x,
                                          const Eigen::VectorXd& pi1,
                                          const Eigen::VectorXd& mu1,
                                          const Eigen::VectorXd& mu0) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (pi1.size() != n || mu1.size() != n || mu0.size() != n) {
    throw_validation("sutva_asymptotic_variances: length mismatch");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(pi1[i] > 0.0 && pi1[i] < 1.0)) {
      throw_validation("sutva_asymptotic_variances: pi outside (0,1)");
    }
  }

  const Eigen::MatrixXd xx = x.transpose() * x;
  Eigen::FullPivLU<Eigen::MatrixXd> xx_lu(xx);
  if (!xx_lu.isInvertible()) {
    throw_numerical("sutva_asymptotic_variances: X'X is singular");
  }
  SutvaVariances out;
  out.beta_l1 = xx_lu.solve(x.transpose() * mu1);
  out.beta_l0 = xx_lu.solve(x.transpose() * mu0);
  out.beta_f = 0.5 * (out.beta_l1 + out.beta_l0);

  const double mbar1 = mu1.mean();
  const double mbar0 = mu0.mean();
  KahanSum s_haj, s_f, s_l;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p1 = pi1[i];
    const double p0 = 1.0 - p1;
    const double core = (mu1[i] - mbar1) / p1 + (mu0[i] - mbar0) / p0;
    const double xl =
        x.row(i).dot(out.beta_l1) / p1 + x.row(i).dot(out.beta_l0) / p0;
    const double xf = x.row(i).dot(out.beta_f) / (p1 * p0);
    s_haj.add(p0 * p1 * core * core);
    s_l.add(p0 * p1 * (core - xl) * (core - xl));
    s_f.add(p0 * p1 * (core - xf) * (core - xf));
  }
  out.sigma2_haj = s_haj.value() / static_cast<double>(n);
  out.sigma2_l = s_l.value() / static_cast<double>(n);
  out.sigma2_f = s_f.value() / static_cast<double>(n);

  // Blocked normal equations for the oracle coefficients beta-tilde.
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2 * p, 2 * p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * p);
  Eigen::MatrixXd xx10 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd xx01 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd r1 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r0 = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p1 = pi1[i];
    const double p0 = 1.0 - p1;
    const Eigen::VectorXd xi = x.row(i).transpose();
    xx10 += (p0 / p1) * xi * xi.transpose();
    xx01 += (p1 / p0) * xi * xi.transpose();
    r1 += (p0 / p1) * xi * mu1[i] + xi * mu0[i];
    r0 += xi * mu1[i] + (p1 / p0) * xi * mu0[i];
  }
  big.topLeftCorner(p, p) = xx10;
  big.topRightCorner(p, p) = xx;
  big.bottomLeftCorner(p, p) = xx;
  big.bottomRightCorner(p, p) = xx01;
  rhs.head(p) = r1;
  rhs.tail(p) = r0;
  Eigen::FullPivLU<Eigen::MatrixXd> big_lu(big);
  if (big_lu.isInvertible()) {
    const Eigen::VectorXd sol = big_lu.solve(rhs);
    out.beta_tilde = std::make_pair(Eigen::VectorXd(sol.head(p)),
                                    Eigen::VectorXd(sol.tail(p)));
  }
  return out;
}

}  // namespace netexp
