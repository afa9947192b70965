#include "netexp/hac.hpp"

#include <cmath>
#include <string>

#include "netexp/error.hpp"
#include "netexp/stats.hpp"

namespace netexp {

InfluenceTerms influence_terms(const Dataset& ds, Star star) {
  const std::size_t n = ds.size();
  const Eigen::Index q = ds.z().cols();
  const int t = ds.contrast().t;
  const int tp = ds.contrast().t_prime;

  InfluenceTerms terms;
  terms.star = star;
  terms.v.resize(n);
  terms.vz.resize(n, q);

  const double mu_t = mean_star(ds.y(), ds, star, t);
  const double mu_tp = mean_star(ds.y(), ds, star, tp);
  Eigen::RowVectorXd muz_t = Eigen::RowVectorXd::Zero(q);
  Eigen::RowVectorXd muz_tp = Eigen::RowVectorXd::Zero(q);
  if (q > 0) {
    muz_t = mean_star(ds.z(), ds, star, t);
    muz_tp = mean_star(ds.z(), ds, star, tp);
  }

  if (star == Star::ht) {
    const double tau = mu_t - mu_tp;
    const Eigen::RowVectorXd tau_z = muz_t - muz_tp;
    for (std::uint32_t i = 0; i < n; ++i) {
      double a = 0.0;
      Eigen::RowVectorXd az = Eigen::RowVectorXd::Zero(q);
      if (ds.in_t(i)) {
        a = ds.y()[i] / ds.pi_t(i);
        if (q > 0) az = ds.z().row(i) / ds.pi_t(i);
      } else if (ds.in_tp(i)) {
        a = -ds.y()[i] / ds.pi_tp(i);
        if (q > 0) az = -ds.z().row(i) / ds.pi_tp(i);
      }
      terms.v[i] = a - tau;
      if (q > 0) terms.vz.row(i) = az - tau_z;
    }
  } else {
    for (std::uint32_t i = 0; i < n; ++i) {
      if (ds.in_t(i)) {
        terms.v[i] = (ds.y()[i] - mu_t) / ds.pi_t(i);
        if (q > 0) terms.vz.row(i) = (ds.z().row(i) - muz_t) / ds.pi_t(i);
      } else if (ds.in_tp(i)) {
        terms.v[i] = -(ds.y()[i] - mu_tp) / ds.pi_tp(i);
        if (q > 0) terms.vz.row(i) = -(ds.z().row(i) - muz_tp) / ds.pi_tp(i);
      } else {
        terms.v[i] = 0.0;
        if (q > 0) terms.vz.row(i).setZero();
      }
    }
  }
  return terms;
}

namespace {

HacVariance double_sum(const Eigen::VectorXd& r,
                       const BandwidthNeighborhoods& bw) {
  if (static_cast<std::size_t>(r.size()) != bw.size()) {
    throw_validation("hac_sigma2: influence length does not match bandwidth "
                     "neighborhoods");
  }
  KahanSum acc;
  for (std::uint32_t i = 0; i < bw.size(); ++i) {
    double s = 0.0;
    for (std::uint32_t j : bw.of(i)) s += r[j];
    acc.add(r[i] * s);
  }
  const double value = acc.value() / static_cast<double>(r.size());
  return {value, value < 0.0};
}

}  // namespace

HacVariance hac_sigma2(const InfluenceTerms& terms, const Eigen::VectorXd& beta,
                       const BandwidthNeighborhoods& bw) {
  if (beta.size() != terms.vz.cols()) {
    throw_validation("hac_sigma2: beta dimension mismatch");
  }
  const Eigen::VectorXd r =
      beta.size() > 0 ? (terms.v - terms.vz * beta).eval() : terms.v;
  return double_sum(r, bw);
}

HacVariance hac_sigma2(const InfluenceTerms& terms,
                       const BandwidthNeighborhoods& bw) {
  return double_sum(terms.v, bw);
}

HacVariance hac_sigma2_per_value(const Dataset& ds, Star star,
                                 const Eigen::MatrixXd& beta_per_value,
                                 const BandwidthNeighborhoods& bw) {
  const auto& values = ds.pi().values();
  if (beta_per_value.rows() != ds.z().cols() ||
      static_cast<std::size_t>(beta_per_value.cols()) != values.size()) {
    throw_validation("hac_sigma2_per_value: beta must be q x |value set|");
  }
  const Eigen::MatrixXd zi = interact_with_exposure(ds.z(), ds.t(), values);
  const InfluenceTerms terms = influence_terms(ds.with_z(zi), star);
  const Eigen::Map<const Eigen::VectorXd> flat(beta_per_value.data(),
                                               beta_per_value.size());
  return hac_sigma2(terms, Eigen::VectorXd(flat), bw);
}

NdSystem build_nd_system(const InfluenceTerms& terms,
                         const BandwidthNeighborhoods& bw) {
  const std::size_t n = terms.v.size();
  const Eigen::Index q = terms.vz.cols();
  if (n != bw.size()) {
    throw_validation("build_nd_system: size mismatch");
  }
  NdSystem sys;
  sys.h = Eigen::MatrixXd::Zero(q, q);
  sys.l = Eigen::VectorXd::Zero(q);
  KahanSum c_acc;
  Eigen::RowVectorXd sz(q);
  for (std::uint32_t i = 0; i < n; ++i) {
    double sv = 0.0;
    sz.setZero();
    for (std::uint32_t j : bw.of(i)) {
      sv += terms.v[j];
      sz += terms.vz.row(j);
    }
    c_acc.add(terms.v[i] * sv);
    sys.l.noalias() += terms.vz.row(i).transpose() * sv;
    sys.h.noalias() += terms.vz.row(i).transpose() * sz;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  sys.c = c_acc.value() * inv_n;
  sys.l *= inv_n;
  sys.h *= inv_n;
  sys.h = 0.5 * (sys.h + sys.h.transpose()).eval();
  return sys;
}

AdjustedEstimate nd_solve(const Dataset& ds, Star star,
                          const BandwidthNeighborhoods& bw, NdMode mode,
                          double ci_level) {
  if (ds.z().cols() == 0) {
    throw_validation("nd_solve: no regressor columns supplied");
  }
  const auto& values = ds.pi().values();
  const bool interacted = (mode == NdMode::per_exposure);
  const Eigen::MatrixXd z_used =
      interacted ? interact_with_exposure(ds.z(), ds.t(), values) : ds.z();
  const Dataset working = interacted ? ds.with_z(z_used) : ds;

  const InfluenceTerms terms = influence_terms(working, star);
  const NdSystem sys = build_nd_system(terms, bw);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.h);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lo = lambda.minCoeff();
  const double hi = lambda.cwiseAbs().maxCoeff();
  if (!(lo > 1e-10 * std::max(hi, 1e-300))) {
    // Identify the direction that kills identification.
    Eigen::Index worst = 0;
    eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&worst);
    throw_numerical(
        "nd_solve: variance Hessian is singular or indefinite (min eigenvalue " +
        std::to_string(lo) + ", max " + std::to_string(hi) +
        "); null direction dominated by regressor column " +
        std::to_string(worst));
  }
  const Eigen::VectorXd beta_flat =
      eig.eigenvectors() *
      (eig.eigenvalues().cwiseInverse().asDiagonal() *
       (eig.eigenvectors().transpose() * sys.l));

  AdjustedEstimate est;
  est.method = interacted ? "ND-L" : "ND-F";
  est.per_value_beta = interacted;
  if (interacted) {
    est.beta = Eigen::Map<const Eigen::MatrixXd>(
        beta_flat.data(), ds.z().cols(), values.size());
    est.tau_hat = tau_adjusted(ds, star, est.beta);
  } else {
    est.beta = beta_flat;
    est.tau_hat = tau_adjusted(ds, star, beta_flat);
  }

  const HacVariance sigma2 = hac_sigma2(terms, beta_flat, bw);
  est.sigma2_hat = sigma2.value;
  est.sigma2_negative = sigma2.negative;

  // Consistency of the two evaluation routes and the minimizer guarantee.
  const double quad =
      sys.c - 2.0 * beta_flat.dot(sys.l) + beta_flat.dot(sys.h * beta_flat);
  const double scale = 1.0 + std::abs(sys.c);
  if (std::abs(quad - sigma2.value) > 1e-8 * scale) {
    throw_numerical("nd_solve: quadratic and double-sum variance routes "
                    "disagree beyond tolerance");
  }
  if (sigma2.value > sys.c + 1e-8 * scale) {
    throw_numerical("nd_solve: minimizer failed to dominate the unadjusted "
                    "variance");
  }

  if (!sigma2.negative) {
    est.ci = wald_ci(est.tau_hat, est.sigma2_hat, ds.size(), ci_level);
  }
  est.n = ds.size();
  est.b_n = bw.bandwidth();
  est.contrast = ds.contrast();
  return est;
}

WaldInterval wald_ci(double tau_hat, double sigma2_hat, std::size_t n,
                     double level) {
  if (sigma2_hat < 0.0) {
    throw_numerical("wald_ci: negative variance estimate");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw_validation("wald_ci: level must lie in (0,1)");
  }
  const double z = normal_quantile(0.5 + level / 2.0);
  const double half = z * std::sqrt(sigma2_hat / static_cast<double>(n));
  return {level, tau_hat - half, tau_hat + half};
}

double bias_term_r(const BandwidthNeighborhoods& bw,
                   std::span<const double> tau_i, double tau) {
  if (tau_i.size() != bw.size()) {
    throw_validation("bias_term_r: length mismatch");
  }
  KahanSum acc;
  for (std::uint32_t i = 0; i < bw.size(); ++i) {
    double s = 0.0;
    for (std::uint32_t j : bw.of(i)) s += tau_i[j] - tau;
    acc.add((tau_i[i] - tau) * s);
  }
  return acc.value() / static_cast<double>(tau_i.size());
}

double bias_term_r(const BandwidthNeighborhoods& bw,
                   std::span<const double> tau_i, double tau,
                   const Eigen::MatrixXd& tau_z, const Eigen::VectorXd& beta) {
  if (tau_i.size() != bw.size() ||
      static_cast<std::size_t>(tau_z.rows()) != bw.size() ||
      tau_z.cols() != beta.size()) {
    throw_validation("bias_term_r: dimension mismatch");
  }
  const Eigen::RowVectorXd center = tau_z.colwise().mean();
  Eigen::VectorXd e(tau_i.size());
  for (std::uint32_t i = 0; i < bw.size(); ++i) {
    e[i] = tau_i[i] - tau - (tau_z.row(i) - center).dot(beta);
  }
  KahanSum acc;
  for (std::uint32_t i = 0; i < bw.size(); ++i) {
    double s = 0.0;
    for (std::uint32_t j : bw.of(i)) s += e[j];
    acc.add(e[i] * s);
  }
  return acc.value() / static_cast<double>(tau_i.size());
}

}  // namespace netexp
