#include "netexp/estimators.hpp"

#include <cmath>
#include <string>

#include "netexp/error.hpp"
#include "netexp/hac.hpp"

namespace netexp {

Eigen::VectorXd ht_weights(const Dataset& ds) {
  const std::size_t n = ds.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (ds.in_t(i)) {
      w[i] = 1.0 / ds.pi_t(i);
    } else if (ds.in_tp(i)) {
      w[i] = -1.0 / ds.pi_tp(i);
    }
  }
  return w;
}

Eigen::VectorXd haj_weights(const Dataset& ds) {
  const std::size_t n = ds.size();
  if (ds.arm_count_t() == 0 || ds.arm_count_tp() == 0) {
    throw_numerical("haj_weights: an arm of the contrast is empty");
  }
  double denom_t = 0.0, denom_tp = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (ds.in_t(i)) denom_t += 1.0 / ds.pi_t(i);
    if (ds.in_tp(i)) denom_tp += 1.0 / ds.pi_tp(i);
  }
  denom_t /= static_cast<double>(n);
  denom_tp /= static_cast<double>(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (ds.in_t(i)) {
      w[i] = (1.0 / ds.pi_t(i)) / denom_t;
    } else if (ds.in_tp(i)) {
      w[i] = -(1.0 / ds.pi_tp(i)) / denom_tp;
    }
  }
  return w;
}

namespace {

Eigen::VectorXd star_weights(const Dataset& ds, Star star) {
  return star == Star::ht ? ht_weights(ds) : haj_weights(ds);
}

}  // namespace

double tau_unadjusted(const Dataset& ds, Star star) {
  const Eigen::VectorXd w = star_weights(ds, star);
  return w.dot(ds.y()) / static_cast<double>(ds.size());
}

double tau_adjusted(const Dataset& ds, Star star, const Eigen::VectorXd& beta) {
  if (beta.size() != ds.z().cols()) {
    throw_validation("tau_adjusted: beta dimension does not match Z columns");
  }
  const Eigen::VectorXd w = star_weights(ds, star);
  const Eigen::VectorXd resid =
      ds.z().cols() > 0 ? (ds.y() - ds.z() * beta).eval() : ds.y();
  return w.dot(resid) / static_cast<double>(ds.size());
}

double tau_adjusted(const Dataset& ds, Star star,
                    const Eigen::MatrixXd& beta_per_value) {
  const auto& values = ds.pi().values();
  if (beta_per_value.rows() != ds.z().cols() ||
      static_cast<std::size_t>(beta_per_value.cols()) != values.size()) {
    throw_validation(
        "tau_adjusted: per-value beta must be (Z columns) x (value count)");
  }
  const Eigen::VectorXd w = star_weights(ds, star);
  Eigen::VectorXd resid = ds.y();
  for (std::uint32_t i = 0; i < ds.size(); ++i) {
    const int k = ds.pi().value_index(ds.t()[i]);
    resid[i] -= ds.z().row(i).dot(beta_per_value.col(k));
  }
  return w.dot(resid) / static_cast<double>(ds.size());
}

Eigen::RowVectorXd mean_star(const Eigen::MatrixXd& values, const Dataset& ds,
                             Star star, int t) {
  const std::size_t n = ds.size();
  const int k = ds.pi().value_index(t);
  Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(values.cols());
  double denom = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (ds.t()[i] != t) continue;
    const double ipw = 1.0 / ds.pi().matrix()(i, k);
    num += ipw * values.row(i);
    denom += ipw;
  }
  if (star == Star::ht) {
    return num / static_cast<double>(n);
  }
  if (denom == 0.0) {
    throw_numerical("mean_star: arm t=" + std::to_string(t) + " is empty");
  }
  return num / denom;
}

double mean_star(const Eigen::VectorXd& values, const Dataset& ds, Star star,
                 int t) {
  return mean_star(Eigen::MatrixXd(values), ds, star, t)(0);
}

Eigen::MatrixXd interact_with_exposure(const Eigen::MatrixXd& z,
                                       const std::vector<int>& t,
                                       const std::vector<int>& values) {
  const auto n = z.rows();
  const auto q = z.cols();
  if (static_cast<std::size_t>(n) != t.size()) {
    throw_validation("interact_with_exposure: length mismatch");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, q * values.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (t[i] == values[k]) {
        out.block(i, q * k, 1, q) = z.row(i);
        break;
      }
    }
  }
  return out;
}

namespace {

struct WlsFit {
  Eigen::VectorXd coef;
};

// Weighted least squares via column-pivoted QR; throws a numerical error
// naming the dependent columns on rank deficiency.
WlsFit solve_wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& sqrt_w,
                 const std::vector<std::string>& col_names) {
  Eigen::MatrixXd xw = sqrt_w.asDiagonal() * x;
  Eigen::VectorXd yw = sqrt_w.asDiagonal() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    std::string msg = "weighted least squares design matrix is rank deficient;";
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < x.cols(); ++k) {
      msg += " column '" + col_names[perm[k]] + "'";
    }
    throw_numerical(msg);
  }
  return {qr.solve(yw)};
}

std::vector<std::string> z_names(Eigen::Index q) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < q; ++j) {
    names.push_back("z[" + std::to_string(j) + "]");
  }
  return names;
}

void attach_hac(AdjustedEstimate& est, const Dataset& ds, Star star,
                const BandwidthNeighborhoods& bw, double ci_level) {
  const HacVariance v =
      est.per_value_beta
          ? hac_sigma2_per_value(ds, star, est.beta, bw)
          : hac_sigma2(influence_terms(ds, star),
                       Eigen::VectorXd(est.beta.col(0)), bw);
  est.sigma2_hat = v.value;
  est.sigma2_negative = v.negative;
  if (!v.negative) {
    est.ci = wald_ci(est.tau_hat, est.sigma2_hat, ds.size(), ci_level);
  }
  est.n = ds.size();
  est.b_n = bw.bandwidth();
  est.contrast = ds.contrast();
}

}  // namespace

AdjustedEstimate fisher_wls(const Dataset& ds,
                            const BandwidthNeighborhoods& bw,
                            double ci_level) {
  const std::size_t n = ds.size();
  const auto& values = ds.pi().values();
  const Eigen::Index q = ds.z().cols();
  const Eigen::Index k = static_cast<Eigen::Index>(values.size());

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, k + q);
  Eigen::VectorXd sqrt_w(n);
  std::vector<std::string> names;
  for (Eigen::Index v = 0; v < k; ++v) {
    names.push_back("intercept[t=" + std::to_string(values[v]) + "]");
  }
  for (const auto& nm : z_names(q)) names.push_back(nm);
  for (std::uint32_t i = 0; i < n; ++i) {
    const int vi = ds.pi().value_index(ds.t()[i]);
    x(i, vi) = 1.0;
    if (q > 0) x.block(i, k, 1, q) = ds.z().row(i);
    sqrt_w[i] = std::sqrt(1.0 / ds.pi().matrix()(i, vi));
  }
  const WlsFit fit = solve_wls(x, ds.y(), sqrt_w, names);

  AdjustedEstimate est;
  est.method = "F";
  est.beta = fit.coef.tail(q);
  est.per_value_beta = false;
  const int it = ds.pi().value_index(ds.contrast().t);
  const int itp = ds.pi().value_index(ds.contrast().t_prime);
  est.tau_hat = fit.coef[it] - fit.coef[itp];

  // The intercept contrast has an equivalent Hajek representation at the
  // fitted slope; both are computed and must agree.
  const double tau_rep = tau_adjusted(ds, Star::haj, Eigen::VectorXd(est.beta));
  if (std::abs(tau_rep - est.tau_hat) >
      1e-10 * (1.0 + std::abs(est.tau_hat))) {
    throw_numerical("fisher_wls: intercept contrast and Hajek representation "
                    "disagree beyond tolerance");
  }
  attach_hac(est, ds, Star::haj, bw, ci_level);
  return est;
}

AdjustedEstimate lin_wls(const Dataset& ds, const BandwidthNeighborhoods& bw,
                         double ci_level) {
  const std::size_t n = ds.size();
  const auto& values = ds.pi().values();
  const Eigen::Index q = ds.z().cols();

  AdjustedEstimate est;
  est.method = "L";
  est.per_value_beta = true;
  est.beta = Eigen::MatrixXd::Zero(q, values.size());
  Eigen::VectorXd alpha(values.size());

  for (std::size_t k = 0; k < values.size(); ++k) {
    std::vector<std::uint32_t> arm;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (ds.t()[i] == values[k]) arm.push_back(i);
    }
    if (arm.empty()) {
      throw_numerical("lin_wls: arm t=" + std::to_string(values[k]) +
                      " is empty");
    }
    Eigen::MatrixXd x(arm.size(), 1 + q);
    Eigen::VectorXd y(arm.size());
    Eigen::VectorXd sqrt_w(arm.size());
    for (std::size_t r = 0; r < arm.size(); ++r) {
      const std::uint32_t i = arm[r];
      x(r, 0) = 1.0;
      if (q > 0) x.block(r, 1, 1, q) = ds.z().row(i);
      y[r] = ds.y()[i];
      sqrt_w[r] =
          std::sqrt(1.0 / ds.pi().matrix()(i, static_cast<Eigen::Index>(k)));
    }
    std::vector<std::string> names{"intercept[t=" +
                                   std::to_string(values[k]) + "]"};
    for (auto& nm : z_names(q)) {
      names.push_back(nm + "[t=" + std::to_string(values[k]) + "]");
    }
    const WlsFit fit = solve_wls(x, y, sqrt_w, names);
    alpha[k] = fit.coef[0];
    est.beta.col(k) = fit.coef.tail(q);
  }

  const int it = ds.pi().value_index(ds.contrast().t);
  const int itp = ds.pi().value_index(ds.contrast().t_prime);
  est.tau_hat = alpha[it] - alpha[itp];

  const double tau_rep = tau_adjusted(ds, Star::haj, est.beta);
  if (std::abs(tau_rep - est.tau_hat) >
      1e-10 * (1.0 + std::abs(est.tau_hat))) {
    throw_numerical("lin_wls: intercept contrast and Hajek representation "
                    "disagree beyond tolerance");
  }
  attach_hac(est, ds, Star::haj, bw, ci_level);
  return est;
}

}  // namespace netexp
