#pragma once

#include <Eigen/Dense>
#include <span>

#include "netexp/dataset.hpp"
#include "netexp/estimators.hpp"
#include "netexp/graph.hpp"

namespace netexp {

// Empirical influence terms: v holds V-hat_{*,i} for the outcome, vz the
// per-regressor analogues (n x q). Linear in the adjustment:
// V-hat_i(beta) = v_i - vz_i' beta, exactly.
struct InfluenceTerms {
  Star star = Star::ht;
  Eigen::VectorXd v;
  Eigen::MatrixXd vz;
};

InfluenceTerms influence_terms(const Dataset& ds, Star star);

struct HacVariance {
  double value = 0.0;
  // The uniform kernel is not positive semidefinite; negative estimates
  // are reported, never clamped.
  bool negative = false;
};

// sigma2-hat(beta) = (1/n) sum_ij B_ij Vhat_i(beta) Vhat_j(beta), computed
// as a direct double sum over the bandwidth pairs.
HacVariance hac_sigma2(const InfluenceTerms& terms,
                       const Eigen::VectorXd& beta,
                       const BandwidthNeighborhoods& bw);
HacVariance hac_sigma2(const InfluenceTerms& terms,
                       const BandwidthNeighborhoods& bw);
// Per-exposure-value coefficients, evaluated through exposure-interacted
// columns (exactly equivalent to residualizing with beta(T_i) rowwise).
HacVariance hac_sigma2_per_value(const Dataset& ds, Star star,
                                 const Eigen::MatrixXd& beta_per_value,
                                 const BandwidthNeighborhoods& bw);

// Quadratic representation sigma2(beta) = c - 2 beta'l + beta'h beta.
struct NdSystem {
  Eigen::MatrixXd h;
  Eigen::VectorXd l;
  double c = 0.0;
};

NdSystem build_nd_system(const InfluenceTerms& terms,
                         const BandwidthNeighborhoods& bw);

enum class NdMode { pooled, per_exposure };

// Variance-minimizing regression adjustment: beta-hat = h^{-1} l via a
// symmetric solve, tau at the minimizer, sigma2 at the minimizer, Wald CI.
// Errors when h is not safely positive definite (relative eigenvalue
// threshold 1e-10), naming the offending direction.
AdjustedEstimate nd_solve(const Dataset& ds, Star star,
                          const BandwidthNeighborhoods& bw, NdMode mode,
                          double ci_level = 0.95);

// tau_hat +/- z_{1-alpha/2} sqrt(sigma2/n). Errors on negative sigma2.
WaldInterval wald_ci(double tau_hat, double sigma2_hat, std::size_t n,
                     double level);

// Oracle inflation term R: (1/n) sum_ij B_ij e_i e_j with
// e_i = tau_i - tau (plain form) or
// e_i = tau_i - tau - beta'(tz_i - mean(tz)) (adjusted form).
double bias_term_r(const BandwidthNeighborhoods& bw,
                   std::span<const double> tau_i, double tau);
double bias_term_r(const BandwidthNeighborhoods& bw,
                   std::span<const double> tau_i, double tau,
                   const Eigen::MatrixXd& tau_z, const Eigen::VectorXd& beta);

}  // namespace netexp
