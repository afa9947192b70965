#pragma once

#include <Eigen/Dense>

#include "netexp/dataset.hpp"
#include "netexp/graph.hpp"

namespace netexp {

enum class Star { ht, haj };

// w_HT,i = 1(T_i=t)/pi_i(t) - 1(T_i=t')/pi_i(t'); zero off the contrast.
Eigen::VectorXd ht_weights(const Dataset& ds);

// Ratio-normalized arm weights; each arm's weights average to 1 over the
// full sample. Errors on an empty arm.
Eigen::VectorXd haj_weights(const Dataset& ds);

double tau_unadjusted(const Dataset& ds, Star star);

// tau_star on the residualized outcome Y_i - Z_i' beta(T_i). The pooled
// overload uses one beta for every exposure value; the per-value overload
// takes one column per value in the propensity table's value order.
double tau_adjusted(const Dataset& ds, Star star, const Eigen::VectorXd& beta);
double tau_adjusted(const Dataset& ds, Star star,
                    const Eigen::MatrixXd& beta_per_value);

// HT or Hajek weighted mean of an arbitrary per-unit column set over the
// arm with exposure value t (columnwise).
Eigen::RowVectorXd mean_star(const Eigen::MatrixXd& values, const Dataset& ds,
                             Star star, int t);
double mean_star(const Eigen::VectorXd& values, const Dataset& ds, Star star,
                 int t);

// Z columns interacted with the exposure-value indicators: for value index
// k, block k holds Z .* 1(T = values[k]).
Eigen::MatrixXd interact_with_exposure(const Eigen::MatrixXd& z,
                                       const std::vector<int>& t,
                                       const std::vector<int>& values);

// Weighted least squares with one intercept per exposure value and a
// shared slope on Z; weights 1/pi_i(T_i). Point estimate is the contrast
// of intercepts, which coincides with tau_haj at the fitted slope.
AdjustedEstimate fisher_wls(const Dataset& ds,
                            const BandwidthNeighborhoods& bw,
                            double ci_level = 0.95);

// Per-exposure-value WLS (intercept + slopes within each arm).
AdjustedEstimate lin_wls(const Dataset& ds, const BandwidthNeighborhoods& bw,
                         double ci_level = 0.95);

}  // namespace netexp
