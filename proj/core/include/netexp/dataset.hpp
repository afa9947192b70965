#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "netexp/design.hpp"

namespace netexp {

// One realized experiment for a fixed contrast: outcomes, assignment,
// exposure codes, propensities, and whatever regressor matrix the caller
// adjusts with (possibly zero columns). Overlap on the contrast arms is
// enforced at construction.
class Dataset {
 public:
  Dataset(Eigen::VectorXd y, std::vector<std::uint8_t> d, std::vector<int> t,
          std::shared_ptr<const PropensityTable> pi, Eigen::MatrixXd z,
          Contrast contrast);

  std::size_t size() const { return y_.size(); }
  const Eigen::VectorXd& y() const { return y_; }
  const std::vector<std::uint8_t>& d() const { return d_; }
  const std::vector<int>& t() const { return t_; }
  const PropensityTable& pi() const { return *pi_; }
  const std::shared_ptr<const PropensityTable>& pi_ptr() const { return pi_; }
  const Eigen::MatrixXd& z() const { return z_; }
  Contrast contrast() const { return contrast_; }

  // Cached per-unit propensities for the two contrast arms.
  double pi_t(std::uint32_t i) const { return pi_t_[i]; }
  double pi_tp(std::uint32_t i) const { return pi_tp_[i]; }
  bool in_t(std::uint32_t i) const { return t_[i] == contrast_.t; }
  bool in_tp(std::uint32_t i) const { return t_[i] == contrast_.t_prime; }
  std::size_t arm_count_t() const { return arm_count_t_; }
  std::size_t arm_count_tp() const { return arm_count_tp_; }

  Dataset with_z(Eigen::MatrixXd z) const;
  Dataset with_y(Eigen::VectorXd y) const;

 private:
  Eigen::VectorXd y_;
  std::vector<std::uint8_t> d_;
  std::vector<int> t_;
  std::shared_ptr<const PropensityTable> pi_;
  Eigen::MatrixXd z_;
  Contrast contrast_;
  Eigen::VectorXd pi_t_, pi_tp_;
  std::size_t arm_count_t_ = 0, arm_count_tp_ = 0;
};

struct WaldInterval {
  double level = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct AdjustedEstimate {
  std::string method;
  double tau_hat = 0.0;
  // One column (pooled) or one column per exposure value in the
  // propensity table's value order.
  Eigen::MatrixXd beta;
  bool per_value_beta = false;
  // HAC estimate of Var(sqrt(n) * (tau_hat - tau)); may be negative with
  // the uniform kernel, in which case `sigma2_negative` is set and `ci`
  // is absent.
  double sigma2_hat = 0.0;
  bool sigma2_negative = false;
  std::optional<WaldInterval> ci;
  std::size_t n = 0;
  std::int32_t b_n = 0;
  Contrast contrast{0, 0};
};

}  // namespace netexp
