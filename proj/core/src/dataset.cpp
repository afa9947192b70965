#include "netexp/dataset.hpp"

#include <string>

#include "netexp/error.hpp"

namespace netexp {

Dataset::Dataset(Eigen::VectorXd y, std::vector<std::uint8_t> d,
                 std::vector<int> t, std::shared_ptr<const PropensityTable> pi,
                 Eigen::MatrixXd z, Contrast contrast)
    : y_(std::move(y)),
      d_(std::move(d)),
      t_(std::move(t)),
      pi_(std::move(pi)),
      z_(std::move(z)),
      contrast_(contrast) {
  const std::size_t n = y_.size();
  if (!pi_) throw_validation("dataset: propensity table is null");
  if (d_.size() != n || t_.size() != n || pi_->size() != n ||
      (z_.size() > 0 && static_cast<std::size_t>(z_.rows()) != n)) {
    throw_validation("dataset: per-unit arrays have mismatched lengths");
  }
  if (contrast_.t == contrast_.t_prime) {
    throw_validation("dataset: contrast values must differ");
  }
  const int kt = pi_->value_index(contrast_.t);
  const int ktp = pi_->value_index(contrast_.t_prime);
  pi_t_ = pi_->matrix().col(kt);
  pi_tp_ = pi_->matrix().col(ktp);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!(pi_t_[i] > 0.0 && pi_t_[i] < 1.0 && pi_tp_[i] > 0.0 &&
          pi_tp_[i] < 1.0)) {
      throw_validation(
          "dataset: unit " + std::to_string(i) +
          " violates overlap on the contrast arms (pi_t=" +
          std::to_string(pi_t_[i]) + ", pi_t'=" + std::to_string(pi_tp_[i]) +
          ")");
    }
    if (t_[i] == contrast_.t) ++arm_count_t_;
    if (t_[i] == contrast_.t_prime) ++arm_count_tp_;
  }
}

Dataset Dataset::with_z(Eigen::MatrixXd z) const {
  Dataset copy = *this;
  if (z.size() > 0 && static_cast<std::size_t>(z.rows()) != size()) {
    throw_validation("with_z: row count mismatch");
  }
  copy.z_ = std::move(z);
  return copy;
}

Dataset Dataset::with_y(Eigen::VectorXd y) const {
  Dataset copy = *this;
  if (static_cast<std::size_t>(y.size()) != size()) {
    throw_validation("with_y: length mismatch");
  }
  copy.y_ = std::move(y);
  return copy;
}

}  // namespace netexp
