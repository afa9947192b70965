#pragma once

// Small builders for estimation-side tests.

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "netexp/dataset.hpp"
#include "netexp/design.hpp"

namespace netexp::testing {

// Binary-exposure dataset from per-unit pi(T=1); value set {0, 1},
// contrast (1, 0) unless overridden.
inline Dataset make_binary_dataset(const Eigen::VectorXd& y,
                                   const std::vector<int>& t,
                                   const Eigen::VectorXd& pi1,
                                   const Eigen::MatrixXd& z,
                                   Contrast contrast = {1, 0}) {
  const auto n = y.size();
  Eigen::MatrixXd pi(n, 2);
  pi.col(1) = pi1;
  pi.col(0) = Eigen::VectorXd::Ones(n) - pi1;
  auto table = std::make_shared<const PropensityTable>(
      std::vector<int>{0, 1}, std::move(pi));
  std::vector<std::uint8_t> d(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = t[i] == 1 ? 1 : 0;
  return Dataset(y, d, t, std::move(table), z, contrast);
}

}  // namespace netexp::testing
