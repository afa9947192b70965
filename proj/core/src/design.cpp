#include "netexp/design.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "netexp/error.hpp"

namespace netexp {

Design::Design(std::vector<double> p) : p_(std::move(p)) {
  for (std::size_t i = 0; i < p_.size(); ++i) {
    if (!(p_[i] > 0.0 && p_[i] < 1.0)) {
      throw_validation("treatment probability of unit " + std::to_string(i) +
                       " is " + std::to_string(p_[i]) +
                       "; must lie strictly inside (0,1)");
    }
  }
}

Design Design::constant(std::size_t n, double p) {
  return Design(std::vector<double>(n, p));
}

std::vector<std::uint8_t> sample_assignment(const Design& d, Rng& rng) {
  std::vector<std::uint8_t> out(d.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = rng.bernoulli(d.prob(static_cast<std::uint32_t>(i))) ? 1 : 0;
  }
  return out;
}

ExposureSpec ExposureSpec::direct() {
  ExposureSpec s;
  s.kind_ = Kind::direct;
  s.values_ = {0, 1};
  s.locality_ = 0;
  return s;
}

ExposureSpec ExposureSpec::neighbor_count_threshold() {
  ExposureSpec s;
  s.kind_ = Kind::neighbor_count_threshold;
  s.values_ = {0, 1};
  s.locality_ = 1;
  return s;
}

ExposureSpec ExposureSpec::neighbor_count_threshold(std::vector<double> theta) {
  ExposureSpec s = neighbor_count_threshold();
  s.theta_ = std::move(theta);
  return s;
}

ExposureSpec ExposureSpec::eligible_neighbor_any(
    std::vector<std::vector<std::uint32_t>> lists,
    std::vector<std::uint8_t> mask) {
  if (lists.size() != mask.size()) {
    throw_validation("eligible_neighbor_any: list/mask length mismatch");
  }
  ExposureSpec s;
  s.kind_ = Kind::eligible_neighbor_any;
  s.values_ = {0, 1};
  s.locality_ = 1;
  s.lists_ = std::move(lists);
  s.mask_ = std::move(mask);
  return s;
}

ExposureSpec ExposureSpec::custom(CustomEval eval, std::vector<int> value_set,
                                  int locality_radius) {
  if (!eval) throw_validation("custom exposure: evaluator is empty");
  if (value_set.empty()) throw_validation("custom exposure: empty value set");
  ExposureSpec s;
  s.kind_ = Kind::custom;
  s.custom_ = std::move(eval);
  s.values_ = std::move(value_set);
  std::sort(s.values_.begin(), s.values_.end());
  s.locality_ = locality_radius;
  return s;
}

std::vector<double> ExposureSpec::resolved_thresholds(const Graph& g) const {
  if (kind_ != Kind::neighbor_count_threshold) {
    throw_validation("thresholds only defined for neighbor_count_threshold");
  }
  if (!theta_.empty()) {
    if (theta_.size() != g.size()) {
      throw_validation("threshold vector length does not match graph size");
    }
    return theta_;
  }
  std::vector<double> theta(g.size());
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    theta[i] = std::floor(static_cast<double>(g.degree(i)) / 2.0);
  }
  return theta;
}

int ExposureSpec::eval_unit(std::uint32_t i, std::span<const std::uint8_t> d,
                            const Graph& g) const {
  switch (kind_) {
    case Kind::direct:
      return d[i];
    case Kind::neighbor_count_threshold: {
      double count = 0.0;
      for (std::uint32_t j : g.neighbors(i)) count += d[j];
      const double theta =
          theta_.empty() ? std::floor(static_cast<double>(g.degree(i)) / 2.0)
                         : theta_[i];
      return count > theta ? 1 : 0;
    }
    case Kind::eligible_neighbor_any: {
      if (i >= lists_.size()) {
        throw_validation("eligible_neighbor_any: unit " + std::to_string(i) +
                         " has no neighbor list");
      }
      for (std::uint32_t j : lists_[i]) {
        if (j >= d.size()) {
          throw_validation("eligible_neighbor_any: list of unit " +
                           std::to_string(i) + " references absent unit " +
                           std::to_string(j));
        }
        if (mask_[j] && d[j]) return 1;
      }
      return 0;
    }
    case Kind::custom:
      return custom_(i, d, g);
  }
  return 0;
}

std::vector<std::uint32_t> ExposureSpec::dependence_set(std::uint32_t i,
                                                        const Graph& g) const {
  switch (kind_) {
    case Kind::direct:
      return {i};
    case Kind::neighbor_count_threshold: {
      auto nb = g.neighbors(i);
      return {nb.begin(), nb.end()};
    }
    case Kind::eligible_neighbor_any: {
      std::vector<std::uint32_t> dep;
      for (std::uint32_t j : lists_[i]) {
        if (mask_[j]) dep.push_back(j);
      }
      return dep;
    }
    case Kind::custom: {
      const auto dist = bfs_distances(g, i, locality_);
      std::vector<std::uint32_t> dep;
      for (std::uint32_t j = 0; j < dist.size(); ++j) {
        if (dist[j] != kUnreachable) dep.push_back(j);
      }
      return dep;
    }
  }
  return {};
}

std::vector<int> exposure_eval(const ExposureSpec& spec,
                               std::span<const std::uint8_t> d,
                               const Graph& g) {
  if (d.size() != g.size()) {
    throw_validation("exposure_eval: assignment length does not match graph");
  }
  std::vector<int> t(g.size());
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    t[i] = spec.eval_unit(i, d, g);
  }
  return t;
}

PropensityTable::PropensityTable(std::vector<int> values, Eigen::MatrixXd pi)
    : values_(std::move(values)), pi_(std::move(pi)) {
  if (static_cast<std::size_t>(pi_.cols()) != values_.size()) {
    throw_validation("propensity table: column/value-set mismatch");
  }
}

int PropensityTable::value_index(int value) const {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (values_[k] == value) return static_cast<int>(k);
  }
  throw_validation("exposure value " + std::to_string(value) +
                   " not in the table's value set");
}

namespace {

// P(sum of independent Bernoulli(p_j) > theta) by direct DP convolution.
double poisson_binomial_tail(std::span<const double> probs, double theta) {
  std::vector<double> f(probs.size() + 1, 0.0);
  f[0] = 1.0;
  std::size_t upper = 0;
  for (double p : probs) {
    ++upper;
    for (std::size_t k = upper; k > 0; --k) {
      f[k] = f[k] * (1.0 - p) + f[k - 1] * p;
    }
    f[0] *= (1.0 - p);
  }
  double tail = 0.0;
  for (std::size_t k = 0; k <= probs.size(); ++k) {
    if (static_cast<double>(k) > theta) tail += f[k];
  }
  return std::min(1.0, std::max(0.0, tail));
}

}  // namespace

PropensityTable propensity_exact(const ExposureSpec& spec, const Design& d,
                                 const Graph& g) {
  if (d.size() != g.size()) {
    throw_validation("propensity_exact: design size does not match graph");
  }
  const std::size_t n = g.size();
  Eigen::MatrixXd pi(n, 2);
  switch (spec.kind()) {
    case ExposureSpec::Kind::direct: {
      for (std::uint32_t i = 0; i < n; ++i) {
        pi(i, 1) = d.prob(i);
        pi(i, 0) = 1.0 - d.prob(i);
      }
      break;
    }
    case ExposureSpec::Kind::neighbor_count_threshold: {
      const auto theta = spec.resolved_thresholds(g);
      std::vector<double> probs;
      for (std::uint32_t i = 0; i < n; ++i) {
        probs.clear();
        for (std::uint32_t j : g.neighbors(i)) probs.push_back(d.prob(j));
        pi(i, 1) = poisson_binomial_tail(probs, theta[i]);
        pi(i, 0) = 1.0 - pi(i, 1);
      }
      break;
    }
    case ExposureSpec::Kind::eligible_neighbor_any: {
      for (std::uint32_t i = 0; i < n; ++i) {
        double none = 1.0;
        for (std::uint32_t j : spec.dependence_set(i, g)) {
          none *= 1.0 - d.prob(j);
        }
        pi(i, 1) = 1.0 - none;
        pi(i, 0) = none;
      }
      break;
    }
    case ExposureSpec::Kind::custom:
      throw_validation(
          "propensity_exact does not support custom exposure specs; use "
          "propensity_mc");
  }
  return PropensityTable(spec.value_set(), std::move(pi));
}

PropensityTable propensity_mc(const ExposureSpec& spec, const Design& d,
                              const Graph& g, std::size_t reps, Rng& rng) {
  if (reps < 1) throw_validation("propensity_mc: reps must be >= 1");
  const std::size_t n = g.size();
  const auto& values = spec.value_set();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, values.size());
  for (std::size_t r = 0; r < reps; ++r) {
    const auto dr = sample_assignment(d, rng);
    for (std::uint32_t i = 0; i < n; ++i) {
      const int t = spec.eval_unit(i, dr, g);
      for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] == t) {
          counts(i, k) += 1.0;
          break;
        }
      }
    }
  }
  counts /= static_cast<double>(reps);
  return PropensityTable(values, std::move(counts));
}

OverlapReport overlap_check(const PropensityTable& pi, Contrast c,
                            double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw_validation("overlap_check: epsilon must lie in (0, 0.5)");
  }
  OverlapReport report;
  report.epsilon = eps;
  for (int value : {c.t, c.t_prime}) {
    const int k = pi.value_index(value);
    for (std::uint32_t i = 0; i < pi.size(); ++i) {
      const double p = pi.matrix()(i, k);
      if (p < eps || p > 1.0 - eps) {
        report.violations.push_back({i, value, p});
      }
    }
  }
  return report;
}

}  // namespace netexp
