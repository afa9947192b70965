#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "netexp/graph.hpp"
#include "netexp/rng.hpp"

namespace netexp {

// Independent Bernoulli assignment probabilities, each strictly inside
// (0, 1).
class Design {
 public:
  explicit Design(std::vector<double> p);
  static Design constant(std::size_t n, double p);

  std::size_t size() const { return p_.size(); }
  double prob(std::uint32_t i) const { return p_[i]; }
  std::span<const double> probs() const { return p_; }

 private:
  std::vector<double> p_;
};

std::vector<std::uint8_t> sample_assignment(const Design& d, Rng& rng);

struct Contrast {
  int t;
  int t_prime;
};

// K-local exposure mapping with a finite set of scalar exposure codes.
class ExposureSpec {
 public:
  using CustomEval = std::function<int(
      std::uint32_t, std::span<const std::uint8_t>, const Graph&)>;

  // T_i = D_i.
  static ExposureSpec direct();
  // T_i = 1(sum_{j in nbrs(i)} D_j > theta_i); default theta_i = floor(deg_i/2).
  static ExposureSpec neighbor_count_threshold();
  static ExposureSpec neighbor_count_threshold(std::vector<double> theta);
  // T_i = 1(any eligible listed neighbor treated). `lists` may be directed
  // and need not coincide with the graph adjacency.
  static ExposureSpec eligible_neighbor_any(
      std::vector<std::vector<std::uint32_t>> lists,
      std::vector<std::uint8_t> mask);
  static ExposureSpec custom(CustomEval eval, std::vector<int> value_set,
                             int locality_radius);

  const std::vector<int>& value_set() const { return values_; }
  int locality_radius() const { return locality_; }
  bool exact_capable() const { return kind_ != Kind::custom; }

  int eval_unit(std::uint32_t i, std::span<const std::uint8_t> d,
                const Graph& g) const;

  // Units whose assignment can change T_i. For built-in specs this is the
  // exact dependence set; for custom specs, the K-ball around i.
  std::vector<std::uint32_t> dependence_set(std::uint32_t i,
                                            const Graph& g) const;

  enum class Kind { direct, neighbor_count_threshold, eligible_neighbor_any, custom };
  Kind kind() const { return kind_; }
  // Per-unit thresholds resolved against a graph (threshold kind only).
  std::vector<double> resolved_thresholds(const Graph& g) const;

 private:
  ExposureSpec() = default;
  Kind kind_ = Kind::direct;
  std::vector<int> values_;
  int locality_ = 0;
  std::vector<double> theta_;                            // threshold kind
  std::vector<std::vector<std::uint32_t>> lists_;        // eligible kind
  std::vector<std::uint8_t> mask_;                       // eligible kind
  CustomEval custom_;
};

std::vector<int> exposure_eval(const ExposureSpec& spec,
                               std::span<const std::uint8_t> d,
                               const Graph& g);

// Per-unit, per-exposure-value probabilities.
class PropensityTable {
 public:
  PropensityTable(std::vector<int> values, Eigen::MatrixXd pi);

  std::size_t size() const { return pi_.rows(); }
  const std::vector<int>& values() const { return values_; }
  int value_index(int value) const;
  double prob(std::uint32_t i, int value) const {
    return pi_(i, value_index(value));
  }
  const Eigen::MatrixXd& matrix() const { return pi_; }

 private:
  std::vector<int> values_;
  Eigen::MatrixXd pi_;
};

// Exact propensities. Threshold specs go through a Poisson-binomial
// convolution over the neighbor probabilities; eligible-any specs through
// a complement product. Custom specs are rejected (use propensity_mc).
PropensityTable propensity_exact(const ExposureSpec& spec, const Design& d,
                                 const Graph& g);

PropensityTable propensity_mc(const ExposureSpec& spec, const Design& d,
                              const Graph& g, std::size_t reps, Rng& rng);

struct OverlapViolation {
  std::uint32_t unit;
  int value;
  double pi;
};

struct OverlapReport {
  double epsilon = 0.0;
  std::vector<OverlapViolation> violations;
  bool pass() const { return violations.empty(); }
};

// Units whose propensity for either contrast arm leaves [eps, 1-eps].
OverlapReport overlap_check(const PropensityTable& pi, Contrast c, double eps);

}  // namespace netexp
