#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <variant>

#include "netexp/design.hpp"
#include "netexp/graph.hpp"

namespace netexp {

// Y = (I - a1 O)^{-1} [a0 1 + (a2 O + a3 I) D + a4 X + eps], |a1| < 1,
// O the row-normalized adjacency.
struct LinearInMeans {
  double a0, a1, a2, a3, a4;
};

// Binary fixed point of Y_i = 1(a0 + a1 (O Y)_i + a2 (O D)_i + a3 D_i
// + a4 X_i + eps_i > 0), iterated from Y = 0. a1 >= 0 keeps the update
// monotone, so the iteration converges within n steps.
struct NonlinearContagion {
  double a0, a1, a2, a3, a4;
  std::size_t max_iters = 0;  // 0 -> n
};

// SUTVA benchmark with per-unit propensities baked into the outcome:
// Y_i = X_i (-(1 - D_i) + pi1_i/(1 - pi1_i) D_i) + eps_i.
struct SutvaCounterexample {
  Eigen::VectorXd pi1;
};

using OutcomeModel =
    std::variant<LinearInMeans, NonlinearContagion, SutvaCounterexample>;

// Validates the model against the graph and caches whatever the repeated
// evaluation needs (a dense factorization of I - a1 O below n = 4000, a
// Neumann-series apply above).
class OutcomeGenerator {
 public:
  OutcomeGenerator(OutcomeModel model, std::shared_ptr<const Graph> g);

  Eigen::VectorXd generate(std::span<const std::uint8_t> d,
                           const Eigen::VectorXd& x,
                           const Eigen::VectorXd& eps) const;

  const OutcomeModel& model() const { return model_; }

 private:
  OutcomeModel model_;
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<const Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

Eigen::VectorXd generate_outcomes(const OutcomeModel& model, const Graph& g,
                                  std::span<const std::uint8_t> d,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& eps);

struct NoiseSpec {
  enum class Kind { coordinate_shifted, iid_normal };
  Kind kind = Kind::coordinate_shifted;
  double sd = 1.0;
};

// coordinate_shifted: eps_i = v_i + coord_x_i - 0.5 with v_i standard
// normal, correlating noise with location; requires unit coordinates.
Eigen::VectorXd generate_noise(const NoiseSpec& spec, std::size_t n,
                               const std::vector<std::array<double, 2>>* coords,
                               Rng& rng);

struct GroundTruth {
  double tau = 0.0;
  double mc_se = 0.0;
  std::size_t reps = 0;
  // Per-unit expected outcomes under the two contrast exposures.
  Eigen::VectorXd mu_t, mu_tp;
};

// Monte Carlo estimate of tau over fresh assignment draws, holding the
// fixture (graph, x, eps) fixed. Unbiased via inverse propensity weighting
// of the realized outcomes.
GroundTruth ground_truth_tau(const OutcomeGenerator& gen, const Graph& g,
                             const ExposureSpec& exposure, const Design& design,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& eps, Contrast contrast,
                             const PropensityTable& pi, std::size_t reps,
                             std::uint64_t seed, int threads = 1);

struct SutvaVariances {
  double sigma2_haj = 0.0;
  double sigma2_f = 0.0;
  double sigma2_l = 0.0;
  Eigen::VectorXd beta_l1, beta_l0, beta_f;
  // Solution of the blocked normal equations; absent when that system is
  // singular.
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> beta_tilde;
};

// Closed-form finite-population asymptotic variances of the Hajek, Fisher
// and Lin estimators under SUTVA with binary T = D.
SutvaVariances sutva_asymptotic_variances(const Eigen::MatrixXd& x,
                                          const Eigen::VectorXd& pi1,
                                          const Eigen::VectorXd& mu1,
                                          const Eigen::VectorXd& mu0);

}  // namespace netexp
