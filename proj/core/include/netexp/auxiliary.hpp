#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "netexp/dataset.hpp"
#include "netexp/design.hpp"
#include "netexp/graph.hpp"

namespace netexp {

// Auxiliary-variable catalog. G_i may depend on covariates, the assignment
// vector, and the network; evaluation is pure and K-local.
class AuxiliarySpec {
 public:
  using CustomEval = std::function<Eigen::RowVectorXd(
      std::uint32_t, const Eigen::MatrixXd&, std::span<const std::uint8_t>,
      const Graph&)>;

  // G_i = X_i.
  static AuxiliarySpec raw_covariates();
  // G_i = X_i (x) exposure-value indicators.
  static AuxiliarySpec exposure_interacted(ExposureSpec exposure);
  // G_i = (D_i, treated-neighbor fraction, X_i, neighbor-mean X_i).
  static AuxiliarySpec linear_in_means_set();
  // Blocks of the linear-in-means set interacted with exposure indicators.
  static AuxiliarySpec interacted_linear_in_means_set(ExposureSpec exposure);
  // locality < 0 marks an undeclared radius (Monte Carlo fitting only).
  static AuxiliarySpec custom(CustomEval eval, Eigen::Index dim,
                              int locality = -1);

  Eigen::Index output_dim(Eigen::Index covariate_dim) const;
  bool exact_capable() const;

  Eigen::RowVectorXd eval_unit(std::uint32_t i, const Eigen::MatrixXd& x,
                               std::span<const std::uint8_t> d,
                               const Graph& g) const;
  Eigen::MatrixXd eval(const Eigen::MatrixXd& x,
                       std::span<const std::uint8_t> d, const Graph& g) const;

  // Units whose assignment can change G_i.
  std::vector<std::uint32_t> dependence_set(std::uint32_t i,
                                            const Graph& g) const;

  enum class Kind {
    raw_covariates,
    exposure_interacted,
    linear_in_means_set,
    interacted_linear_in_means_set,
    custom
  };
  Kind kind() const { return kind_; }
  const ExposureSpec* exposure() const {
    return exposure_ ? &*exposure_ : nullptr;
  }

 private:
  AuxiliarySpec() = default;
  Kind kind_ = Kind::raw_covariates;
  std::optional<ExposureSpec> exposure_;
  CustomEval custom_;
  Eigen::Index custom_dim_ = 0;
  int custom_locality_ = -1;
};

Eigen::MatrixXd build_auxiliary(const AuxiliarySpec& spec,
                                const Eigen::MatrixXd& x,
                                std::span<const std::uint8_t> d,
                                const Graph& g);

// Per-unit decorrelation coefficients gamma_i = E[w_i G_i] / E[w_i^2],
// plus the Monte Carlo standard error of each component (zero for exact
// fits).
struct Phi0Normalizer {
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd gamma_se;
  std::size_t reps = 0;  // 0 marks an exact fit
};

// Monte Carlo fit over `reps` assignment draws; one shared stream of draws
// covers all units. Numerators and denominators use compensated summation.
Phi0Normalizer phi0_fit(const AuxiliarySpec& spec, const ExposureSpec& exposure,
                        const Design& design, const Graph& g,
                        const Eigen::MatrixXd& x, Contrast contrast,
                        const PropensityTable& pi, std::size_t reps,
                        std::uint64_t seed, int threads = 1);

// Exact gamma by enumerating the local assignment patterns that can move
// (w_i, G_i); requires declared locality and small dependence sets.
Phi0Normalizer phi0_exact(const AuxiliarySpec& spec,
                          const ExposureSpec& exposure, const Design& design,
                          const Graph& g, const Eigen::MatrixXd& x,
                          Contrast contrast, const PropensityTable& pi);

// phi0(G_i) = G_i - gamma_i * w_HT,i on the realized assignment.
Eigen::MatrixXd phi0_apply(const Phi0Normalizer& norm,
                           const Eigen::MatrixXd& g_realized,
                           const Dataset& ds);

// Binary sidecar cache for fitted normalizers, keyed by content hashes of
// the graph, spec, and design plus the fit parameters. Loading returns
// nothing on any mismatch; custom specs are not cacheable (no stable
// content hash).
struct Phi0CacheKey {
  std::uint64_t graph_hash = 0;
  std::uint64_t spec_hash = 0;
  std::uint64_t design_hash = 0;
  std::uint64_t reps = 0;
  std::uint64_t seed = 0;
};

std::uint64_t hash_graph(const Graph& g);
std::uint64_t hash_design(const Design& d);
std::uint64_t hash_auxiliary_setup(const AuxiliarySpec& spec,
                                   const ExposureSpec& exposure,
                                   Contrast contrast);

void save_phi0_cache(const std::string& path, const Phi0CacheKey& key,
                     const Phi0Normalizer& norm);
std::optional<Phi0Normalizer> load_phi0_cache(const std::string& path,
                                              const Phi0CacheKey& key);

}  // namespace netexp
