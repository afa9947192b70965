#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "netexp/auxiliary.hpp"
#include "netexp/dataset.hpp"
#include "netexp/design.hpp"
#include "netexp/dgp.hpp"
#include "netexp/graph.hpp"
#include "netexp/hac.hpp"

namespace netexp {

struct GraphSource {
  enum class Kind { rgg, edge_csv, edgeless };
  Kind kind = Kind::rgg;
  std::size_t n = 0;               // rgg, edgeless
  double density_factor = 1.5;     // rgg
  std::string edges_path;          // edge_csv
  std::string coords_path;         // edge_csv, optional
};

struct DesignSpec {
  enum class Kind { constant, uniform };
  Kind kind = Kind::constant;
  double p = 0.5;          // constant
  double lo = 0.1, hi = 0.9;  // uniform, drawn once per study
};

struct CovariateSpec {
  double sd = 1.0;  // X_i iid normal(0, sd^2), one column
};

struct MethodSpec {
  enum class Family { ht, haj, fisher, lin, nd };
  enum class Aux { none, x, exposure_interacted, g1, g2 };

  std::string label;
  Family family = Family::ht;
  Star star = Star::haj;          // nd only
  NdMode mode = NdMode::pooled;   // nd only
  Aux aux = Aux::none;
  bool phi0 = false;
};

// Parses the table labels used throughout ("HT", "Haj", "F", "L", "ND-F",
// "ND-L", "ND-G1", "ND-phi0(G1)", "F-phi0(G2)", "ND-phi0(G)", ...).
MethodSpec parse_method_label(const std::string& label);

struct OutcomeSpec {
  enum class Kind { linear_in_means, nonlinear_contagion, sutva_counterexample };
  Kind kind = Kind::linear_in_means;
  std::array<double, 5> alpha{-1.0, 0.1, 1.0, 1.0, 1.0};
};

struct Scenario {
  int schema_version = 1;
  std::string name;
  GraphSource graph;
  DesignSpec design;
  nlohmann::json exposure;  // parsed lazily against the graph
  Contrast contrast{1, 0};
  OutcomeSpec outcome;
  NoiseSpec noise;
  CovariateSpec covariates;
  std::int32_t b_n = 3;
  BandwidthMode bandwidth_mode = BandwidthMode::inclusive;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  double ci_level = 0.95;
  std::size_t truth_reps = 0;   // 0 -> 10 * reps
  std::size_t phi0_reps = 100000;
  bool phi0_exact_mode = false;
  double overlap_epsilon = 0.01;
  std::vector<MethodSpec> methods;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

// Builds an exposure spec from its JSON description; the node table hook
// resolves column references (thresholds, masks) when present.
ExposureSpec exposure_from_json(const nlohmann::json& j, const Graph& g,
                                const std::vector<double>* theta_column,
                                const std::vector<std::uint8_t>* mask_column,
                                const std::vector<std::vector<std::uint32_t>>*
                                    directed_lists);

struct MethodMetrics {
  std::string label;
  double bias = 0.0;
  double oracle_se = 0.0;
  double est_se = 0.0;
  double oracle_coverage = 0.0;
  double empirical_coverage = 0.0;
  std::size_t failed = 0;
  std::size_t negative_variance = 0;
  std::size_t reps_used = 0;
  double mean_tau = 0.0;
  bool degenerate = false;
};

struct Report {
  int schema_version = 1;
  std::string scenario_name;
  std::size_t n_units = 0;
  std::size_t reps = 0;
  double ci_level = 0.95;
  std::int32_t b_n = 0;
  double tau_truth = 0.0;
  double tau_truth_se = 0.0;
  std::vector<MethodMetrics> rows;
};

nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

enum class ReportFormat { table, csv, json };
std::string emit_report(const Report& r, ReportFormat format);

// The assembled study fixture, kept fixed across replications.
struct StudyFixture {
  std::shared_ptr<const Graph> graph;
  std::vector<std::array<double, 2>> coords;
  Design design;
  ExposureSpec exposure;
  std::shared_ptr<const PropensityTable> pi;
  Eigen::VectorXd x;           // raw covariate draw
  Eigen::VectorXd eps;
  OutcomeGenerator generator;
  GroundTruth truth;
};

Report run_study(const Scenario& s, int threads = 1);

// Fixture assembly exposed for diagnostics and tests.
StudyFixture build_fixture(const Scenario& s, int threads);

nlohmann::json adjusted_estimate_to_json(const AdjustedEstimate& est);

}  // namespace netexp
