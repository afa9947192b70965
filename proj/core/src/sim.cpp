#include "netexp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "netexp/csv.hpp"
#include "netexp/error.hpp"
#include "netexp/estimators.hpp"
#include "netexp/parallel.hpp"
#include "netexp/stats.hpp"

namespace netexp {

using nlohmann::json;

namespace {

const json& require_field(const json& j, const char* key, const char* ctx) {
  if (!j.contains(key)) {
    throw_validation(std::string(ctx) + ": missing field '" + key + "'");
  }
  return j.at(key);
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

MethodSpec parse_method_label(const std::string& label) {
  using F = MethodSpec::Family;
  using A = MethodSpec::Aux;
  MethodSpec m;
  m.label = label;
  if (label == "HT") {
    m.family = F::ht;
  } else if (label == "Haj") {
    m.family = F::haj;
  } else if (label == "F") {
    m.family = F::fisher;
    m.aux = A::x;
  } else if (label == "L") {
    m.family = F::lin;
    m.aux = A::x;
  } else if (label == "ND-F") {
    m.family = F::nd;
    m.aux = A::x;
  } else if (label == "ND-L") {
    m.family = F::nd;
    m.mode = NdMode::per_exposure;
    m.aux = A::x;
  } else if (label == "ND-G1") {
    m.family = F::nd;
    m.aux = A::g1;
  } else if (label == "ND-G2") {
    m.family = F::nd;
    m.aux = A::g2;
  } else if (label == "ND-G") {
    m.family = F::nd;
    m.aux = A::exposure_interacted;
  } else if (label == "ND-phi0(G1)") {
    m.family = F::nd;
    m.aux = A::g1;
    m.phi0 = true;
  } else if (label == "ND-phi0(G2)") {
    m.family = F::nd;
    m.aux = A::g2;
    m.phi0 = true;
  } else if (label == "ND-phi0(G)") {
    m.family = F::nd;
    m.aux = A::exposure_interacted;
    m.phi0 = true;
  } else if (label == "F-phi0(G1)") {
    m.family = F::fisher;
    m.aux = A::g1;
    m.phi0 = true;
  } else if (label == "F-phi0(G2)") {
    m.family = F::fisher;
    m.aux = A::g2;
    m.phi0 = true;
  } else if (label == "F-phi0(G)") {
    m.family = F::fisher;
    m.aux = A::exposure_interacted;
    m.phi0 = true;
  } else {
    throw_validation("unknown method label '" + label + "'");
  }
  return m;
}

ExposureSpec exposure_from_json(
    const json& j, const Graph& g, const std::vector<double>* theta_column,
    const std::vector<std::uint8_t>* mask_column,
    const std::vector<std::vector<std::uint32_t>>* directed_lists) {
  const std::string kind = require_field(j, "kind", "exposure").get<std::string>();
  if (kind == "direct") return ExposureSpec::direct();
  if (kind == "neighbor_count_threshold") {
    if (theta_column != nullptr) {
      return ExposureSpec::neighbor_count_threshold(*theta_column);
    }
    return ExposureSpec::neighbor_count_threshold();
  }
  if (kind == "eligible_neighbor_any") {
    if (mask_column == nullptr) {
      throw_validation("exposure eligible_neighbor_any: no mask available");
    }
    std::vector<std::vector<std::uint32_t>> lists;
    if (directed_lists != nullptr) {
      lists = *directed_lists;
    } else {
      lists.resize(g.size());
      for (std::uint32_t i = 0; i < g.size(); ++i) {
        const auto nb = g.neighbors(i);
        lists[i].assign(nb.begin(), nb.end());
      }
    }
    return ExposureSpec::eligible_neighbor_any(std::move(lists), *mask_column);
  }
  throw_validation("exposure: unknown kind '" + kind + "'");
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.schema_version = field_or(j, "schema_version", 1);
  if (s.schema_version != 1) {
    throw_validation("scenario: unsupported schema_version " +
                     std::to_string(s.schema_version));
  }
  s.name = field_or<std::string>(j, "name", "unnamed");

  const json& jg = require_field(j, "graph", "scenario");
  const std::string gkind = require_field(jg, "kind", "scenario.graph").get<std::string>();
  if (gkind == "rgg") {
    s.graph.kind = GraphSource::Kind::rgg;
    s.graph.n = require_field(jg, "n", "scenario.graph").get<std::size_t>();
    s.graph.density_factor = field_or(jg, "density_factor", 1.5);
  } else if (gkind == "edge_csv") {
    s.graph.kind = GraphSource::Kind::edge_csv;
    s.graph.edges_path = require_field(jg, "path", "scenario.graph").get<std::string>();
    s.graph.coords_path = field_or<std::string>(jg, "coords_path", "");
  } else if (gkind == "edgeless") {
    s.graph.kind = GraphSource::Kind::edgeless;
    s.graph.n = require_field(jg, "n", "scenario.graph").get<std::size_t>();
  } else {
    throw_validation("scenario.graph: unknown kind '" + gkind + "'");
  }

  const json& jd = require_field(j, "design", "scenario");
  const std::string dkind = require_field(jd, "kind", "scenario.design").get<std::string>();
  if (dkind == "constant") {
    s.design.kind = DesignSpec::Kind::constant;
    s.design.p = require_field(jd, "p", "scenario.design").get<double>();
  } else if (dkind == "uniform") {
    s.design.kind = DesignSpec::Kind::uniform;
    s.design.lo = require_field(jd, "lo", "scenario.design").get<double>();
    s.design.hi = require_field(jd, "hi", "scenario.design").get<double>();
  } else {
    throw_validation("scenario.design: unknown kind '" + dkind + "'");
  }

  s.exposure = require_field(j, "exposure", "scenario");
  const json& jc = require_field(j, "contrast", "scenario");
  s.contrast.t = require_field(jc, "t", "scenario.contrast").get<int>();
  s.contrast.t_prime =
      require_field(jc, "t_prime", "scenario.contrast").get<int>();

  const json& jo = require_field(j, "outcome", "scenario");
  const std::string okind = require_field(jo, "kind", "scenario.outcome").get<std::string>();
  if (okind == "linear_in_means") {
    s.outcome.kind = OutcomeSpec::Kind::linear_in_means;
  } else if (okind == "nonlinear_contagion") {
    s.outcome.kind = OutcomeSpec::Kind::nonlinear_contagion;
  } else if (okind == "sutva_counterexample") {
    s.outcome.kind = OutcomeSpec::Kind::sutva_counterexample;
  } else {
    throw_validation("scenario.outcome: unknown kind '" + okind + "'");
  }
  if (jo.contains("alpha")) {
    const auto a = jo.at("alpha").get<std::vector<double>>();
    if (a.size() != 5) {
      throw_validation("scenario.outcome.alpha must have 5 entries");
    }
    std::copy(a.begin(), a.end(), s.outcome.alpha.begin());
  }

  if (j.contains("noise")) {
    const json& jn = j.at("noise");
    const std::string nkind = require_field(jn, "kind", "scenario.noise").get<std::string>();
    if (nkind == "coordinate_shifted") {
      s.noise.kind = NoiseSpec::Kind::coordinate_shifted;
    } else if (nkind == "iid_normal") {
      s.noise.kind = NoiseSpec::Kind::iid_normal;
      s.noise.sd = field_or(jn, "sd", 1.0);
    } else {
      throw_validation("scenario.noise: unknown kind '" + nkind + "'");
    }
  }
  if (j.contains("covariates")) {
    s.covariates.sd = field_or(j.at("covariates"), "sd", 1.0);
  }

  s.b_n = field_or<std::int32_t>(j, "b_n", 3);
  const std::string bwmode = field_or<std::string>(j, "bandwidth_mode", "inclusive");
  if (bwmode == "inclusive") {
    s.bandwidth_mode = BandwidthMode::inclusive;
  } else if (bwmode == "strict") {
    s.bandwidth_mode = BandwidthMode::strict;
  } else {
    throw_validation("scenario.bandwidth_mode must be inclusive or strict");
  }
  s.reps = require_field(j, "reps", "scenario").get<std::size_t>();
  s.seed = require_field(j, "seed", "scenario").get<std::uint64_t>();
  s.ci_level = field_or(j, "ci_level", 0.95);
  s.truth_reps = field_or<std::size_t>(j, "truth_reps", 0);
  s.phi0_reps = field_or<std::size_t>(j, "phi0_reps", 100000);
  const std::string pmode = field_or<std::string>(j, "phi0_mode", "mc");
  if (pmode == "exact") {
    s.phi0_exact_mode = true;
  } else if (pmode == "mc") {
    s.phi0_exact_mode = false;
  } else {
    throw_validation("scenario.phi0_mode must be mc or exact");
  }
  s.overlap_epsilon = field_or(j, "overlap_epsilon", 0.01);

  for (const auto& m : require_field(j, "methods", "scenario")) {
    s.methods.push_back(parse_method_label(m.get<std::string>()));
  }
  if (s.methods.empty()) {
    throw_validation("scenario: method list is empty");
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  switch (s.graph.kind) {
    case GraphSource::Kind::rgg:
      j["graph"] = {{"kind", "rgg"},
                    {"n", s.graph.n},
                    {"density_factor", s.graph.density_factor}};
      break;
    case GraphSource::Kind::edge_csv:
      j["graph"] = {{"kind", "edge_csv"}, {"path", s.graph.edges_path}};
      if (!s.graph.coords_path.empty()) {
        j["graph"]["coords_path"] = s.graph.coords_path;
      }
      break;
    case GraphSource::Kind::edgeless:
      j["graph"] = {{"kind", "edgeless"}, {"n", s.graph.n}};
      break;
  }
  if (s.design.kind == DesignSpec::Kind::constant) {
    j["design"] = {{"kind", "constant"}, {"p", s.design.p}};
  } else {
    j["design"] = {{"kind", "uniform"}, {"lo", s.design.lo}, {"hi", s.design.hi}};
  }
  j["exposure"] = s.exposure;
  j["contrast"] = {{"t", s.contrast.t}, {"t_prime", s.contrast.t_prime}};
  const char* okind = s.outcome.kind == OutcomeSpec::Kind::linear_in_means
                          ? "linear_in_means"
                          : s.outcome.kind == OutcomeSpec::Kind::nonlinear_contagion
                                ? "nonlinear_contagion"
                                : "sutva_counterexample";
  j["outcome"] = {{"kind", okind}, {"alpha", s.outcome.alpha}};
  j["noise"] =
      s.noise.kind == NoiseSpec::Kind::coordinate_shifted
          ? json{{"kind", "coordinate_shifted"}}
          : json{{"kind", "iid_normal"}, {"sd", s.noise.sd}};
  j["covariates"] = {{"kind", "iid_normal"}, {"sd", s.covariates.sd}};
  j["b_n"] = s.b_n;
  j["bandwidth_mode"] =
      s.bandwidth_mode == BandwidthMode::inclusive ? "inclusive" : "strict";
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  j["ci_level"] = s.ci_level;
  j["truth_reps"] = s.truth_reps;
  j["phi0_reps"] = s.phi0_reps;
  j["phi0_mode"] = s.phi0_exact_mode ? "exact" : "mc";
  j["overlap_epsilon"] = s.overlap_epsilon;
  std::vector<std::string> labels;
  for (const auto& m : s.methods) labels.push_back(m.label);
  j["methods"] = labels;
  return j;
}

StudyFixture build_fixture(const Scenario& s, int threads) {
  std::shared_ptr<const Graph> graph;
  std::vector<std::array<double, 2>> coords;
  switch (s.graph.kind) {
    case GraphSource::Kind::rgg: {
      auto rgg = rgg_generate(s.graph.n, s.graph.density_factor,
                              derive_seed(s.seed, "graph"));
      graph = std::make_shared<Graph>(std::move(rgg.graph));
      coords = std::move(rgg.coords);
      break;
    }
    case GraphSource::Kind::edge_csv: {
      const EdgeList el = read_edge_csv(s.graph.edges_path);
      graph = std::make_shared<Graph>(
          Graph::from_edges(el.max_id + 1, el.edges));
      if (!s.graph.coords_path.empty()) {
        const CoordTable ct = read_coord_csv(s.graph.coords_path);
        coords.resize(graph->size(), {0.0, 0.0});
        for (std::size_t k = 0; k < ct.ids.size(); ++k) {
          const auto id = ct.ids[k];
          if (id < 0 || static_cast<std::size_t>(id) >= graph->size()) {
            throw_validation("coords file references unknown unit id");
          }
          coords[static_cast<std::size_t>(id)] = ct.coords[k];
        }
      }
      break;
    }
    case GraphSource::Kind::edgeless:
      graph = std::make_shared<Graph>(Graph::edgeless(s.graph.n));
      break;
  }
  const std::size_t n = graph->size();
  if (n == 0) throw_validation("scenario graph has no units");

  std::vector<double> p(n, s.design.p);
  if (s.design.kind == DesignSpec::Kind::uniform) {
    Rng rng(derive_seed(s.seed, "design"));
    for (auto& v : p) v = s.design.lo + (s.design.hi - s.design.lo) * rng.uniform();
  }
  Design design(std::move(p));

  Eigen::VectorXd x(n);
  {
    Rng rng(derive_seed(s.seed, "covariates"));
    for (std::size_t i = 0; i < n; ++i) x[i] = s.covariates.sd * rng.normal();
  }
  Eigen::VectorXd eps;
  {
    Rng rng(derive_seed(s.seed, "noise"));
    eps = generate_noise(s.noise, n, coords.empty() ? nullptr : &coords, rng);
  }

  ExposureSpec exposure =
      exposure_from_json(s.exposure, *graph, nullptr, nullptr, nullptr);
  auto pi = std::make_shared<const PropensityTable>(
      propensity_exact(exposure, design, *graph));

  const OverlapReport overlap =
      overlap_check(*pi, s.contrast, s.overlap_epsilon);
  if (!overlap.pass()) {
    std::string msg = "scenario fails overlap at epsilon " +
                      std::to_string(s.overlap_epsilon) + ": " +
                      std::to_string(overlap.violations.size()) +
                      " violations; first at unit " +
                      std::to_string(overlap.violations.front().unit);
    throw_validation(msg);
  }

  OutcomeModel model;
  switch (s.outcome.kind) {
    case OutcomeSpec::Kind::linear_in_means:
      model = LinearInMeans{s.outcome.alpha[0], s.outcome.alpha[1],
                            s.outcome.alpha[2], s.outcome.alpha[3],
                            s.outcome.alpha[4]};
      break;
    case OutcomeSpec::Kind::nonlinear_contagion:
      model = NonlinearContagion{s.outcome.alpha[0], s.outcome.alpha[1],
                                 s.outcome.alpha[2], s.outcome.alpha[3],
                                 s.outcome.alpha[4]};
      break;
    case OutcomeSpec::Kind::sutva_counterexample: {
      Eigen::VectorXd pi1(n);
      for (std::size_t i = 0; i < n; ++i) {
        pi1[i] = design.prob(static_cast<std::uint32_t>(i));
      }
      model = SutvaCounterexample{std::move(pi1)};
      break;
    }
  }
  OutcomeGenerator generator(std::move(model), graph);

  const std::size_t truth_reps =
      s.truth_reps == 0 ? 10 * s.reps : s.truth_reps;
  GroundTruth truth =
      ground_truth_tau(generator, *graph, exposure, design, x, eps,
                       s.contrast, *pi, truth_reps,
                       derive_seed(s.seed, "truth_root"), threads);
  if (truth.mc_se > 0.01 * std::abs(truth.tau)) {
    throw_numerical(
        "ground-truth tau has Monte Carlo SE " + std::to_string(truth.mc_se) +
        " exceeding 1% of |tau| = " + std::to_string(std::abs(truth.tau)) +
        "; raise truth_reps");
  }

  return StudyFixture{std::move(graph),  std::move(coords),
                      std::move(design), std::move(exposure),
                      std::move(pi),     std::move(x),
                      std::move(eps),    std::move(generator),
                      std::move(truth)};
}

namespace {

struct RepOutcome {
  double tau = 0.0;
  double sigma2 = 0.0;
  bool negative = false;
  bool failed = false;
};

struct MethodPlan {
  MethodSpec spec;
  AuxiliarySpec aux{AuxiliarySpec::raw_covariates()};
  bool has_aux = false;
  std::optional<Phi0Normalizer> norm;
};

}  // namespace

Report run_study(const Scenario& s, int threads) {
  const StudyFixture fx = build_fixture(s, threads);
  const Graph& g = *fx.graph;
  const std::size_t n = g.size();

  const BandwidthNeighborhoods bw(g, s.b_n, s.bandwidth_mode);

  const Eigen::MatrixXd x_raw = fx.x;
  Eigen::MatrixXd x_centered = x_raw;
  x_centered.col(0).array() -= x_raw.col(0).mean();

  // Auxiliary specs and phi0 normalizers, fitted once on the fixture.
  std::vector<MethodPlan> plans;
  plans.reserve(s.methods.size());
  for (std::size_t mi = 0; mi < s.methods.size(); ++mi) {
    const MethodSpec& m = s.methods[mi];
    MethodPlan plan;
    plan.spec = m;
    switch (m.aux) {
      case MethodSpec::Aux::none:
      case MethodSpec::Aux::x:
        plan.has_aux = false;
        break;
      case MethodSpec::Aux::exposure_interacted:
        plan.aux = AuxiliarySpec::exposure_interacted(fx.exposure);
        plan.has_aux = true;
        break;
      case MethodSpec::Aux::g1:
        plan.aux = AuxiliarySpec::linear_in_means_set();
        plan.has_aux = true;
        break;
      case MethodSpec::Aux::g2:
        plan.aux = AuxiliarySpec::interacted_linear_in_means_set(fx.exposure);
        plan.has_aux = true;
        break;
    }
    if (m.phi0) {
      if (s.phi0_exact_mode) {
        plan.norm = phi0_exact(plan.aux, fx.exposure, fx.design, g, x_raw,
                               s.contrast, *fx.pi);
      } else {
        plan.norm = phi0_fit(plan.aux, fx.exposure, fx.design, g, x_raw,
                             s.contrast, *fx.pi, s.phi0_reps,
                             derive_seed(s.seed, "phi0", mi), threads);
      }
    }
    plans.push_back(std::move(plan));
  }

  // Replication loop. Per-rep rng streams and slot storage keep the
  // result independent of the thread count.
  std::vector<std::vector<RepOutcome>> rep_rows(
      s.reps, std::vector<RepOutcome>(plans.size()));

  parallel_blocks(s.reps, 16, threads, [&](std::size_t, std::size_t begin,
                                           std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(derive_seed(s.seed, "rep", r));
      const auto d = sample_assignment(fx.design, rng);
      const Eigen::VectorXd y = fx.generator.generate(d, fx.x, fx.eps);
      const std::vector<int> t = exposure_eval(fx.exposure, d, g);

      for (std::size_t mi = 0; mi < plans.size(); ++mi) {
        const MethodPlan& plan = plans[mi];
        RepOutcome& out = rep_rows[r][mi];
        try {
          Eigen::MatrixXd z(n, 0);
          if (plan.spec.aux == MethodSpec::Aux::x) {
            z = x_centered;
          } else if (plan.has_aux) {
            z = plan.aux.eval(x_raw, d, g);
          }
          Dataset ds(y, d, t, fx.pi, std::move(z), s.contrast);
          if (plan.norm) {
            ds = ds.with_z(phi0_apply(*plan.norm, ds.z(), ds));
          }
          switch (plan.spec.family) {
            case MethodSpec::Family::ht: {
              out.tau = tau_unadjusted(ds, Star::ht);
              const auto v = hac_sigma2(influence_terms(ds, Star::ht), bw);
              out.sigma2 = v.value;
              out.negative = v.negative;
              break;
            }
            case MethodSpec::Family::haj: {
              out.tau = tau_unadjusted(ds, Star::haj);
              const auto v = hac_sigma2(influence_terms(ds, Star::haj), bw);
              out.sigma2 = v.value;
              out.negative = v.negative;
              break;
            }
            case MethodSpec::Family::fisher: {
              const auto est = fisher_wls(ds, bw, s.ci_level);
              out.tau = est.tau_hat;
              out.sigma2 = est.sigma2_hat;
              out.negative = est.sigma2_negative;
              break;
            }
            case MethodSpec::Family::lin: {
              const auto est = lin_wls(ds, bw, s.ci_level);
              out.tau = est.tau_hat;
              out.sigma2 = est.sigma2_hat;
              out.negative = est.sigma2_negative;
              break;
            }
            case MethodSpec::Family::nd: {
              const auto est =
                  nd_solve(ds, plan.spec.star, bw, plan.spec.mode, s.ci_level);
              out.tau = est.tau_hat;
              out.sigma2 = est.sigma2_hat;
              out.negative = est.sigma2_negative;
              break;
            }
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::numerical) throw;
          out.failed = true;
        }
      }
    }
  });

  // Ordered aggregation.
  Report report;
  report.scenario_name = s.name;
  report.n_units = n;
  report.reps = s.reps;
  report.ci_level = s.ci_level;
  report.b_n = s.b_n;
  report.tau_truth = fx.truth.tau;
  report.tau_truth_se = fx.truth.mc_se;

  const double z = normal_quantile(0.5 + s.ci_level / 2.0);
  for (std::size_t mi = 0; mi < plans.size(); ++mi) {
    MethodMetrics row;
    row.label = plans[mi].spec.label;
    std::vector<double> taus;
    std::vector<double> ses;
    taus.reserve(s.reps);
    for (std::size_t r = 0; r < s.reps; ++r) {
      const RepOutcome& out = rep_rows[r][mi];
      if (out.failed) {
        row.failed += 1;
        continue;
      }
      taus.push_back(out.tau);
      if (out.negative) {
        row.negative_variance += 1;
      } else {
        ses.push_back(std::sqrt(out.sigma2 / static_cast<double>(n)));
      }
    }
    row.reps_used = taus.size();
    row.degenerate = taus.size() < 2;
    row.mean_tau = mean(taus);
    row.bias = std::abs(row.mean_tau - fx.truth.tau);
    row.oracle_se = sample_sd(taus);
    row.est_se = mean(ses);

    std::size_t oracle_cover = 0;
    std::size_t emp_cover = 0;
    std::size_t emp_total = 0;
    for (std::size_t r = 0; r < s.reps; ++r) {
      const RepOutcome& out = rep_rows[r][mi];
      if (out.failed) continue;
      if (std::abs(out.tau - fx.truth.tau) <= z * row.oracle_se) {
        oracle_cover += 1;
      }
      if (!out.negative) {
        emp_total += 1;
        const double se = std::sqrt(out.sigma2 / static_cast<double>(n));
        if (std::abs(out.tau - fx.truth.tau) <= z * se) emp_cover += 1;
      }
    }
    row.oracle_coverage =
        row.reps_used ? static_cast<double>(oracle_cover) / row.reps_used : 0.0;
    row.empirical_coverage =
        emp_total ? static_cast<double>(emp_cover) / emp_total : 0.0;

    const double fail_rate =
        static_cast<double>(row.failed + row.negative_variance) /
        static_cast<double>(s.reps);
    if (s.reps > 1 && fail_rate > 0.01) {
      throw_numerical("method " + row.label + " failed on " +
                      std::to_string(row.failed) + " reps with " +
                      std::to_string(row.negative_variance) +
                      " negative variances (" + std::to_string(fail_rate) +
                      " > 1% of reps)");
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

json report_to_json(const Report& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"method", row.label},
                    {"bias", row.bias},
                    {"oracle_se", row.oracle_se},
                    {"est_se", row.est_se},
                    {"oracle_coverage", row.oracle_coverage},
                    {"empirical_coverage", row.empirical_coverage},
                    {"failed", row.failed},
                    {"negative_variance", row.negative_variance},
                    {"reps_used", row.reps_used},
                    {"mean_tau", row.mean_tau},
                    {"degenerate", row.degenerate}});
  }
  return json{{"schema_version", r.schema_version},
              {"scenario", r.scenario_name},
              {"n_units", r.n_units},
              {"reps", r.reps},
              {"ci_level", r.ci_level},
              {"b_n", r.b_n},
              {"tau_truth", r.tau_truth},
              {"tau_truth_se", r.tau_truth_se},
              {"rows", rows}};
}

Report report_from_json(const json& j) {
  Report r;
  r.schema_version = require_field(j, "schema_version", "report").get<int>();
  r.scenario_name = require_field(j, "scenario", "report").get<std::string>();
  r.n_units = require_field(j, "n_units", "report").get<std::size_t>();
  r.reps = require_field(j, "reps", "report").get<std::size_t>();
  r.ci_level = require_field(j, "ci_level", "report").get<double>();
  r.b_n = require_field(j, "b_n", "report").get<std::int32_t>();
  r.tau_truth = require_field(j, "tau_truth", "report").get<double>();
  r.tau_truth_se = require_field(j, "tau_truth_se", "report").get<double>();
  for (const auto& jr : require_field(j, "rows", "report")) {
    MethodMetrics row;
    row.label = jr.at("method").get<std::string>();
    row.bias = jr.at("bias").get<double>();
    row.oracle_se = jr.at("oracle_se").get<double>();
    row.est_se = jr.at("est_se").get<double>();
    row.oracle_coverage = jr.at("oracle_coverage").get<double>();
    row.empirical_coverage = jr.at("empirical_coverage").get<double>();
    row.failed = jr.at("failed").get<std::size_t>();
    row.negative_variance = jr.at("negative_variance").get<std::size_t>();
    row.reps_used = jr.at("reps_used").get<std::size_t>();
    row.mean_tau = jr.at("mean_tau").get<double>();
    row.degenerate = jr.at("degenerate").get<bool>();
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string emit_report(const Report& r, ReportFormat format) {
  if (format == ReportFormat::json) {
    return report_to_json(r).dump(2) + "\n";
  }
  if (format == ReportFormat::csv) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "method,bias,oracle_se,est_se,oracle_coverage,empirical_coverage,"
          "failed,negative_variance,reps_used,mean_tau,degenerate\n";
    for (const auto& row : r.rows) {
      os << csv_escape(row.label) << ',' << row.bias << ',' << row.oracle_se
         << ',' << row.est_se << ',' << row.oracle_coverage << ','
         << row.empirical_coverage << ',' << row.failed << ','
         << row.negative_variance << ',' << row.reps_used << ','
         << row.mean_tau << ',' << (row.degenerate ? "true" : "false")
         << '\n';
    }
    return os.str();
  }

  std::ostringstream os;
  os << "scenario: " << r.scenario_name << "  n=" << r.n_units
     << "  reps=" << r.reps << "  b_n=" << r.b_n << "\n";
  os << "tau_truth: " << std::fixed << std::setprecision(4) << r.tau_truth
     << " (mc se " << std::setprecision(5) << r.tau_truth_se << ")\n";
  os << std::left << std::setw(14) << "method" << std::right << std::setw(10)
     << "bias" << std::setw(11) << "oracle_se" << std::setw(10) << "est_se"
     << std::setw(11) << "oracle_cov" << std::setw(9) << "emp_cov"
     << std::setw(8) << "failed" << std::setw(8) << "negvar" << "\n";
  for (const auto& row : r.rows) {
    os << std::left << std::setw(14) << row.label << std::right << std::fixed
       << std::setprecision(4) << std::setw(10) << row.bias << std::setw(11)
       << row.oracle_se << std::setw(10) << row.est_se << std::setprecision(3)
       << std::setw(11) << row.oracle_coverage << std::setw(9)
       << row.empirical_coverage << std::setw(8) << row.failed << std::setw(8)
       << row.negative_variance;
    if (row.degenerate) os << "  (degenerate)";
    os << "\n";
  }
  return os.str();
}

json adjusted_estimate_to_json(const AdjustedEstimate& est) {
  json j;
  j["method"] = est.method;
  j["tau_hat"] = est.tau_hat;
  if (est.sigma2_negative) {
    j["se"] = nullptr;
    j["ci_low"] = nullptr;
    j["ci_high"] = nullptr;
    j["negative_variance"] = true;
  } else {
    j["se"] = std::sqrt(est.sigma2_hat / static_cast<double>(est.n));
    j["ci_low"] = est.ci ? json(est.ci->lo) : json(nullptr);
    j["ci_high"] = est.ci ? json(est.ci->hi) : json(nullptr);
    j["negative_variance"] = false;
  }
  if (est.per_value_beta) {
    json cols = json::array();
    for (Eigen::Index c = 0; c < est.beta.cols(); ++c) {
      json col = json::array();
      for (Eigen::Index q = 0; q < est.beta.rows(); ++q) {
        col.push_back(est.beta(q, c));
      }
      cols.push_back(col);
    }
    j["beta"] = cols;
  } else {
    json col = json::array();
    for (Eigen::Index q = 0; q < est.beta.rows(); ++q) {
      col.push_back(est.beta(q, 0));
    }
    j["beta"] = col;
  }
  j["beta_per_value"] = est.per_value_beta;
  j["n"] = est.n;
  j["b_n"] = est.b_n;
  j["contrast"] = {{"t", est.contrast.t}, {"t_prime", est.contrast.t_prime}};
  return j;
}

}  // namespace netexp
