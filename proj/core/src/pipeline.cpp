#include "netexp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "netexp/auxiliary.hpp"
#include "netexp/csv.hpp"
#include "netexp/error.hpp"
#include "netexp/estimators.hpp"
#include "netexp/hac.hpp"
#include "netexp/sim.hpp"
#include "netexp/stats.hpp"

namespace netexp {

using nlohmann::json;

namespace {

struct LoadedData {
  Graph graph;
  NodeTable nodes;
  bool has_nodes = false;
  std::map<std::int64_t, std::uint32_t> id_to_index;
};

LoadedData load_graph_and_nodes(const std::string& edges_path,
                                const std::string& nodes_path) {
  LoadedData data;
  const EdgeList el = read_edge_csv(edges_path);
  if (nodes_path.empty()) {
    data.graph = Graph::from_edges(el.edges.empty() ? 0 : el.max_id + 1,
                                   el.edges);
    return data;
  }
  data.nodes = read_node_csv(nodes_path);
  data.has_nodes = true;
  for (std::size_t k = 0; k < data.nodes.ids.size(); ++k) {
    data.id_to_index[data.nodes.ids[k]] = static_cast<std::uint32_t>(k);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(el.edges.size());
  for (const auto& [a, b] : el.edges) {
    const auto ia = data.id_to_index.find(a);
    const auto ib = data.id_to_index.find(b);
    if (ia == data.id_to_index.end() || ib == data.id_to_index.end()) {
      throw_validation("edge (" + std::to_string(a) + "," + std::to_string(b) +
                       ") references an id absent from the node table");
    }
    edges.emplace_back(ia->second, ib->second);
  }
  data.graph = Graph::from_edges(data.nodes.size(), edges);
  return data;
}

Design design_from_config(const json& cfg, const LoadedData& data) {
  const json& jd = cfg.at("design");
  const std::string kind = jd.at("kind").get<std::string>();
  if (kind == "constant") {
    return Design::constant(data.graph.size(), jd.at("p").get<double>());
  }
  if (kind == "column") {
    if (!data.has_nodes) {
      throw_validation("design kind 'column' requires a node table");
    }
    return Design(data.nodes.column(jd.at("column").get<std::string>()));
  }
  throw_validation("design: unknown kind '" + kind + "'");
}

ExposureSpec exposure_from_config(const json& cfg, const LoadedData& data) {
  const json& je = cfg.at("exposure");
  std::vector<double> theta;
  const std::vector<double>* theta_ptr = nullptr;
  std::vector<std::uint8_t> mask;
  const std::vector<std::uint8_t>* mask_ptr = nullptr;
  std::vector<std::vector<std::uint32_t>> lists;
  const std::vector<std::vector<std::uint32_t>>* lists_ptr = nullptr;

  if (je.contains("theta_column")) {
    if (!data.has_nodes) {
      throw_validation("exposure theta_column requires a node table");
    }
    theta = data.nodes.column(je.at("theta_column").get<std::string>());
    theta_ptr = &theta;
  }
  if (je.contains("mask_column")) {
    if (!data.has_nodes) {
      throw_validation("exposure mask_column requires a node table");
    }
    for (double v : data.nodes.column(je.at("mask_column").get<std::string>())) {
      mask.push_back(v != 0.0 ? 1 : 0);
    }
    mask_ptr = &mask;
  } else if (je.at("kind").get<std::string>() == "eligible_neighbor_any") {
    mask.assign(data.graph.size(), 1);
    mask_ptr = &mask;
  }
  if (je.contains("directed_edges")) {
    const EdgeList del = read_edge_csv(je.at("directed_edges").get<std::string>());
    lists.resize(data.graph.size());
    for (const auto& [a, b] : del.edges) {
      std::uint32_t ia = a, ib = b;
      if (data.has_nodes) {
        const auto fa = data.id_to_index.find(a);
        const auto fb = data.id_to_index.find(b);
        if (fa == data.id_to_index.end() || fb == data.id_to_index.end()) {
          throw_validation("directed edge references an unknown id");
        }
        ia = fa->second;
        ib = fb->second;
      }
      if (ia >= lists.size() || ib >= lists.size()) {
        throw_validation("directed edge endpoint out of range");
      }
      lists[ia].push_back(ib);
    }
    lists_ptr = &lists;
  }
  return exposure_from_json(je, data.graph, theta_ptr, mask_ptr, lists_ptr);
}

}  // namespace

json run_estimate(const std::string& edges_path, const std::string& nodes_path,
                  const json& config, int threads) {
  const LoadedData data = load_graph_and_nodes(edges_path, nodes_path);
  if (!data.has_nodes) {
    throw_validation("estimate requires a node table (outcomes, treatment)");
  }
  const std::size_t n = data.graph.size();

  const Design design = design_from_config(config, data);
  const ExposureSpec exposure = exposure_from_config(config, data);
  const Contrast contrast{config.at("contrast").at("t").get<int>(),
                          config.at("contrast").at("t_prime").get<int>()};

  const auto& y_col =
      data.nodes.column(config.value("outcome_column", std::string("y")));
  const auto& d_col =
      data.nodes.column(config.value("treatment_column", std::string("d")));
  Eigen::VectorXd y(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = y_col[i];
    if (d_col[i] != 0.0 && d_col[i] != 1.0) {
      throw_validation("treatment column must be binary");
    }
    d[i] = d_col[i] != 0.0 ? 1 : 0;
  }

  Eigen::MatrixXd x(n, 0);
  if (config.contains("covariate_columns")) {
    const auto names =
        config.at("covariate_columns").get<std::vector<std::string>>();
    x.resize(n, names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto& col = data.nodes.column(names[c]);
      for (std::size_t i = 0; i < n; ++i) x(i, c) = col[i];
    }
  }
  Eigen::MatrixXd x_centered = x;
  if (config.value("center_covariates", true)) {
    x_centered.rowwise() -= x.colwise().mean().eval();
  }

  const std::int32_t b_n = config.value("b_n", 3);
  const std::string bwmode = config.value("bandwidth_mode", "inclusive");
  const BandwidthNeighborhoods bw(
      data.graph, b_n,
      bwmode == "strict" ? BandwidthMode::strict : BandwidthMode::inclusive);
  const double ci_level = config.value("ci_level", 0.95);
  const double eps = config.value("overlap_epsilon", 0.01);
  const auto seed = config.value<std::uint64_t>("seed", 1);

  // Propensities: exact where the exposure kind supports it, MC otherwise.
  std::shared_ptr<const PropensityTable> pi;
  const json pcfg = config.value("propensity", json{{"mode", "exact"}});
  if (pcfg.at("mode").get<std::string>() == "mc" || !exposure.exact_capable()) {
    Rng rng(derive_seed(seed, "propensity"));
    pi = std::make_shared<const PropensityTable>(propensity_mc(
        exposure, design, data.graph,
        pcfg.value("reps", std::size_t{100000}), rng));
  } else {
    pi = std::make_shared<const PropensityTable>(
        propensity_exact(exposure, design, data.graph));
  }

  const OverlapReport overlap = overlap_check(*pi, contrast, eps);
  if (!overlap.pass()) {
    json units = json::array();
    for (std::size_t k = 0; k < std::min<std::size_t>(20, overlap.violations.size());
         ++k) {
      const auto& v = overlap.violations[k];
      units.push_back({{"unit", v.unit}, {"value", v.value}, {"pi", v.pi}});
    }
    throw Error(ErrorKind::validation,
                "overlap check failed for " +
                    std::to_string(overlap.violations.size()) +
                    " unit/arm pairs; first: " + units.dump());
  }

  const std::vector<int> t = exposure_eval(exposure, d, data.graph);

  const json phi0_cfg = config.value("phi0", json{{"mode", "exact"}});
  auto fit_norm = [&](const AuxiliarySpec& aux) -> Phi0Normalizer {
    const bool mc = phi0_cfg.at("mode").get<std::string>() == "mc";
    const std::size_t reps = phi0_cfg.value("reps", std::size_t{100000});
    const std::uint64_t phi0_seed = derive_seed(seed, "phi0");
    const std::string cache_path = phi0_cfg.value("cache", std::string());
    Phi0CacheKey key;
    if (!cache_path.empty()) {
      key = Phi0CacheKey{hash_graph(data.graph),
                         hash_auxiliary_setup(aux, exposure, contrast),
                         hash_design(design), mc ? reps : 0,
                         mc ? phi0_seed : 0};
      if (auto cached = load_phi0_cache(cache_path, key)) return *cached;
    }
    Phi0Normalizer norm =
        mc ? phi0_fit(aux, exposure, design, data.graph, x, contrast, *pi,
                      reps, phi0_seed, threads)
           : phi0_exact(aux, exposure, design, data.graph, x, contrast, *pi);
    if (!cache_path.empty()) save_phi0_cache(cache_path, key, norm);
    return norm;
  };

  json rows = json::array();
  for (const auto& jm : config.at("methods")) {
    const MethodSpec m = parse_method_label(jm.get<std::string>());
    Eigen::MatrixXd z(n, 0);
    switch (m.aux) {
      case MethodSpec::Aux::none:
        break;
      case MethodSpec::Aux::x:
        z = x_centered;
        break;
      case MethodSpec::Aux::exposure_interacted: {
        const AuxiliarySpec aux = AuxiliarySpec::exposure_interacted(exposure);
        z = aux.eval(x, d, data.graph);
        if (m.phi0) z = phi0_apply(fit_norm(aux),
                                   z,
                                   Dataset(y, d, t, pi, z, contrast));
        break;
      }
      case MethodSpec::Aux::g1: {
        const AuxiliarySpec aux = AuxiliarySpec::linear_in_means_set();
        z = aux.eval(x, d, data.graph);
        if (m.phi0) z = phi0_apply(fit_norm(aux),
                                   z,
                                   Dataset(y, d, t, pi, z, contrast));
        break;
      }
      case MethodSpec::Aux::g2: {
        const AuxiliarySpec aux =
            AuxiliarySpec::interacted_linear_in_means_set(exposure);
        z = aux.eval(x, d, data.graph);
        if (m.phi0) z = phi0_apply(fit_norm(aux),
                                   z,
                                   Dataset(y, d, t, pi, z, contrast));
        break;
      }
    }
    Dataset ds(y, d, t, pi, std::move(z), contrast);
    AdjustedEstimate est;
    switch (m.family) {
      case MethodSpec::Family::ht: {
        est.method = m.label;
        est.tau_hat = tau_unadjusted(ds, Star::ht);
        const auto v = hac_sigma2(influence_terms(ds, Star::ht), bw);
        est.sigma2_hat = v.value;
        est.sigma2_negative = v.negative;
        if (!v.negative) est.ci = wald_ci(est.tau_hat, v.value, n, ci_level);
        est.n = n;
        est.b_n = b_n;
        est.contrast = contrast;
        est.beta = Eigen::MatrixXd::Zero(0, 1);
        break;
      }
      case MethodSpec::Family::haj: {
        est.method = m.label;
        est.tau_hat = tau_unadjusted(ds, Star::haj);
        const auto v = hac_sigma2(influence_terms(ds, Star::haj), bw);
        est.sigma2_hat = v.value;
        est.sigma2_negative = v.negative;
        if (!v.negative) est.ci = wald_ci(est.tau_hat, v.value, n, ci_level);
        est.n = n;
        est.b_n = b_n;
        est.contrast = contrast;
        est.beta = Eigen::MatrixXd::Zero(0, 1);
        break;
      }
      case MethodSpec::Family::fisher:
        est = fisher_wls(ds, bw, ci_level);
        est.method = m.label;
        break;
      case MethodSpec::Family::lin:
        est = lin_wls(ds, bw, ci_level);
        est.method = m.label;
        break;
      case MethodSpec::Family::nd:
        est = nd_solve(ds, m.star, bw, m.mode, ci_level);
        est.method = m.label;
        break;
    }
    rows.push_back(adjusted_estimate_to_json(est));
  }

  return json{{"schema_version", 1},
              {"n_units", n},
              {"b_n", b_n},
              {"contrast", {{"t", contrast.t}, {"t_prime", contrast.t_prime}}},
              {"rows", rows}};
}

json run_propensity(const std::string& edges_path,
                    const std::string& nodes_path, const json& config) {
  const LoadedData data = load_graph_and_nodes(edges_path, nodes_path);
  const Design design = design_from_config(config, data);
  const ExposureSpec exposure = exposure_from_config(config, data);

  const std::string mode = config.value("mode", "exact");
  std::unique_ptr<PropensityTable> pi;
  if (mode == "exact") {
    pi = std::make_unique<PropensityTable>(
        propensity_exact(exposure, design, data.graph));
  } else if (mode == "mc") {
    Rng rng(derive_seed(config.value<std::uint64_t>("seed", 1), "propensity"));
    pi = std::make_unique<PropensityTable>(
        propensity_mc(exposure, design, data.graph,
                      config.value("reps", std::size_t{100000}), rng));
  } else {
    throw_validation("propensity mode must be exact or mc");
  }

  json values = json::array();
  for (int v : pi->values()) values.push_back(v);
  json units = json::array();
  for (std::uint32_t i = 0; i < pi->size(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < pi->matrix().cols(); ++k) {
      row.push_back(pi->matrix()(i, k));
    }
    const std::int64_t id =
        data.has_nodes ? data.nodes.ids[i] : static_cast<std::int64_t>(i);
    units.push_back({{"id", id}, {"pi", row}});
  }
  return json{{"schema_version", 1},
              {"mode", mode},
              {"values", values},
              {"units", units}};
}

std::string propensity_to_csv(const json& table) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "id";
  for (const auto& v : table.at("values")) {
    os << ",pi_" << v.get<int>();
  }
  os << "\n";
  for (const auto& u : table.at("units")) {
    os << u.at("id").get<std::int64_t>();
    for (const auto& p : u.at("pi")) os << ',' << p.get<double>();
    os << "\n";
  }
  return os.str();
}

json run_diagnose(const std::string& edges_path, const std::string& nodes_path,
                  const json& config) {
  const LoadedData data = load_graph_and_nodes(edges_path, nodes_path);
  const std::size_t n = data.graph.size();

  json out;
  out["schema_version"] = 1;
  out["n_units"] = n;
  out["edge_count"] = data.graph.edge_count();
  std::size_t isolated = 0;
  std::size_t max_deg = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    isolated += data.graph.degree(i) == 0 ? 1 : 0;
    max_deg = std::max(max_deg, data.graph.degree(i));
  }
  out["isolated_units"] = isolated;
  out["max_degree"] = max_deg;

  const std::int32_t max_s = config.value("max_s", 3);
  const std::vector<int> ks =
      config.value("moment_orders", std::vector<int>{1, 2});
  const NeighborhoodStats stats = neighborhood_stats(data.graph, max_s, ks);
  out["boundary_avg"] = stats.boundary_avg;
  json moments;
  for (std::size_t k = 0; k < stats.moment_orders.size(); ++k) {
    moments["k" + std::to_string(stats.moment_orders[k])] = stats.moments[k];
  }
  out["moments"] = moments;

  if (config.contains("design") && config.contains("exposure") &&
      config.contains("contrast")) {
    const Design design = design_from_config(config, data);
    const ExposureSpec exposure = exposure_from_config(config, data);
    const Contrast contrast{config.at("contrast").at("t").get<int>(),
                            config.at("contrast").at("t_prime").get<int>()};
    const double eps = config.value("overlap_epsilon", 0.01);
    PropensityTable pi = exposure.exact_capable()
                             ? propensity_exact(exposure, design, data.graph)
                             : [&] {
                                 Rng rng(derive_seed(
                                     config.value<std::uint64_t>("seed", 1),
                                     "propensity"));
                                 return propensity_mc(
                                     exposure, design, data.graph,
                                     config.value("reps", std::size_t{100000}),
                                     rng);
                               }();
    const OverlapReport overlap = overlap_check(pi, contrast, eps);
    out["overlap"] = {{"epsilon", eps},
                      {"pass", overlap.pass()},
                      {"violation_count", overlap.violations.size()}};
    json viol = json::array();
    for (std::size_t k = 0;
         k < std::min<std::size_t>(50, overlap.violations.size()); ++k) {
      const auto& v = overlap.violations[k];
      viol.push_back({{"unit", v.unit}, {"value", v.value}, {"pi", v.pi}});
    }
    out["overlap"]["violations"] = viol;
  }
  return out;
}

}  // namespace netexp
