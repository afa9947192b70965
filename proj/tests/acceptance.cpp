// Acceptance suite: runs the seven project-level criteria and prints one
// pass/fail line each. Invoke with --criterion N for a single criterion or
// with no arguments for the full battery.

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "helpers/oracles.hpp"
#include "netexp/auxiliary.hpp"
#include "netexp/dgp.hpp"
#include "netexp/error.hpp"
#include "netexp/estimators.hpp"
#include "netexp/hac.hpp"
#include "netexp/parallel.hpp"
#include "netexp/pipeline.hpp"
#include "netexp/sim.hpp"

using namespace netexp;
using namespace netexp::testing;
using nlohmann::json;

namespace {

std::string g_scenario_dir = NETEXP_SCENARIO_DIR;

struct Checker {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void require(bool cond, const std::string& what) {
    if (!cond) failures.push_back(what);
  }
  void note(const std::string& what) { notes.push_back(what); }
  bool ok() const { return failures.empty(); }
};

json load_scenario(const std::string& name) {
  const std::string path = g_scenario_dir + "/" + name;
  std::ifstream in(path);
  if (!in) throw_io("cannot open scenario '" + path + "'");
  json j;
  in >> j;
  return j;
}

const MethodMetrics& row_of(const Report& r, const std::string& label) {
  for (const auto& row : r.rows) {
    if (row.label == label) return row;
  }
  throw_validation("report has no row '" + label + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- C1 --

bool criterion1() {
  Checker c;
  Rng rng(20250810);
  double max_pi_dev = 0.0, max_tau_dev = 0.0, max_w_dev = 0.0,
         max_phi_dev = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + (trial % 6);
    const Graph g = random_graph(n, 0.25, rng);
    std::vector<double> p(n);
    for (auto& v : p) v = 0.3 + 0.4 * rng.uniform();
    const Design design(p);
    const auto exposure = ExposureSpec::neighbor_count_threshold();
    const auto pi = propensity_exact(exposure, design, g);

    // (a) exact propensities against the 2^n enumeration
    const Eigen::MatrixXd brute =
        enumerate_propensity(exposure, design, g, pi.values());
    max_pi_dev =
        std::max(max_pi_dev, (pi.matrix() - brute).cwiseAbs().maxCoeff());

    // (b) design expectation of tau_ht equals the enumerated estimand
    const auto f = PotentialOutcome::random(n, rng);
    const auto pi_ptr = std::make_shared<const PropensityTable>(pi);
    double expected_tau_hat = 0.0;
    Eigen::VectorXd expected_w = Eigen::VectorXd::Zero(n);
    for_each_assignment(n, [&](const std::vector<std::uint8_t>& d) {
      const double wgt = assignment_weight(design, d);
      const auto t = exposure_eval(exposure, d, g);
      Eigen::VectorXd y(n);
      for (std::uint32_t i = 0; i < n; ++i) y[i] = f(i, d, g);
      const Dataset ds(y, d, t, pi_ptr, Eigen::MatrixXd(n, 0), {1, 0});
      expected_tau_hat += wgt * tau_unadjusted(ds, Star::ht);
      expected_w += wgt * ht_weights(ds);
    });
    const auto truth = enumerate_truth(exposure, design, g, f, 1, 0);
    max_tau_dev = std::max(max_tau_dev, std::abs(expected_tau_hat - truth.tau));
    max_w_dev = std::max(max_w_dev, expected_w.cwiseAbs().maxCoeff());

    // (c) decorrelation through phi0_exact
    Eigen::MatrixXd x(n, 1);
    for (std::uint32_t i = 0; i < n; ++i) x(i, 0) = rng.normal();
    const auto aux = AuxiliarySpec::linear_in_means_set();
    const auto norm = phi0_exact(aux, exposure, design, g, x, {1, 0}, pi);
    Eigen::MatrixXd moment =
        Eigen::MatrixXd::Zero(n, aux.output_dim(x.cols()));
    for_each_assignment(n, [&](const std::vector<std::uint8_t>& d) {
      const double wgt = assignment_weight(design, d);
      for (std::uint32_t i = 0; i < n; ++i) {
        const int ti = exposure.eval_unit(i, d, g);
        const double w =
            ti == 1 ? 1.0 / pi.prob(i, 1) : -1.0 / pi.prob(i, 0);
        const Eigen::RowVectorXd gi = aux.eval_unit(i, x, d, g);
        moment.row(i) += wgt * w * (gi - w * norm.gamma.row(i));
      }
    });
    max_phi_dev = std::max(max_phi_dev, moment.cwiseAbs().maxCoeff());
  }
  c.require(max_pi_dev < 1e-12,
            "propensity deviation " + fmt(max_pi_dev) + " exceeds 1e-12");
  c.require(max_tau_dev < 1e-10,
            "E[tau_ht] deviation " + fmt(max_tau_dev) + " exceeds 1e-10");
  c.require(max_w_dev < 1e-10,
            "E[w_ht] deviation " + fmt(max_w_dev) + " exceeds 1e-10");
  c.require(max_phi_dev < 1e-10,
            "E[w phi0(G)] deviation " + fmt(max_phi_dev) + " exceeds 1e-10");
  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 1: enumeration oracle suite (pi dev "
            << fmt(max_pi_dev) << ", tau dev " << fmt(max_tau_dev)
            << ", w dev " << fmt(max_w_dev) << ", phi0 dev "
            << fmt(max_phi_dev) << ")\n";
  for (const auto& f : c.failures) std::cout << "  - " << f << "\n";
  return c.ok();
}

// ---------------------------------------------------------------- C2 --

bool criterion2() {
  Checker c;
  Rng rng(20250811);
  int beta_checks = 0;
  double max_quad_dev = 0.0;
  int argmin_checks = 0;
  double max_argmin_dev = 0.0;
  int dominance_checks = 0;

  auto make_instance = [&](std::size_t n, Eigen::Index q, std::int32_t b) {
    const Graph g = random_graph(n, 0.15, rng);
    Eigen::VectorXd y(n), pi1(n);
    Eigen::MatrixXd z(n, q);
    std::vector<int> t(n);
    std::vector<std::uint8_t> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal();
      pi1[i] = 0.25 + 0.5 * rng.uniform();
      for (Eigen::Index k = 0; k < q; ++k) z(i, k) = rng.normal();
      t[i] = rng.bernoulli(0.5) ? 1 : 0;
      d[i] = t[i];
    }
    Eigen::MatrixXd pi(n, 2);
    pi.col(1) = pi1;
    pi.col(0) = Eigen::VectorXd::Ones(n) - pi1;
    auto table = std::make_shared<const PropensityTable>(
        std::vector<int>{0, 1}, std::move(pi));
    return std::make_pair(
        Dataset(y, d, t, table, z, Contrast{1, 0}),
        BandwidthNeighborhoods(g, b, BandwidthMode::inclusive));
  };

  while (beta_checks < 100) {
    const auto [ds, bw] = make_instance(24, 2, 1 + (beta_checks % 2));
    const auto terms =
        influence_terms(ds, beta_checks % 2 ? Star::ht : Star::haj);
    const auto sys = build_nd_system(terms, bw);
    for (int k = 0; k < 10 && beta_checks < 100; ++k, ++beta_checks) {
      Eigen::VectorXd beta(2);
      beta << 3.0 * rng.normal(), 3.0 * rng.normal();
      const double direct = hac_sigma2(terms, beta, bw).value;
      const double quad =
          sys.c - 2.0 * beta.dot(sys.l) + beta.dot(sys.h * beta);
      const double tol = 1e-10 * std::max(1.0, std::abs(sys.c));
      max_quad_dev = std::max(max_quad_dev, std::abs(direct - quad) /
                                                std::max(1.0, std::abs(sys.c)));
      if (std::abs(direct - quad) > tol) {
        c.require(false, "quadratic identity off by " +
                             fmt(std::abs(direct - quad)));
      }
    }
  }

  while (argmin_checks < 5) {
    const auto [ds, bw] = make_instance(30, 2, 1);
    const auto terms = influence_terms(ds, Star::haj);
    AdjustedEstimate est;
    try {
      est = nd_solve(ds, Star::haj, bw, NdMode::pooled);
    } catch (const Error&) {
      continue;
    }
    const auto objective = [&](const Eigen::VectorXd& beta) {
      return hac_sigma2(terms, beta, bw).value;
    };
    const Eigen::VectorXd oracle = grid_refine_argmin(objective, 2, 10.0);
    const double dev = (oracle - est.beta.col(0)).cwiseAbs().maxCoeff();
    max_argmin_dev = std::max(max_argmin_dev, dev);
    c.require(dev < 1e-4, "argmin oracle deviation " + fmt(dev));
    ++argmin_checks;
  }

  while (dominance_checks < 30) {
    const auto [ds, bw] = make_instance(25, 2, dominance_checks % 3);
    try {
      const auto est = nd_solve(ds, Star::haj, bw, NdMode::pooled);
      const auto sys =
          build_nd_system(influence_terms(ds, Star::haj), bw);
      c.require(est.sigma2_hat <= sys.c + 1e-10,
                "dominance violated: " + fmt(est.sigma2_hat) + " > " +
                    fmt(sys.c));
      ++dominance_checks;
    } catch (const Error&) {
    }
  }

  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 2: quadratic/minimizer suite (identity rel dev "
            << fmt(max_quad_dev) << ", argmin dev " << fmt(max_argmin_dev)
            << ", " << dominance_checks << " dominance checks)\n";
  for (const auto& f : c.failures) std::cout << "  - " << f << "\n";
  return c.ok();
}

// ---------------------------------------------------------------- C3 --

bool criterion3() {
  Checker c;
  Rng rng(20250812);
  double max_dev = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 6 + (trial % 3);
    const Graph g = random_graph(n, 0.3, rng);
    std::vector<double> p(n);
    for (auto& v : p) v = 0.3 + 0.4 * rng.uniform();
    const Design design(p);
    const auto exposure = ExposureSpec::neighbor_count_threshold();
    const auto pi = propensity_exact(exposure, design, g);
    Eigen::MatrixXd x(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = 2.0 * rng.uniform() - 1.0;
    }
    const auto spec = AuxiliarySpec::exposure_interacted(exposure);
    const auto norm = phi0_exact(spec, exposure, design, g, x, {1, 0}, pi);

    // the closed form must hold for every realized assignment
    for_each_assignment(n, [&](const std::vector<std::uint8_t>& d) {
      const auto t = exposure_eval(exposure, d, g);
      const Eigen::MatrixXd realized = build_auxiliary(spec, x, d, g);
      for (std::uint32_t i = 0; i < n; ++i) {
        const double w = t[i] == 1 ? 1.0 / pi.prob(i, 1)
                                   : -1.0 / pi.prob(i, 0);
        const Eigen::RowVectorXd phi =
            realized.row(i) - w * norm.gamma.row(i);
        for (int k = 0; k < 2; ++k) {
          max_dev = std::max(
              max_dev, std::abs(phi[k] - pi.prob(i, 0) * x(i, k)));
          max_dev = std::max(
              max_dev, std::abs(phi[2 + k] - pi.prob(i, 1) * x(i, k)));
        }
      }
    });
  }
  c.require(max_dev < 1e-12,
            "closed-form deviation " + fmt(max_dev) + " exceeds 1e-12");
  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 3: phi0 closed form (max dev " << fmt(max_dev)
            << ")\n";
  for (const auto& f : c.failures) std::cout << "  - " << f << "\n";
  return c.ok();
}

// ------------------------------------------------------------ C4 / C5 --

void check_coverage(Checker& c, const Report& r,
                    const std::vector<std::string>& labels) {
  for (const auto& label : labels) {
    const auto& row = row_of(r, label);
    c.require(row.oracle_coverage >= 0.93 && row.oracle_coverage <= 0.97,
              label + " oracle coverage " + fmt(row.oracle_coverage) +
                  " outside [0.93, 0.97]");
    c.require(row.empirical_coverage >= 0.93 && row.empirical_coverage <= 0.97,
              label + " empirical coverage " + fmt(row.empirical_coverage) +
                  " outside [0.93, 0.97]");
  }
}

void check_bias(Checker& c, const Report& r,
                const std::vector<std::string>& labels) {
  for (const auto& label : labels) {
    const auto& row = row_of(r, label);
    const double se_mean =
        std::sqrt(row.oracle_se * row.oracle_se /
                      static_cast<double>(row.reps_used) +
                  r.tau_truth_se * r.tau_truth_se);
    c.require(row.bias <= 3.0 * se_mean,
              label + " bias " + fmt(row.bias) + " exceeds 3 MC SE " +
                  fmt(3.0 * se_mean));
  }
}

bool criterion4() {
  Checker c;
  const int threads = default_thread_count();
  const json j = load_scenario("linear_in_means.json");
  const Scenario s = scenario_from_json(j);
  const Report r = run_study(s, threads);

  // independently recomputed truth on the same fixture, fresh draw stream
  const StudyFixture fx = build_fixture(s, threads);
  const GroundTruth indep = ground_truth_tau(
      fx.generator, *fx.graph, fx.exposure, fx.design, fx.x, fx.eps,
      s.contrast, *fx.pi, s.truth_reps, derive_seed(s.seed, "truth_indep"),
      threads);
  const double tol =
      3.0 * std::sqrt(r.tau_truth_se * r.tau_truth_se +
                      indep.mc_se * indep.mc_se);
  c.require(std::abs(r.tau_truth - indep.tau) <= tol,
            "tau_truth " + fmt(r.tau_truth) + " vs independent " +
                fmt(indep.tau) + " differ beyond " + fmt(tol));

  const auto& haj = row_of(r, "Haj");
  const auto& ndf = row_of(r, "ND-F");
  const auto& ndp1 = row_of(r, "ND-phi0(G1)");
  c.require(haj.oracle_se >= ndf.oracle_se,
            "ordering Haj >= ND-F violated: " + fmt(haj.oracle_se) + " < " +
                fmt(ndf.oracle_se));
  c.require(ndf.oracle_se >= ndp1.oracle_se,
            "ordering ND-F >= ND-phi0(G1) violated: " + fmt(ndf.oracle_se) +
                " < " + fmt(ndp1.oracle_se));
  c.require(ndp1.oracle_se <= 0.95 * ndf.oracle_se,
            "ND-phi0(G1) " + fmt(ndp1.oracle_se) +
                " not at least 5% below ND-F " + fmt(ndf.oracle_se));

  const std::vector<std::string> consistent{
      "HT", "Haj", "F", "L", "F-phi0(G1)", "F-phi0(G2)",
      "ND-F", "ND-phi0(G1)", "ND-L", "ND-phi0(G2)"};
  check_coverage(c, r, consistent);
  check_bias(c, r, consistent);

  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 4: linear-in-means desk study (tau "
            << fmt(r.tau_truth) << ", Haj SE " << fmt(haj.oracle_se)
            << ", ND-F SE " << fmt(ndf.oracle_se) << ", ND-phi0(G1) SE "
            << fmt(ndp1.oracle_se) << ")\n";
  for (const auto& f : c.failures) std::cout << "  - " << f << "\n";

  if (std::getenv("NETEXP_FULL_SCALE") != nullptr) {
    const json jf = load_scenario("linear_in_means_full.json");
    const Report rf = run_study(scenario_from_json(jf), threads);
    const std::vector<std::pair<std::string, double>> cells{
        {"HT", 0.295},        {"Haj", 0.293},        {"F", 0.260},
        {"L", 0.260},         {"F-phi0(G1)", 0.235}, {"F-phi0(G2)", 0.233},
        {"ND-F", 0.260},      {"ND-phi0(G1)", 0.235},{"ND-L", 0.260},
        {"ND-phi0(G2)", 0.236}};
    bool full_ok = true;
    for (const auto& [label, target] : cells) {
      const auto& row = row_of(rf, label);
      const bool ok = std::abs(row.oracle_se - target) <= 0.1 * target;
      full_ok = full_ok && ok;
      std::cout << "  full-scale " << label << " oracle SE "
                << fmt(row.oracle_se) << " vs published " << fmt(target)
                << (ok ? " (within 10%)" : " (OUTSIDE 10%)") << "\n";
    }
    std::cout << (full_ok ? "PASS" : "FAIL")
              << " criterion 4 (full scale, optional)\n";
    if (!full_ok) c.failures.push_back("full-scale cells outside 10%");
  } else {
    std::cout << "  (full-scale reproduction skipped; set NETEXP_FULL_SCALE=1 "
                 "to run)\n";
  }
  return c.ok();
}

bool criterion5() {
  Checker c;
  const int threads = default_thread_count();
  const Report r =
      run_study(scenario_from_json(load_scenario("nonlinear_contagion.json")),
                threads);
  const auto& ht = row_of(r, "HT");
  const auto& haj = row_of(r, "Haj");
  const auto& ndf = row_of(r, "ND-F");
  const auto& ndp1 = row_of(r, "ND-phi0(G1)");
  c.require(haj.oracle_se >= ndf.oracle_se,
            "ordering Haj >= ND-F violated: " + fmt(haj.oracle_se) + " < " +
                fmt(ndf.oracle_se));
  c.require(ndf.oracle_se >= ndp1.oracle_se,
            "ordering ND-F >= ND-phi0(G1) violated: " + fmt(ndf.oracle_se) +
                " < " + fmt(ndp1.oracle_se));
  c.require(haj.oracle_se <= 0.8 * ht.oracle_se,
            "Haj SE " + fmt(haj.oracle_se) + " not 20% below HT SE " +
                fmt(ht.oracle_se));
  // criterion text: ordering and coverage checks (the bias clause is
  // criterion 4's)
  const std::vector<std::string> consistent{
      "HT", "Haj", "F", "L", "F-phi0(G1)", "F-phi0(G2)",
      "ND-F", "ND-phi0(G1)", "ND-L", "ND-phi0(G2)"};
  check_coverage(c, r, consistent);

  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 5: nonlinear contagion desk study (HT SE "
            << fmt(ht.oracle_se) << ", Haj SE " << fmt(haj.oracle_se)
            << ", ND-F SE " << fmt(ndf.oracle_se) << ", ND-phi0(G1) SE "
            << fmt(ndp1.oracle_se) << ")\n";
  for (const auto& f : c.failures) std::cout << "  - " << f << "\n";
  return c.ok();
}

// ---------------------------------------------------------------- C6 --

bool criterion6() {
  Checker c;
  const int threads = default_thread_count();
  const json j = load_scenario("counterexample.json");
  const Scenario s = scenario_from_json(j);
  const Report r = run_study(s, threads);

  const auto& haj = row_of(r, "Haj");
  const auto& f = row_of(r, "F");
  const auto& l = row_of(r, "L");
  const auto& ndf = row_of(r, "ND-F");
  c.require(f.oracle_se >= 1.05 * haj.oracle_se,
            "F SE " + fmt(f.oracle_se) + " not 5% above Haj " +
                fmt(haj.oracle_se));
  c.require(l.oracle_se >= 1.05 * haj.oracle_se,
            "L SE " + fmt(l.oracle_se) + " not 5% above Haj " +
                fmt(haj.oracle_se));
  c.require(std::abs(ndf.oracle_se - haj.oracle_se) <= 0.03 * haj.oracle_se,
            "ND-F SE " + fmt(ndf.oracle_se) + " not within 3% of Haj " +
                fmt(haj.oracle_se));

  // Closed-form asymptotic variances predict the oracle SEs within 5%.
  const StudyFixture fx = build_fixture(s, threads);
  const std::size_t n = fx.graph->size();
  const Eigen::VectorXd mu1 = fx.generator.generate(
      std::vector<std::uint8_t>(n, 1), fx.x, fx.eps);
  const Eigen::VectorXd mu0 = fx.generator.generate(
      std::vector<std::uint8_t>(n, 0), fx.x, fx.eps);
  Eigen::VectorXd pi1(n);
  for (std::uint32_t i = 0; i < n; ++i) pi1[i] = fx.pi->prob(i, 1);
  Eigen::MatrixXd x_centered = fx.x;
  x_centered.col(0).array() -= fx.x.col(0).mean();
  const SutvaVariances v =
      sutva_asymptotic_variances(x_centered, pi1, mu1, mu0);

  const auto predict = [&](double sigma2) {
    return std::sqrt(sigma2 / static_cast<double>(n));
  };
  const std::vector<std::pair<std::string, double>> preds{
      {"Haj", predict(v.sigma2_haj)},
      {"F", predict(v.sigma2_f)},
      {"L", predict(v.sigma2_l)}};
  for (const auto& [label, pred] : preds) {
    const auto& row = row_of(r, label);
    c.require(std::abs(pred - row.oracle_se) <= 0.05 * row.oracle_se,
              label + " predicted SE " + fmt(pred) + " vs oracle " +
                  fmt(row.oracle_se) + " off by more than 5%");
  }

  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 6: counterexample reproduction (tau "
            << fmt(r.tau_truth) << "; Haj " << fmt(haj.oracle_se) << ", F "
            << fmt(f.oracle_se) << ", L " << fmt(l.oracle_se) << ", ND-F "
            << fmt(ndf.oracle_se) << "; predicted Haj "
            << fmt(predict(v.sigma2_haj)) << ", F " << fmt(predict(v.sigma2_f))
            << ", L " << fmt(predict(v.sigma2_l)) << ")\n";
  for (const auto& f2 : c.failures) std::cout << "  - " << f2 << "\n";
  return c.ok();
}

// ---------------------------------------------------------------- C7 --

bool criterion7() {
  Checker c;
  json j = load_scenario("linear_in_means.json");
  j["graph"]["n"] = 400;
  j["reps"] = 200;
  j["truth_reps"] = 30000;
  j["phi0_reps"] = 20000;
  j["methods"] = {"HT", "Haj", "F", "ND-F", "ND-phi0(G1)", "ND-phi0(G2)"};
  const Scenario s = scenario_from_json(j);
  const std::string one = emit_report(run_study(s, 1), ReportFormat::json);
  const std::string two = emit_report(run_study(s, 2), ReportFormat::json);
  const std::string four = emit_report(run_study(s, 4), ReportFormat::json);
  c.require(one == two, "reports differ between --threads 1 and 2");
  c.require(one == four, "reports differ between --threads 1 and 4");
  std::cout << (c.ok() ? "PASS" : "FAIL")
            << " criterion 7: byte-identical reports across thread counts\n";
  for (const auto& f : c.failures) std::cout << "  - " << f << "\n";
  return c.ok();
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      which = std::atoi(argv[++i]);
    } else if (std::strcmp(argv[i], "--scenarios") == 0 && i + 1 < argc) {
      g_scenario_dir = argv[++i];
    }
  }
  bool all_ok = true;
  try {
    const auto run = [&](int k, bool (*fn)()) {
      if (which == 0 || which == k) all_ok = fn() && all_ok;
    };
    run(1, criterion1);
    run(2, criterion2);
    run(3, criterion3);
    run(4, criterion4);
    run(5, criterion5);
    run(6, criterion6);
    run(7, criterion7);
  } catch (const Error& e) {
    std::cout << "FAIL: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return all_ok ? 0 : 1;
}
