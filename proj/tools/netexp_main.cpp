// Command-line front end: simulate / estimate / propensity / diagnose.
// All computation lives in the netexp library; this file only parses
// arguments, reads and writes files, and maps errors to exit codes
// (2 validation, 3 numerical, 4 I/O).

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "netexp/error.hpp"
#include "netexp/parallel.hpp"
#include "netexp/pipeline.hpp"
#include "netexp/sim.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) netexp::throw_io("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    netexp::throw_validation(path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) netexp::throw_io("cannot write '" + path + "'");
  out << text;
}

netexp::ReportFormat parse_format(const std::string& f) {
  if (f == "table") return netexp::ReportFormat::table;
  if (f == "csv") return netexp::ReportFormat::csv;
  if (f == "json") return netexp::ReportFormat::json;
  netexp::throw_validation("format must be table, csv or json");
}

int exit_code_for(netexp::ErrorKind kind) {
  switch (kind) {
    case netexp::ErrorKind::validation:
      return 2;
    case netexp::ErrorKind::numerical:
      return 3;
    case netexp::ErrorKind::io:
      return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design-based estimation for network experiments"};
  app.require_subcommand(1);

  int threads = netexp::default_thread_count();
  app.add_option("--threads", threads,
                 "worker thread count (never changes results)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scenario study");
  std::string sim_scenario, sim_out, sim_format = "table";
  std::uint64_t sim_seed = 0;
  std::size_t sim_reps = 0;
  bool sim_seed_set = false, sim_reps_set = false;
  sim->add_option("scenario", sim_scenario, "scenario JSON path")->required();
  sim->add_option("--out", sim_out, "output path (default stdout)");
  sim->add_option("--format", sim_format, "table|csv|json");
  sim->add_option("--seed", sim_seed, "override scenario seed")
      ->each([&](const std::string&) { sim_seed_set = true; });
  sim->add_option("--reps", sim_reps, "override scenario reps")
      ->each([&](const std::string&) { sim_reps_set = true; });

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate from a realized dataset");
  std::string est_edges, est_nodes, est_config, est_out;
  std::uint64_t est_seed = 0;
  bool est_seed_set = false;
  est->add_option("--edges", est_edges, "edge CSV (src,dst)")->required();
  est->add_option("--nodes", est_nodes, "node CSV")->required();
  est->add_option("--config", est_config, "estimation config JSON")->required();
  est->add_option("--out", est_out, "output path (default stdout)");
  est->add_option("--seed", est_seed, "override config seed")
      ->each([&](const std::string&) { est_seed_set = true; });

  // propensity
  auto* prop = app.add_subcommand("propensity", "per-unit exposure propensities");
  std::string prop_edges, prop_nodes, prop_config, prop_out,
      prop_format = "csv";
  std::uint64_t prop_seed = 0;
  bool prop_seed_set = false;
  prop->add_option("--edges", prop_edges, "edge CSV")->required();
  prop->add_option("--nodes", prop_nodes, "node CSV (optional)");
  prop->add_option("--config", prop_config, "propensity config JSON")
      ->required();
  prop->add_option("--out", prop_out, "output path (default stdout)");
  prop->add_option("--format", prop_format, "csv|json");
  prop->add_option("--seed", prop_seed, "override config seed")
      ->each([&](const std::string&) { prop_seed_set = true; });

  // diagnose
  auto* diag = app.add_subcommand("diagnose",
                                  "overlap and neighborhood diagnostics");
  std::string diag_edges, diag_nodes, diag_config, diag_out;
  diag->add_option("--edges", diag_edges, "edge CSV")->required();
  diag->add_option("--nodes", diag_nodes, "node CSV (optional)");
  diag->add_option("--config", diag_config, "diagnostics config JSON");
  diag->add_option("--out", diag_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      json j = read_json_file(sim_scenario);
      if (sim_seed_set) j["seed"] = sim_seed;
      if (sim_reps_set) j["reps"] = sim_reps;
      const netexp::Scenario scenario = netexp::scenario_from_json(j);
      const netexp::Report report = netexp::run_study(scenario, threads);
      write_text(sim_out, netexp::emit_report(report, parse_format(sim_format)));
    } else if (*est) {
      json cfg = read_json_file(est_config);
      if (est_seed_set) cfg["seed"] = est_seed;
      const json out = netexp::run_estimate(est_edges, est_nodes, cfg, threads);
      write_text(est_out, out.dump(2) + "\n");
    } else if (*prop) {
      json cfg = read_json_file(prop_config);
      if (prop_seed_set) cfg["seed"] = prop_seed;
      const json table = netexp::run_propensity(prop_edges, prop_nodes, cfg);
      if (prop_format == "json") {
        write_text(prop_out, table.dump(2) + "\n");
      } else {
        write_text(prop_out, netexp::propensity_to_csv(table));
      }
    } else if (*diag) {
      const json cfg =
          diag_config.empty() ? json::object() : read_json_file(diag_config);
      const json out = netexp::run_diagnose(diag_edges, diag_nodes, cfg);
      write_text(diag_out, out.dump(2) + "\n");
    }
  } catch (const netexp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
