// Command-line front end: spectral flow and index evaluation for scenario
// files, verification campaigns, and branch trace export.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "specflow/harness.hpp"

namespace {

specflow::Scenario load_scenario(const std::string& ref, std::uint64_t seed) {
  // builtin name first, then a file path
  for (auto& s : specflow::builtin_scenarios(seed))
    if (s.id == ref) return s;
  std::ifstream in(ref);
  if (!in) throw specflow::Error("no builtin scenario or readable file named '" + ref + "'");
  nlohmann::json j;
  in >> j;
  return specflow::Scenario::from_json(j);
}

int verdict_exit_code(specflow::Verdict v) {
  switch (v) {
    case specflow::Verdict::Pass:
      return 0;
    case specflow::Verdict::Fail:
      return 1;
    case specflow::Verdict::Unresolved:
      return 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral flow / boundary-value index toolkit"};
  app.require_subcommand(1);

  std::string scenario_ref;
  std::string out_path;
  std::string csv_path;
  std::string suite = "full";
  std::uint64_t seed = 0;
  int threads = 0;
  int grid = 200;

  auto* flow = app.add_subcommand("flow", "spectral flow of a scenario path");
  flow->add_option("scenario", scenario_ref, "scenario file or builtin name")->required();

  std::string sv_csv;
  auto* index = app.add_subcommand("index", "numeric index report for a scenario path");
  index->add_option("scenario", scenario_ref, "scenario file or builtin name")->required();
  index->add_option("--sv-csv", sv_csv, "dump the singular-value tail for audit");

  auto* laws = app.add_subcommand("laws", "list the identities the checks verify");

  auto* verify = app.add_subcommand("verify", "run a verification campaign");
  verify->add_option("--suite", suite, "axioms or full")
      ->check(CLI::IsMember({"axioms", "full"}));
  verify->add_option("--seed", seed, "campaign seed");
  verify->add_option("--out", out_path, "write the JSON report here");
  verify->add_option("--threads", threads, "worker pool size (default: SPECFLOW_THREADS)");

  auto* trace = app.add_subcommand("trace", "export eigenvalue branch trace as CSV");
  trace->add_option("scenario", scenario_ref, "scenario file or builtin name")->required();
  trace->add_option("--csv", csv_path, "output CSV path")->required();
  trace->add_option("--grid", grid, "number of trace samples");

  CLI11_PARSE(app, argc, argv);

  try {
    if (flow->parsed()) {
      const specflow::Scenario s = load_scenario(scenario_ref, seed);
      const specflow::OperatorPath path = s.path.build(s.growth);
      std::cout << "spectral_flow " << specflow::spectral_flow(path) << "\n";
      return 0;
    }

    if (index->parsed()) {
      const specflow::Scenario s = load_scenario(scenario_ref, seed);
      const specflow::OperatorPath path = s.path.build(s.growth);
      const specflow::IndexReport rep = specflow::resolve_index(path, s.grid_n, s.tol);
      std::cout << rep.to_json().dump(2) << "\n";
      if (!sv_csv.empty()) {
        const auto sv = specflow::assemble_augmented(path, rep.grid_n).singular_values();
        std::ofstream out(sv_csv);
        if (!out) throw specflow::Error("cannot open '" + sv_csv + "'");
        out << "k,sigma\n";
        out.precision(17);
        for (std::size_t k = 0; k < sv.size(); ++k) out << k << ',' << sv[k] << '\n';
      }
      return rep.resolved() ? 0 : 2;
    }

    if (laws->parsed()) {
      for (const auto& l : specflow::law_table())
        std::printf("%-40s %-16s %s\n", l.law, l.check, l.statement);
      return 0;
    }

    if (verify->parsed()) {
      const specflow::CampaignReport report =
          suite == "axioms" ? specflow::run_axiom_suite(seed, threads)
                            : specflow::run_full_suite(seed, threads);
      for (const auto& sc : report.scenarios)
        for (const auto& r : sc.results)
          std::cout << "[" << specflow::verdict_name(r.verdict) << "] " << sc.id << "/"
                    << r.check << " (" << r.law << ")\n";
      std::cout << "suite=" << report.suite << " pass=" << report.count(specflow::Verdict::Pass)
                << " fail=" << report.count(specflow::Verdict::Fail)
                << " unresolved=" << report.count(specflow::Verdict::Unresolved) << "\n";
      if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw specflow::Error("cannot open '" + out_path + "'");
        out << report.to_json(true).dump(2) << "\n";
      }
      return verdict_exit_code(report.verdict());
    }

    if (trace->parsed()) {
      const specflow::Scenario s = load_scenario(scenario_ref, seed);
      const specflow::OperatorPath path = s.path.build(s.growth);
      specflow::emit_trace(path, grid, csv_path);
      std::cout << "wrote " << csv_path << "\n";
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
