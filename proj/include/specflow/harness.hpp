#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specflow/discretize.hpp"
#include "specflow/rng.hpp"

#include <nlohmann/json.hpp>

namespace specflow {

inline constexpr const char* kScenarioSchema = "specflow/scenario-v1";
inline constexpr const char* kReportSchema = "specflow/report-v1";

/// Declarative path description as it appears in scenario files.
struct PathSpec {
  std::string kind = "finite";    // finite | forward | backward | line
  double horizon = 1.0;           // T for finite, tail radius otherwise
  std::string family = "keyframes";  // keyframes | arctan | affine | custom-poly
  std::vector<double> times;                // keyframes only
  std::vector<std::vector<double>> matrices;  // row-major blocks
  // Optional equivalent level-0 metric (row-major SPD matrix). When present
  // the matrices are read as symmetric with respect to it and conjugated into
  // orthonormal coordinates, which realizes symmetrizable operator families.
  std::vector<double> metric;

  static PathSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  OperatorPath build(const GrowthFunction& gf) const;
};

enum class Check {
  IndexTheorem,
  Axioms,
  Concatenation,
  Adjoint,
  ShiftLemma,
  Homotopy,
  Cokernel,
  TraceBounds,
  Neumann,
  ConstantSolver,
};

std::string check_name(Check c);
Check check_from_name(const std::string& name);

struct Scenario {
  std::string id;
  GrowthFunction growth = GrowthFunction::poly(6, 1.0);
  PathSpec path;
  int grid_n = 200;
  double tol = kDefaultRankTol;
  std::vector<Check> checks;
  std::uint64_t seed = 0;

  static Scenario from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class Verdict { Pass, Fail, Unresolved };
std::string verdict_name(Verdict v);

struct CheckResult {
  std::string check;
  std::string law;  // named identity the expectation comes from (see README table)
  Verdict verdict = Verdict::Pass;
  nlohmann::ordered_json measured;
  nlohmann::ordered_json expected;
  double wall_ms = 0.0;
};

struct ScenarioReport {
  std::string id;
  Verdict verdict = Verdict::Pass;
  std::vector<CheckResult> results;
  nlohmann::ordered_json replay;  // scenario inputs, attached when not passing
  double wall_ms = 0.0;

  nlohmann::ordered_json to_json(bool include_timing = true) const;
};

struct CampaignReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<ScenarioReport> scenarios;
  double wall_ms = 0.0;

  Verdict verdict() const;
  int count(Verdict v) const;
  nlohmann::ordered_json to_json(bool include_timing = true) const;
};

/// Executes the requested checks of one scenario. Randomness is derived from
/// the scenario seed alone so replays are bit-identical.
ScenarioReport run_scenario(const Scenario& s);

/// Runs scenarios in a worker pool (scenario order in the report is by id).
/// threads <= 0 reads SPECFLOW_THREADS, falling back to the hardware count.
CampaignReport run_campaign(std::vector<Scenario> scenarios, const std::string& suite,
                            std::uint64_t seed, int threads = 0);

/// The five defining properties of the spectral flow on generated families.
CampaignReport run_axiom_suite(std::uint64_t seed, int threads = 0);

/// Built-in scenarios plus fuzz paths plus the axiom suite.
CampaignReport run_full_suite(std::uint64_t seed, int threads = 0);

/// Named built-in scenarios ("normalization", "constant-floer", ...).
std::vector<Scenario> builtin_scenarios(std::uint64_t seed);

/// Seeded random keyframe path of the fuzzing family: 2 to 5 keyframes with
/// entries uniform in [-2, 2]; endpoint frames are redrawn until their
/// invertibility margin exceeds 0.1.
PathSpec random_keyframe_spec(Rng& rng, int dim, double horizon,
                              const std::string& kind = "finite");

/// Branch trace as CSV (time, branch_label, value) plus a crossings sidecar
/// file (time, direction) next to it.
void emit_trace(const OperatorPath& path, int grid_points, const std::string& csv_path);

int thread_count_from_env();

/// Identity behind a check verdict. Every law cited in a report appears in
/// this table; the CLI prints it under `specflow laws`.
struct LawInfo {
  const char* law;
  const char* check;
  const char* statement;
};

const std::vector<LawInfo>& law_table();

}  // namespace specflow
