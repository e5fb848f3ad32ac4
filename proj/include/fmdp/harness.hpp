#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fmdp/agents.hpp"
#include "fmdp/model.hpp"

namespace fmdp {

/// A benchmark model resolved from a spec string such as "sysadmin:circular:n=4".
struct Environment {
  std::string spec;
  Fmdp model;
  Index initialState = 0;
  /// Scope size bound used by agents unless they override it.
  std::size_t m = 1;
};

/// Grammar: sysadmin:(circular|star)[:n=N,fail=..,boost=..,reboot=..,recover=..]
///        | lowerbound[:d=..,w=..,m=..,a=..,gap=..,seed=..]
///        | random[:seed=..,d=..,n=..,m=..,w=..,l=..,conc=..,nfa=0|1,a=..]
/// Throws DomainError on malformed specs.
Environment parseEnvironment(const std::string& spec);

/// One compared agent. `label` names its output directory and plot series.
struct AgentSpec {
  std::string label;
  AgentConfig config;
  /// Number of transition factors whose scope is learned (the rest are pinned); -1 = all.
  int unpinned = -1;
  bool rewardsKnown = true;
};

/// Grammar: algorithm[:key=value,...] with keys unpinned, m, radius, elim, rewards=known|learned,
/// greedy=0|1. The label defaults to the algorithm name, with the unpinned count appended.
AgentSpec parseAgent(const std::string& spec);

struct RunConfig {
  std::string environment = "sysadmin:circular:n=4";
  std::vector<std::string> agents{"slf-ucrl", "factored-ucrl", "ucrl2"};
  std::uint64_t horizon = 30000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double delta = 0.01;
  std::filesystem::path output = "results";
  unsigned parallelism = 1;
  std::size_t gridPoints = 100;
  bool writeSteps = true;
  double eviTolerance = 1e-4;
};

std::string configJson(const RunConfig& config);
RunConfig configFromJson(const std::string& text, RunConfig base = {});
/// FNV-1a over the canonical JSON form.
std::string configHash(const RunConfig& config);

struct RunSummary {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double wallSeconds = 0.0;
  std::size_t episodes = 0;
  double finalRegret = 0.0;
  Index trackedCells = 0;
};

struct ExperimentResult {
  double lambdaStar = 0.0;
  std::vector<RunSummary> runs;
  std::vector<std::uint64_t> grid;
  /// Per agent label, the run results in seed order (kept in memory for callers and tests).
  std::vector<std::pair<std::string, std::vector<RunResult>>> results;
};

/// Resolves the agent specs against an environment: pins, m and tolerance.
AgentConfig resolveAgent(const AgentSpec& spec, const Environment& env, double delta, double eviTolerance);

/// Runs every (agent, seed), writes per-run CSVs, aggregate CSVs and the manifest into
/// config.output. A failing run is recorded in the manifest and does not stop the others.
ExperimentResult runExperiment(const RunConfig& config);

/// Cumulative regret lambda*·t - sum of rewards at every t.
std::vector<double> cumulativeRegret(const RunResult& run, double lambdaStar);

/// Writes regret.svg and scopes.svg from the aggregate CSVs; throws FormatError if they are
/// missing or malformed, leaving no partial output.
void renderPlots(const std::filesystem::path& dir);

struct RunAudit {
  std::string label;
  std::uint64_t seed = 0;
  bool episodeBound = true;
  bool countersConsistent = true;
  bool setsMonotone = true;
  bool regretRecomputes = true;
  bool concentrationHeld = true;     ///< no episode saw a violated confidence event
  bool optimismOnConcentration = true;
  bool trueScopesSurvive = true;     ///< true scopes never eliminated while concentration held
  std::size_t survivalViolations = 0;  ///< episodes that lost a true scope, any event
  std::string note;

  bool passed() const {
    return episodeBound && countersConsistent && setsMonotone && regretRecomputes && optimismOnConcentration &&
           trueScopesSurvive;
  }
};

struct AuditReport {
  std::vector<RunAudit> runs;
  std::size_t concentrationViolations = 0;

  bool passed() const;
  std::string text() const;
};

/// Re-reads a results directory and re-checks every bookkeeping and audit invariant.
AuditReport auditRun(const std::filesystem::path& dir);

/// Writes `contents` to `path` through a temporary file and a rename.
void writeAtomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace fmdp
