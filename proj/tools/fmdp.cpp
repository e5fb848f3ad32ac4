// Command-line driver: run experiments, render plots, audit results, plan and generate models.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fmdp/agents.hpp"
#include "fmdp/error.hpp"
#include "fmdp/harness.hpp"
#include "fmdp/planner.hpp"
#include "fmdp/serialize.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRunFailure = 3;
constexpr int kAuditFailure = 4;

std::string readFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fmdp::FormatError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure learning and optimistic planning for factored MDPs"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run agents on an environment and write results");
  std::string configPath, env, output;
  std::vector<std::string> agents;
  std::uint64_t horizon = 0;
  std::vector<std::uint64_t> seeds;
  double delta = 0.0, tolerance = 0.0;
  unsigned jobs = 0;
  std::size_t grid = 0;
  bool noSteps = false, plotAfter = false;
  run->add_option("--config", configPath, "JSON configuration; its keys override flags");
  run->add_option("--env", env, "environment spec, e.g. sysadmin:circular:n=4");
  run->add_option("--agents", agents, "agent specs, e.g. slf-ucrl:unpinned=2 ucrl2");
  run->add_option("-T,--horizon", horizon, "steps per run");
  run->add_option("--seeds", seeds, "seeds");
  run->add_option("--delta", delta, "confidence parameter");
  run->add_option("-o,--output", output, "results directory");
  run->add_option("-j,--jobs", jobs, "runs in parallel");
  run->add_option("--grid", grid, "points on the aggregate time grid");
  run->add_option("--evi-tolerance", tolerance, "span tolerance of value iteration");
  run->add_flag("--no-steps", noSteps, "skip the per-step logs");
  run->add_flag("--plot", plotAfter, "render plots afterwards");

  auto* plot = app.add_subcommand("plot", "render regret.svg and scopes.svg from a results directory");
  std::string plotDir;
  plot->add_option("dir", plotDir, "results directory")->required();

  auto* audit = app.add_subcommand("audit", "re-check the invariants recorded in a results directory");
  std::string auditDir;
  audit->add_option("dir", auditDir, "results directory")->required();

  auto* plan = app.add_subcommand("plan", "solve the true model of an environment by value iteration");
  std::string planEnv, planModel;
  double planTol = 1e-6;
  plan->add_option("--env", planEnv, "environment spec");
  plan->add_option("--model", planModel, "model JSON file");
  plan->add_option("--tolerance", planTol, "span tolerance");

  auto* gen = app.add_subcommand("gen", "write an environment's model as JSON");
  std::string genEnv, genOut;
  gen->add_option("--env", genEnv, "environment spec")->required();
  gen->add_option("-o,--output", genOut, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (run->parsed()) {
    fmdp::RunConfig config;
    try {
      if (!env.empty()) config.environment = env;
      if (!agents.empty()) config.agents = agents;
      if (horizon) config.horizon = horizon;
      if (!seeds.empty()) config.seeds = seeds;
      if (delta > 0) config.delta = delta;
      if (!output.empty()) config.output = output;
      if (jobs) config.parallelism = jobs;
      if (grid) config.gridPoints = grid;
      if (tolerance > 0) config.eviTolerance = tolerance;
      if (noSteps) config.writeSteps = false;
      // a configuration file wins over flags
      if (!configPath.empty()) config = fmdp::configFromJson(readFile(configPath), config);
      // validate before any run starts
      fmdp::parseEnvironment(config.environment);
      for (const auto& a : config.agents) fmdp::parseAgent(a);
    } catch (const fmdp::Error& e) {
      std::cerr << "configuration error: " << e.what() << '\n';
      return kConfigError;
    }
    try {
      const auto result = fmdp::runExperiment(config);
      bool failed = false;
      for (const auto& r : result.runs) {
        std::cout << r.label << " seed " << r.seed << ": ";
        if (r.ok)
          std::cout << r.episodes << " episodes, regret " << r.finalRegret << ", " << r.wallSeconds << " s\n";
        else
          std::cout << "failed: " << r.error << '\n';
        failed = failed || !r.ok;
      }
      std::cout << "optimal gain " << result.lambdaStar << ", results in " << config.output.string() << '\n';
      if (plotAfter) fmdp::renderPlots(config.output);
      return failed ? kRunFailure : 0;
    } catch (const fmdp::DomainError& e) {
      std::cerr << "configuration error: " << e.what() << '\n';
      return kConfigError;
    } catch (const std::exception& e) {
      std::cerr << "run failed: " << e.what() << '\n';
      return kRunFailure;
    }
  }

  if (plot->parsed()) {
    try {
      fmdp::renderPlots(plotDir);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "plot failed: " << e.what() << '\n';
      return kConfigError;
    }
  }

  if (audit->parsed()) {
    try {
      const auto report = fmdp::auditRun(auditDir);
      std::cout << report.text();
      return report.passed() ? 0 : kAuditFailure;
    } catch (const std::exception& e) {
      std::cerr << "audit failed: " << e.what() << '\n';
      return kAuditFailure;
    }
  }

  if (plan->parsed()) {
    try {
      if (planEnv.empty() == planModel.empty()) throw fmdp::DomainError("give exactly one of --env and --model");
      const fmdp::Fmdp model = planModel.empty() ? fmdp::parseEnvironment(planEnv).model : fmdp::loadModelFile(planModel);
      const auto mdp = fmdp::flatten(model);
      fmdp::EviOptions opt;
      opt.tolerance = planTol;
      const auto res = fmdp::eviSolve(fmdp::TabularView(mdp), opt);
      std::cout << "states " << mdp.stateCount() << ", actions " << mdp.actionCount() << '\n'
                << "gain " << res.gain << '\n'
                << "iterations " << res.iterations << (res.damped ? " (damped)" : "") << '\n'
                << "bias span " << res.biasSpan << '\n';
      return 0;
    } catch (const fmdp::Error& e) {
      std::cerr << "plan failed: " << e.what() << '\n';
      return kRunFailure;
    }
  }

  if (gen->parsed()) {
    try {
      fmdp::saveModelFile(fmdp::parseEnvironment(genEnv).model, genOut);
      return 0;
    } catch (const fmdp::Error& e) {
      std::cerr << "gen failed: " << e.what() << '\n';
      return kConfigError;
    }
  }
  return 0;
}
