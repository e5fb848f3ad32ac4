#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmdp/error.hpp"
#include "fmdp/harness.hpp"

using namespace fmdp;
namespace fs = std::filesystem;

namespace {

fs::path freshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fmdp-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lineCount(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

RunConfig smallConfig(const fs::path& out) {
  RunConfig c;
  c.environment = "sysadmin:circular:n=3";
  c.agents = {"slf-ucrl:unpinned=2", "factored-ucrl"};
  c.horizon = 400;
  c.seeds = {1, 2};
  c.output = out;
  c.gridPoints = 10;
  return c;
}

}  // namespace

TEST_CASE("environment specs") {
  const auto e = parseEnvironment("sysadmin:star:n=5");
  CHECK(e.model.stateFactorCount() == 5);
  CHECK(e.m == 3);
  CHECK(parseEnvironment("lowerbound:d=2").model.stateFactorCount() == 6);
  CHECK(parseEnvironment("random:seed=3,d=3,m=2").m == 2);
  CHECK_THROWS_AS(parseEnvironment("sysadmin:ring"), DomainError);
  CHECK_THROWS_AS(parseEnvironment("sysadmin:circular:servers=4"), DomainError);
  CHECK_THROWS_AS(parseEnvironment("sysadmin:circular:n=x"), DomainError);
  CHECK_THROWS_AS(parseEnvironment("gridworld"), DomainError);
  CHECK_THROWS_AS(parseEnvironment(""), DomainError);
}

TEST_CASE("agent specs") {
  auto a = parseAgent("slf-ucrl:unpinned=2,radius=0.5,rewards=learned");
  CHECK(a.label == "slf-ucrl2");
  CHECK(a.unpinned == 2);
  CHECK(a.config.radiusScale == 0.5);
  CHECK_FALSE(a.rewardsKnown);
  CHECK(parseAgent("ucrl2").label == "ucrl2");
  CHECK(parseAgent("slf-ucrl:label=mine").label == "mine");
  CHECK_THROWS_AS(parseAgent("slf-ucrl:rewards=maybe"), DomainError);
  CHECK_THROWS_AS(parseAgent("slf-ucrl:speed=1"), DomainError);
  CHECK_THROWS_AS(parseAgent("q-learning"), DomainError);

  const auto env = parseEnvironment("sysadmin:circular:n=4");
  const auto c = resolveAgent(parseAgent("slf-ucrl:unpinned=1"), env, 0.05, 1e-3);
  CHECK(c.m == 3);
  CHECK(c.delta == 0.05);
  CHECK_FALSE(c.transitionPins[0].has_value());
  for (std::size_t i = 1; i < 4; ++i) CHECK(*c.transitionPins[i] == env.model.transition(i).scope);
  CHECK_THROWS_AS(resolveAgent(parseAgent("slf-ucrl:unpinned=9"), env, 0.05, 1e-3), DomainError);
}

TEST_CASE("configuration JSON") {
  RunConfig c = smallConfig("out");
  c.delta = 0.02;
  const auto back = configFromJson(configJson(c));
  CHECK(configJson(back) == configJson(c));
  CHECK(configHash(back) == configHash(c));
  RunConfig moved = c;
  moved.output = "elsewhere";
  moved.parallelism = 4;
  CHECK(configHash(moved) == configHash(c));
  moved.horizon = 401;
  CHECK(configHash(moved) != configHash(c));
  CHECK_THROWS_AS(configFromJson(R"({"horizn": 5})"), FormatError);
  CHECK_THROWS_AS(configFromJson("[1,2]"), FormatError);
  CHECK_THROWS_AS(configFromJson("{"), FormatError);
}

TEST_CASE("experiment validation") {
  RunConfig c = smallConfig(freshDir("invalid"));
  c.seeds = {1, 1};
  CHECK_THROWS_AS(runExperiment(c), DomainError);
  c = smallConfig(freshDir("invalid"));
  c.horizon = 0;
  CHECK_THROWS_AS(runExperiment(c), DomainError);
  c = smallConfig(freshDir("invalid"));
  c.agents = {"ucrl2", "ucrl2"};
  CHECK_THROWS_AS(runExperiment(c), DomainError);
}

TEST_CASE("a ten-step run writes every file") {
  RunConfig c = smallConfig(freshDir("tiny"));
  c.horizon = 10;
  c.seeds = {5};
  const auto res = runExperiment(c);
  CHECK(res.runs.size() == 2);
  for (const auto& r : res.runs) CHECK(r.ok);
  const fs::path run = c.output / "runs" / "slf-ucrl2" / "seed-5";
  CHECK(lineCount(run / "steps.csv") == 11);
  CHECK(fs::exists(run / "episodes.csv"));
  CHECK(fs::exists(c.output / "manifest.json"));
  // one seed: every standard error is zero
  std::ifstream in(c.output / "aggregate_regret.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "label,t,mean,stderr,runs");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto a = line.rfind(','), b = line.rfind(',', a - 1);
    CHECK(std::stod(line.substr(b + 1, a - b - 1)) == 0.0);
  }
  CHECK(rows > 0);
  CHECK(auditRun(c.output).passed());
}

TEST_CASE("runs are reproducible and independent of parallelism") {
  RunConfig a = smallConfig(freshDir("serial"));
  RunConfig b = smallConfig(freshDir("parallel"));
  b.parallelism = 2;
  const auto ra = runExperiment(a), rb = runExperiment(b);
  CHECK(ra.lambdaStar == rb.lambdaStar);
  for (const char* f : {"aggregate_regret.csv", "aggregate_scopes.csv"})
    CHECK(slurp(a.output / f) == slurp(b.output / f));
  for (const auto* label : {"slf-ucrl2", "factored-ucrl"})
    for (const auto* seed : {"seed-1", "seed-2"}) {
      const fs::path rel = fs::path("runs") / label / seed;
      CHECK(slurp(a.output / rel / "steps.csv") == slurp(b.output / rel / "steps.csv"));
      CHECK(slurp(a.output / rel / "episodes.csv") == slurp(b.output / rel / "episodes.csv"));
    }
  const auto again = runExperiment(a);
  CHECK(slurp(a.output / "aggregate_regret.csv").size() > 0);
  for (std::size_t i = 0; i < again.runs.size(); ++i) CHECK(again.runs[i].finalRegret == ra.runs[i].finalRegret);
}

TEST_CASE("audit re-checks the written files") {
  RunConfig c = smallConfig(freshDir("audit"));
  runExperiment(c);
  const auto ok = auditRun(c.output);
  CHECK(ok.passed());
  CHECK(ok.runs.size() == 4);
  for (const auto& r : ok.runs) CHECK(r.trueScopesSurvive);
  CHECK(ok.text().find("audit passed") != std::string::npos);

  // a tampered reward breaks the regret recomputation
  const fs::path steps = c.output / "runs" / "factored-ucrl" / "seed-1" / "steps.csv";
  std::string text = slurp(steps);
  const auto firstRow = text.find('\n') + 1;
  const auto rewardStart = text.find(',', text.find(',', text.find(',', firstRow) + 1) + 1) + 1;
  text.replace(rewardStart, text.find(',', rewardStart) - rewardStart, "7");
  std::ofstream(steps) << text;
  CHECK_FALSE(auditRun(c.output).passed());
  CHECK_THROWS_AS(auditRun(freshDir("missing")), FormatError);
}

TEST_CASE("plots") {
  RunConfig c = smallConfig(freshDir("plots"));
  runExperiment(c);
  renderPlots(c.output);
  const auto svg = slurp(c.output / "regret.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("SLF-UCRL2") != std::string::npos);
  CHECK(svg.find("cumulative regret") != std::string::npos);
  CHECK(slurp(c.output / "scopes.svg").find("#wrong scopes") != std::string::npos);

  const fs::path empty = freshDir("plots-empty");
  fs::create_directories(empty);
  std::ofstream(empty / "aggregate_regret.csv") << "label,t,mean,stderr,runs\n";
  std::ofstream(empty / "aggregate_scopes.csv") << "label,t,mean,stderr,runs\n";
  CHECK_THROWS_AS(renderPlots(empty), FormatError);
  CHECK_FALSE(fs::exists(empty / "regret.svg"));

  const fs::path broken = freshDir("plots-broken");
  fs::create_directories(broken);
  std::ofstream(broken / "aggregate_regret.csv") << "label,t,stderr,runs\nx,1,0,1\n";
  std::ofstream(broken / "aggregate_scopes.csv") << "label,t,mean,stderr,runs\n";
  CHECK_THROWS_AS(renderPlots(broken), FormatError);
  CHECK_FALSE(fs::exists(broken / "regret.svg"));
  CHECK_FALSE(fs::exists(broken / "scopes.svg"));
}

TEST_CASE("a run with a shrunken radius reports what it lost") {
  RunConfig c = smallConfig(freshDir("shrunk"));
  c.agents = {"slf-ucrl:radius=0.01,rewards=learned"};
  c.horizon = 3000;
  c.seeds = {1, 2, 3};
  const auto res = runExperiment(c);
  bool reported = false;
  for (const auto& r : res.runs) reported |= !r.ok && !r.error.empty();
  for (const auto& r : auditRun(c.output).runs) reported |= r.survivalViolations > 0 || !r.concentrationHeld;
  CHECK(reported);
}

#ifdef FMDP_CLI
TEST_CASE("command-line exit codes") {
  const std::string cli = FMDP_CLI;
  const fs::path out = freshDir("cli");
  const auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status(cli + " run --env sysadmin:circular:n=3 --agents slf-ucrl ucrl2 -T 200 --seeds 1 2 -o " +
               out.string() + " --plot") == 0);
  CHECK(fs::exists(out / "regret.svg"));
  CHECK(status(cli + " audit " + out.string()) == 0);
  CHECK(status(cli + " run --env nowhere -T 10 -o " + out.string()) == 2);
  CHECK(status(cli + " run --env sysadmin:circular:n=3 -T 10 --seeds 1 1 -o " + out.string()) == 2);
  CHECK(status(cli + " audit " + freshDir("cli-missing").string()) != 0);
  CHECK(status(cli + " plan --env sysadmin:circular:n=3") == 0);

  const fs::path cfgOut = freshDir("cli-config");
  fs::create_directories(cfgOut);
  std::ofstream(cfgOut / "config.json") << R"({"horizon": 5, "seeds": [3]})";
  CHECK(status(cli + " run --config " + (cfgOut / "config.json").string() +
               " --env sysadmin:circular:n=3 --agents ucrl2 -T 50 --seeds 1 -o " + cfgOut.string()) == 0);
  CHECK(lineCount(cfgOut / "runs" / "ucrl2" / "seed-3" / "steps.csv") == 6);
}
#endif
