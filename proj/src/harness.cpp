#include "fmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fmdp/environments.hpp"
#include "fmdp/error.hpp"

namespace fmdp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kArtifactVersion = "1.0.0";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::map<std::string, std::string> parseParams(const std::string& text, const std::set<std::string>& allowed,
                                               const std::string& context) {
  std::map<std::string, std::string> out;
  if (text.empty()) return out;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw DomainError("expected key=value in '" + context + "'");
    const std::string key = item.substr(0, eq);
    if (!allowed.count(key)) throw DomainError("unknown key '" + key + "' in '" + context + "'");
    out[key] = item.substr(eq + 1);
  }
  return out;
}

double toDouble(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw DomainError("value of '" + key + "' is not a number: " + v);
  }
}

std::uint64_t toUnsigned(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw DomainError("value of '" + key + "' is not a non-negative integer: " + v);
  }
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const fs::path& file) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError(file.string() + " lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Csv readCsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + " is empty");
  csv.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line, ',');
    if (row.size() != csv.header.size()) throw FormatError(path.string() + " has a ragged row");
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

}  // namespace

void writeAtomically(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Specs

Environment parseEnvironment(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.empty()) throw DomainError("empty environment spec");
  Environment env;
  env.spec = spec;
  const std::string& kind = parts[0];
  if (kind == "sysadmin") {
    if (parts.size() < 2 || parts.size() > 3) throw DomainError("expected sysadmin:<topology>[:params]");
    SysAdminConfig c;
    if (parts[1] == "circular")
      c.topology = Topology::Circular;
    else if (parts[1] == "star")
      c.topology = Topology::Star;
    else
      throw DomainError("unknown SysAdmin topology '" + parts[1] + "'");
    const auto p = parseParams(parts.size() == 3 ? parts[2] : "", {"n", "fail", "boost", "reboot", "recover"}, spec);
    if (p.count("n")) c.servers = toUnsigned(p.at("n"), "n");
    if (p.count("fail")) c.failBase = toDouble(p.at("fail"), "fail");
    if (p.count("boost")) c.failNeighborBoost = toDouble(p.at("boost"), "boost");
    if (p.count("reboot")) c.rebootSuccess = toDouble(p.at("reboot"), "reboot");
    if (p.count("recover")) c.spontaneousRecovery = toDouble(p.at("recover"), "recover");
    env.model = buildSysAdmin(c);
    env.initialState = sysAdminAllWorking(env.model);
    env.m = 3;
  } else if (kind == "lowerbound") {
    if (parts.size() > 2) throw DomainError("expected lowerbound[:params]");
    const auto p = parseParams(parts.size() == 2 ? parts[1] : "", {"d", "w", "m", "a", "gap", "seed"}, spec);
    LowerBoundConfig c;
    if (p.count("d")) c.d = toUnsigned(p.at("d"), "d");
    if (p.count("w")) c.W = toUnsigned(p.at("w"), "w");
    if (p.count("m")) c.m = toUnsigned(p.at("m"), "m");
    if (p.count("a")) c.actions = toUnsigned(p.at("a"), "a");
    if (p.count("gap")) c.gap = toDouble(p.at("gap"), "gap");
    Rng rng(p.count("seed") ? toUnsigned(p.at("seed"), "seed") : 0);
    auto lb = buildLowerBoundFmdp(c, rng);
    env.model = std::move(lb.model);
    env.initialState = 0;
    env.m = env.model.maxScopeSize();
  } else if (kind == "random") {
    if (parts.size() > 2) throw DomainError("expected random[:params]");
    const auto p = parseParams(parts.size() == 2 ? parts[1] : "", {"seed", "d", "n", "m", "w", "l", "conc", "nfa", "a"}, spec);
    RandomFmdpConfig c;
    if (p.count("seed")) c.seed = toUnsigned(p.at("seed"), "seed");
    if (p.count("d")) c.d = toUnsigned(p.at("d"), "d");
    if (p.count("n")) c.n = toUnsigned(p.at("n"), "n");
    if (p.count("m")) c.m = toUnsigned(p.at("m"), "m");
    if (p.count("w")) c.W = toUnsigned(p.at("w"), "w");
    if (p.count("l")) c.rewardFactors = toUnsigned(p.at("l"), "l");
    if (p.count("conc")) c.concentration = toDouble(p.at("conc"), "conc");
    if (p.count("nfa")) c.nonFactoredActions = toUnsigned(p.at("nfa"), "nfa") != 0;
    if (p.count("a")) c.actionCount = toUnsigned(p.at("a"), "a");
    env.model = buildRandomFmdp(c).model;
    env.initialState = 0;
    env.m = c.m;
  } else {
    throw DomainError("unknown environment '" + kind + "'");
  }
  return env;
}

AgentSpec parseAgent(const std::string& spec) {
  const auto colon = spec.find(':');
  AgentSpec a;
  a.config.algorithm = parseAlgorithm(spec.substr(0, colon));
  a.config.m = 0;  // resolved from the environment
  std::string label;
  if (colon != std::string::npos) {
    const auto p = parseParams(spec.substr(colon + 1), {"unpinned", "m", "radius", "elim", "rewards", "greedy", "label"}, spec);
    if (p.count("unpinned")) a.unpinned = static_cast<int>(toUnsigned(p.at("unpinned"), "unpinned"));
    if (p.count("m")) a.config.m = toUnsigned(p.at("m"), "m");
    if (p.count("radius")) a.config.radiusScale = toDouble(p.at("radius"), "radius");
    if (p.count("elim")) a.config.eliminationScale = toDouble(p.at("elim"), "elim");
    if (p.count("greedy")) a.config.greedyDirection = toUnsigned(p.at("greedy"), "greedy") != 0;
    if (p.count("rewards")) {
      if (p.at("rewards") == "known")
        a.rewardsKnown = true;
      else if (p.at("rewards") == "learned")
        a.rewardsKnown = false;
      else
        throw DomainError("rewards must be known or learned");
    }
    if (p.count("label")) label = p.at("label");
  }
  a.label = !label.empty() ? label
                           : algorithmName(a.config.algorithm) + (a.unpinned >= 0 ? std::to_string(a.unpinned) : "");
  return a;
}

AgentConfig resolveAgent(const AgentSpec& spec, const Environment& env, double delta, double eviTolerance) {
  AgentConfig c = spec.config;
  const Fmdp& M = env.model;
  if (c.m == 0) c.m = env.m;
  c.delta = delta;
  c.eviTolerance = eviTolerance;
  c.transitionPins.assign(M.stateFactorCount(), std::nullopt);
  c.rewardPins.assign(M.rewardFactorCount(), std::nullopt);
  if (spec.unpinned >= 0) {
    if (static_cast<std::size_t>(spec.unpinned) > M.stateFactorCount())
      throw DomainError("more unpinned factors than state factors");
    for (std::size_t i = static_cast<std::size_t>(spec.unpinned); i < M.stateFactorCount(); ++i)
      c.transitionPins[i] = M.transition(i).scope;
  }
  if (spec.rewardsKnown)
    for (std::size_t j = 0; j < M.rewardFactorCount(); ++j) c.rewardPins[j] = M.reward(j).scope;
  return c;
}

// ---------------------------------------------------------------------------
// Config

namespace {

json configToJson(const RunConfig& c, bool forHash) {
  json j;
  j["environment"] = c.environment;
  j["agents"] = c.agents;
  j["horizon"] = c.horizon;
  j["seeds"] = c.seeds;
  j["delta"] = c.delta;
  j["grid_points"] = c.gridPoints;
  j["write_steps"] = c.writeSteps;
  j["evi_tolerance"] = c.eviTolerance;
  if (!forHash) {
    j["output"] = c.output.string();
    j["parallelism"] = c.parallelism;
  }
  return j;
}

}  // namespace

std::string configJson(const RunConfig& config) { return configToJson(config, false).dump(2); }

RunConfig configFromJson(const std::string& text, RunConfig base) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw FormatError("configuration must be a JSON object");
    static const std::set<std::string> known{"environment", "agents",        "horizon",    "seeds",       "delta",
                                             "output",      "parallelism",   "grid_points", "write_steps", "evi_tolerance"};
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) throw FormatError("unknown configuration key '" + key + "'");
    if (j.contains("environment")) base.environment = j["environment"].get<std::string>();
    if (j.contains("agents")) base.agents = j["agents"].get<std::vector<std::string>>();
    if (j.contains("horizon")) base.horizon = j["horizon"].get<std::uint64_t>();
    if (j.contains("seeds")) base.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("delta")) base.delta = j["delta"].get<double>();
    if (j.contains("output")) base.output = j["output"].get<std::string>();
    if (j.contains("parallelism")) base.parallelism = j["parallelism"].get<unsigned>();
    if (j.contains("grid_points")) base.gridPoints = j["grid_points"].get<std::size_t>();
    if (j.contains("write_steps")) base.writeSteps = j["write_steps"].get<bool>();
    if (j.contains("evi_tolerance")) base.eviTolerance = j["evi_tolerance"].get<double>();
    return base;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed configuration: ") + e.what());
  }
}

std::string configHash(const RunConfig& config) {
  const std::string text = configToJson(config, true).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Running

std::vector<double> cumulativeRegret(const RunResult& run, double lambdaStar) {
  std::vector<double> out;
  out.reserve(run.steps.size());
  double reward = 0.0;
  for (std::size_t t = 0; t < run.steps.size(); ++t) {
    reward += run.steps[t].reward;
    out.push_back(lambdaStar * static_cast<double>(t + 1) - reward);
  }
  return out;
}

namespace {

std::string stepsCsv(const RunResult& run, double lambdaStar) {
  const auto regret = cumulativeRegret(run, lambdaStar);
  std::string out = "t,state,action,reward,cum_regret\n";
  out.reserve(run.steps.size() * 48);
  for (std::size_t t = 0; t < run.steps.size(); ++t) {
    const auto& s = run.steps[t];
    out += std::to_string(t + 1) + ',' + std::to_string(s.state) + ',' + std::to_string(s.action) + ',' +
           num(s.reward) + ',' + num(regret[t]) + '\n';
  }
  return out;
}

std::string episodesCsv(const RunResult& run) {
  std::ostringstream os;
  os << "k,t_k,length,gain,bias_span";
  const std::size_t d = run.episodes.empty() ? 0 : run.episodes[0].transitionSetSizes.size();
  const std::size_t ell = run.episodes.empty() ? 0 : run.episodes[0].rewardSetSizes.size();
  const std::size_t wrong = run.episodes.empty() ? 0 : run.episodes[0].wrongScopes.size();
  for (std::size_t i = 0; i < d; ++i) os << ",Z" << i;
  for (std::size_t j = 0; j < ell; ++j) os << ",R" << j;
  for (std::size_t i = 0; i < wrong; ++i) os << ",wrong" << i;
  os << ",concentration,true_scopes_survive,optimistic,sets_monotone,counters_consistent\n";
  for (const auto& e : run.episodes) {
    os << e.k << ',' << e.start << ',' << e.length << ',' << num(e.gain) << ',' << num(e.biasSpan);
    for (auto v : e.transitionSetSizes) os << ',' << v;
    for (auto v : e.rewardSetSizes) os << ',' << v;
    for (auto v : e.wrongScopes) os << ',' << v;
    os << ',' << e.concentration << ',' << e.trueScopesSurvive << ',' << e.optimistic << ',' << e.setsMonotone << ','
       << e.countersConsistent << '\n';
  }
  return os.str();
}

std::pair<double, double> meanStderr(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

/// Total wrong scopes over factors in the episode active at each grid time.
double wrongAt(const RunResult& run, std::uint64_t t) {
  const EpisodeLog* active = nullptr;
  for (const auto& e : run.episodes) {
    if (e.start > t) break;
    active = &e;
  }
  if (!active) return 0.0;
  double total = 0.0;
  for (auto w : active->wrongScopes) total += static_cast<double>(w);
  return total;
}

}  // namespace

ExperimentResult runExperiment(const RunConfig& config) {
  if (config.horizon == 0) throw DomainError("horizon must be at least 1");
  if (config.seeds.empty()) throw DomainError("need at least one seed");
  if (std::set<std::uint64_t>(config.seeds.begin(), config.seeds.end()).size() != config.seeds.size())
    throw DomainError("seeds must be distinct");
  if (config.agents.empty()) throw DomainError("need at least one agent");
  const Environment env = parseEnvironment(config.environment);
  std::vector<AgentSpec> specs;
  std::set<std::string> labels;
  for (const auto& a : config.agents) {
    specs.push_back(parseAgent(a));
    if (!labels.insert(specs.back().label).second) throw DomainError("duplicate agent label " + specs.back().label);
  }
  std::vector<AgentConfig> agentConfigs;
  for (const auto& s : specs) agentConfigs.push_back(resolveAgent(s, env, config.delta, config.eviTolerance));

  ExperimentResult out;
  out.lambdaStar = optimalGain(env.model);
  const double lambdaStar = out.lambdaStar;
  const fs::path dir = config.output;
  fs::create_directories(dir);

  struct Job {
    std::size_t agent;
    std::size_t seedIndex;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < specs.size(); ++a)
    for (std::size_t s = 0; s < config.seeds.size(); ++s) jobs.push_back({a, s});
  std::vector<RunResult> results(jobs.size());
  std::vector<RunSummary> summaries(jobs.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      const std::uint64_t seed = config.seeds[job.seedIndex];
      RunSummary& sum = summaries[k];
      sum.label = specs[job.agent].label;
      sum.seed = seed;
      const auto started = std::chrono::steady_clock::now();
      try {
        results[k] = runAgent(env.model, env.initialState, agentConfigs[job.agent], config.horizon, seed, lambdaStar);
        const fs::path runDir = dir / "runs" / sum.label / ("seed-" + std::to_string(seed));
        if (config.writeSteps) writeAtomically(runDir / "steps.csv", stepsCsv(results[k], lambdaStar));
        writeAtomically(runDir / "episodes.csv", episodesCsv(results[k]));
        sum.ok = true;
        sum.episodes = results[k].episodes.size();
        sum.trackedCells = results[k].trackedCells;
        const auto regret = cumulativeRegret(results[k], lambdaStar);
        sum.finalRegret = regret.empty() ? 0.0 : regret.back();
      } catch (const std::exception& e) {
        sum.ok = false;
        sum.error = e.what();
      }
      sum.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(config.parallelism, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // grid of reporting times
  for (std::size_t g = 1; g <= std::max<std::size_t>(config.gridPoints, 1); ++g) {
    const auto t = std::max<std::uint64_t>(1, config.horizon * g / std::max<std::size_t>(config.gridPoints, 1));
    if (out.grid.empty() || out.grid.back() != t) out.grid.push_back(t);
  }

  std::ostringstream regretCsv, scopesCsv;
  regretCsv << "label,t,mean,stderr,runs\n";
  scopesCsv << "label,t,mean,stderr,runs\n";
  for (std::size_t a = 0; a < specs.size(); ++a) {
    std::vector<const RunResult*> ok;
    std::vector<RunResult> mine;
    for (std::size_t k = 0; k < jobs.size(); ++k)
      if (jobs[k].agent == a && summaries[k].ok) ok.push_back(&results[k]);
    std::vector<std::vector<double>> curves;
    for (const auto* r : ok) curves.push_back(cumulativeRegret(*r, lambdaStar));
    const bool tracksScopes = specs[a].config.algorithm == Algorithm::SlfUcrl && specs[a].unpinned != 0;
    for (auto t : out.grid) {
      std::vector<double> xs, ws;
      for (const auto& c : curves) xs.push_back(c[t - 1]);
      for (const auto* r : ok) ws.push_back(wrongAt(*r, t));
      if (!xs.empty()) {
        const auto [m, se] = meanStderr(xs);
        regretCsv << specs[a].label << ',' << t << ',' << num(m) << ',' << num(se) << ',' << xs.size() << '\n';
      }
      if (tracksScopes && !ws.empty()) {
        const auto [m, se] = meanStderr(ws);
        scopesCsv << specs[a].label << ',' << t << ',' << num(m) << ',' << num(se) << ',' << ws.size() << '\n';
      }
    }
  }
  writeAtomically(dir / "aggregate_regret.csv", regretCsv.str());
  writeAtomically(dir / "aggregate_scopes.csv", scopesCsv.str());

  json manifest;
  manifest["format"] = "fmdp-manifest";
  manifest["artifact_version"] = kArtifactVersion;
  manifest["config"] = configToJson(config, false);
  manifest["config_hash"] = configHash(config);
  manifest["environment"] = config.environment;
  manifest["lambda_star"] = lambdaStar;
  manifest["horizon"] = config.horizon;
  manifest["grid"] = out.grid;
  json runs = json::array();
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& s = summaries[k];
    json r;
    r["label"] = s.label;
    r["seed"] = s.seed;
    r["ok"] = s.ok;
    r["error"] = s.error;
    r["wall_seconds"] = s.wallSeconds;
    r["episodes"] = s.episodes;
    r["final_regret"] = s.finalRegret;
    r["tracked_cells"] = s.trackedCells;
    std::vector<std::string> files;
    if (s.ok) {
      const std::string base = "runs/" + s.label + "/seed-" + std::to_string(s.seed) + "/";
      if (config.writeSteps) files.push_back(base + "steps.csv");
      files.push_back(base + "episodes.csv");
    }
    r["files"] = files;
    runs.push_back(std::move(r));
  }
  manifest["runs"] = std::move(runs);
  manifest["aggregates"] = {"aggregate_regret.csv", "aggregate_scopes.csv"};
  writeAtomically(dir / "manifest.json", manifest.dump(2) + "\n");

  out.runs = summaries;
  for (std::size_t a = 0; a < specs.size(); ++a) {
    std::vector<RunResult> mine;
    for (std::size_t k = 0; k < jobs.size(); ++k)
      if (jobs[k].agent == a && summaries[k].ok) mine.push_back(std::move(results[k]));
    out.results.emplace_back(specs[a].label, std::move(mine));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plots

namespace {

struct Series {
  std::string label;
  std::vector<double> t, mean, se;
};

std::vector<Series> readSeries(const fs::path& file, bool requireRows) {
  const Csv csv = readCsv(file);
  const auto cl = csv.column("label", file), ct = csv.column("t", file), cm = csv.column("mean", file),
             cs = csv.column("stderr", file);
  if (requireRows && csv.rows.empty()) throw FormatError(file.string() + " has no data rows");
  std::vector<Series> out;
  for (const auto& row : csv.rows) {
    if (out.empty() || out.back().label != row[cl]) out.push_back({row[cl], {}, {}, {}});
    try {
      out.back().t.push_back(std::stod(row[ct]));
      out.back().mean.push_back(std::stod(row[cm]));
      out.back().se.push_back(std::stod(row[cs]));
    } catch (const std::exception&) {
      throw FormatError(file.string() + " has a non-numeric cell");
    }
  }
  return out;
}

std::string legendName(const std::string& label) {
  static const std::vector<std::pair<std::string, std::string>> names{
      {"factored-ucrl", "Factored-UCRL"}, {"slf-ucrl", "SLF-UCRL"}, {"ucrl2", "UCRL2"}, {"nfa-dorl", "NFA-DORL"}};
  for (const auto& [prefix, name] : names)
    if (label.rfind(prefix, 0) == 0) return name + label.substr(prefix.size());
  return label;
}

std::string escapeXml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string svgPlot(const std::vector<Series>& series, const std::string& title, const std::string& ylabel) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double W = 720, H = 440, left = 80, right = 170, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double xmax = 1.0, ymin = 0.0, ymax = 1.0;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.t.size(); ++k) {
      xmax = std::max(xmax, s.t[k]);
      ymax = std::max(ymax, s.mean[k] + s.se[k]);
      ymin = std::min(ymin, s.mean[k] - s.se[k]);
    }
  const auto X = [&](double x) { return left + pw * x / xmax; };
  const auto Y = [&](double y) { return top + ph * (1.0 - (y - ymin) / (ymax - ymin)); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escapeXml(title) << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = xmax * k / 5.0, yv = ymin + (ymax - ymin) * k / 5.0;
    os << "<line x1=\"" << X(xv) << "\" y1=\"" << top + ph << "\" x2=\"" << X(xv) << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << X(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << static_cast<long long>(std::llround(xv)) << "</text>\n";
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << Y(yv) << "\" x2=\"" << left << "\" y2=\"" << Y(yv) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << Y(yv) + 4 << "\" text-anchor=\"end\">" << std::llround(yv) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">time steps</text>\n";
  os << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << top + ph / 2 << ")\">"
     << escapeXml(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette[k % 8];
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t p = 0; p < s.t.size(); ++p) os << X(s.t[p]) << ',' << Y(s.mean[p] + s.se[p]) << ' ';
    for (std::size_t p = s.t.size(); p-- > 0;) os << X(s.t[p]) << ',' << Y(s.mean[p] - s.se[p]) << ' ';
    os << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < s.t.size(); ++p) os << X(s.t[p]) << ',' << Y(s.mean[p]) << ' ';
    os << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 45 << "\" y=\"" << ly + 4 << "\">" << escapeXml(legendName(s.label)) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

void renderPlots(const fs::path& dir) {
  // parse everything first so a bad input leaves no partial output
  const auto regret = readSeries(dir / "aggregate_regret.csv", true);
  const auto scopes = readSeries(dir / "aggregate_scopes.csv", false);
  const std::string regretSvg = svgPlot(regret, "Cumulative regret", "cumulative regret");
  const std::string scopesSvg = svgPlot(scopes, "Remaining wrong scopes", "#wrong scopes");
  writeAtomically(dir / "regret.svg", regretSvg);
  writeAtomically(dir / "scopes.svg", scopesSvg);
}

// ---------------------------------------------------------------------------
// Audit

bool AuditReport::passed() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunAudit& r) { return r.passed(); });
}

std::string AuditReport::text() const {
  std::ostringstream os;
  const auto flag = [](bool ok) { return ok ? "pass" : "FAIL"; };
  for (const auto& r : runs) {
    os << r.label << " seed " << r.seed << ": episode-bound " << flag(r.episodeBound) << ", counters "
       << flag(r.countersConsistent) << ", monotone " << flag(r.setsMonotone) << ", regret " << flag(r.regretRecomputes)
       << ", optimism " << flag(r.optimismOnConcentration) << ", true-scopes " << flag(r.trueScopesSurvive)
       << ", concentration " << (r.concentrationHeld ? "held" : "violated (flagged)");
    if (r.survivalViolations) os << ", episodes without a true scope: " << r.survivalViolations;
    if (!r.note.empty()) os << " [" << r.note << "]";
    os << '\n';
  }
  os << "runs with a confidence-event violation: " << concentrationViolations << " of " << runs.size() << '\n';
  os << (passed() ? "audit passed" : "audit FAILED") << '\n';
  return os.str();
}

AuditReport auditRun(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(slurp(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  const double lambdaStar = manifest.at("lambda_star").get<double>();
  const std::uint64_t T = manifest.at("horizon").get<std::uint64_t>();
  AuditReport report;
  for (const auto& run : manifest.at("runs")) {
    if (!run.at("ok").get<bool>()) continue;
    RunAudit a;
    a.label = run.at("label").get<std::string>();
    a.seed = run.at("seed").get<std::uint64_t>();
    const fs::path runDir = dir / "runs" / a.label / ("seed-" + std::to_string(a.seed));

    const fs::path epFile = runDir / "episodes.csv";
    const Csv ep = readCsv(epFile);
    const double bound = static_cast<double>(run.at("tracked_cells").get<std::uint64_t>()) *
                         (std::log2(static_cast<double>(T)) + 1.0);
    a.episodeBound = static_cast<double>(ep.rows.size()) <= bound;
    const auto conc = ep.column("concentration", epFile), surv = ep.column("true_scopes_survive", epFile),
               opt = ep.column("optimistic", epFile), mono = ep.column("sets_monotone", epFile),
               cnt = ep.column("counters_consistent", epFile);
    std::vector<std::size_t> sizeCols;
    for (std::size_t c = 0; c < ep.header.size(); ++c)
      if ((ep.header[c][0] == 'Z' || ep.header[c][0] == 'R') && ep.header[c].size() > 1 && std::isdigit(ep.header[c][1]))
        sizeCols.push_back(c);
    bool eventSoFar = true;
    for (std::size_t r = 0; r < ep.rows.size(); ++r) {
      const auto& row = ep.rows[r];
      const bool c = row[conc] == "1";
      eventSoFar = eventSoFar && c;
      if (!c) a.concentrationHeld = false;
      if (c && row[opt] != "1") a.optimismOnConcentration = false;
      if (row[surv] != "1") {
        ++a.survivalViolations;
        if (eventSoFar) a.trueScopesSurvive = false;
      }
      if (row[mono] != "1") a.setsMonotone = false;
      if (row[cnt] != "1") a.countersConsistent = false;
      if (r > 0)
        for (auto col : sizeCols)
          if (std::stoul(row[col]) > std::stoul(ep.rows[r - 1][col])) a.setsMonotone = false;
    }

    const fs::path stepFile = runDir / "steps.csv";
    if (fs::exists(stepFile)) {
      const Csv st = readCsv(stepFile);
      const auto ct = st.column("t", stepFile), cr = st.column("reward", stepFile), cg = st.column("cum_regret", stepFile);
      double reward = 0.0;
      for (const auto& row : st.rows) {
        reward += std::stod(row[cr]);
        const double expect = lambdaStar * std::stod(row[ct]) - reward;
        if (std::abs(expect - std::stod(row[cg])) > 1e-9) {
          a.regretRecomputes = false;
          break;
        }
      }
      if (st.rows.size() != T) a.regretRecomputes = false;
    } else {
      a.note = "no step log; regret not recomputed";
    }
    if (!a.concentrationHeld) ++report.concentrationViolations;
    report.runs.push_back(std::move(a));
  }
  return report;
}

}  // namespace fmdp
