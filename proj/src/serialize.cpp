#include "fmdp/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "fmdp/error.hpp"

namespace fmdp {

using nlohmann::json;

namespace {

json scopeJson(const Scope& z) { return json(std::vector<std::size_t>(z.indices().begin(), z.indices().end())); }

}  // namespace

void saveModel(const Fmdp& model, std::ostream& out) {
  json doc;
  doc["format"] = "fmdp-model";
  doc["version"] = 1;
  doc["state_sizes"] = std::vector<std::size_t>(model.stateSpace().sizes().begin(),
                                                model.stateSpace().sizes().end());
  doc["action_sizes"] = std::vector<std::size_t>(model.actionSpace().sizes().begin(),
                                                 model.actionSpace().sizes().end());
  json trans = json::array();
  for (std::size_t i = 0; i < model.stateFactorCount(); ++i) {
    const auto& f = model.transition(i);
    const std::size_t w = model.stateSpace().size(i);
    json rows = json::array();
    for (std::size_t c = 0; c * w < f.table.size(); ++c)
      rows.push_back(std::vector<double>(f.table.begin() + c * w, f.table.begin() + (c + 1) * w));
    trans.push_back({{"scope", scopeJson(f.scope)}, {"rows", rows}});
  }
  doc["transitions"] = trans;
  json rewards = json::array();
  for (std::size_t j = 0; j < model.rewardFactorCount(); ++j) {
    const auto& f = model.reward(j);
    json cells = json::array();
    for (const auto& dist : f.cells) cells.push_back({{"values", dist.values}, {"probs", dist.probs}});
    rewards.push_back({{"scope", scopeJson(f.scope)}, {"cells", cells}});
  }
  doc["rewards"] = rewards;
  out << doc.dump(1) << '\n';
}

Fmdp loadModel(std::istream& in) {
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model document is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != "fmdp-model") throw FormatError("unexpected format tag");
    FactorSpace states(doc.at("state_sizes").get<std::vector<std::size_t>>());
    FactorSpace actions(doc.at("action_sizes").get<std::vector<std::size_t>>());
    std::vector<TransitionFactor> trans;
    for (const auto& t : doc.at("transitions")) {
      TransitionFactor f;
      f.scope = Scope(t.at("scope").get<std::vector<std::size_t>>());
      for (const auto& row : t.at("rows"))
        for (const auto& p : row) f.table.push_back(p.get<double>());
      trans.push_back(std::move(f));
    }
    std::vector<RewardFactor> rewards;
    for (const auto& r : doc.at("rewards")) {
      RewardFactor f;
      f.scope = Scope(r.at("scope").get<std::vector<std::size_t>>());
      for (const auto& c : r.at("cells"))
        f.cells.push_back({c.at("values").get<std::vector<double>>(),
                           c.at("probs").get<std::vector<double>>()});
      rewards.push_back(std::move(f));
    }
    return Fmdp(std::move(states), std::move(actions), std::move(trans), std::move(rewards));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  }
}

void saveModelFile(const Fmdp& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  saveModel(model, out);
}

Fmdp loadModelFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return loadModel(in);
}

}  // namespace fmdp
