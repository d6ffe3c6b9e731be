#include "annotagg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "annotagg/csv.hpp"
#include "annotagg/error.hpp"
#include "annotagg/random.hpp"

namespace annotagg::sim {

namespace {

using json = nlohmann::ordered_json;

void check_distribution(const std::vector<double>& d, std::size_t K, const std::string& what) {
  if (d.size() != K)
    throw UsageError(what + " has " + std::to_string(d.size()) + " entries, expected " +
                     std::to_string(K));
  double total = 0.0;
  for (double p : d) {
    if (!(p >= 0.0)) throw UsageError(what + " has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError(what + " does not sum to 1");
}

std::string padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace

void Config::validate() const {
  const std::size_t K = labels.size();
  if (K < 2) throw UsageError("simulation needs at least 2 labels");
  if (annotators.empty()) throw UsageError("simulation needs at least one annotator");
  if (!label_prior.empty()) check_distribution(label_prior, K, "label_prior");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0))
    throw UsageError("missing_rate must be in [0, 1)");
  for (const auto& a : annotators) {
    if (!(a.theta >= 0.0 && a.theta <= 1.0))
      throw UsageError("annotator '" + a.id + "': theta must be in [0, 1]");
    if (!a.strategy.empty()) check_distribution(a.strategy, K, "strategy of '" + a.id + "'");
    if (!a.class_multipliers.empty()) {
      if (a.class_multipliers.size() != K)
        throw UsageError("annotator '" + a.id + "': class_multipliers needs one entry per label");
      for (double m : a.class_multipliers)
        if (!(m >= 0.0)) throw UsageError("annotator '" + a.id + "': negative class multiplier");
    }
  }
}

Config Config::from_json(const json& j) {
  try {
    Config c;
    c.n_items = j.value("n_items", c.n_items);
    if (j.contains("labels"))
      c.labels = j.at("labels").get<std::vector<std::string>>();
    else
      for (std::size_t k = 0, K = j.at("K").get<std::size_t>(); k < K; ++k)
        c.labels.push_back("label_" + std::to_string(k));
    if (j.contains("label_prior")) c.label_prior = j.at("label_prior").get<std::vector<double>>();
    c.missing_rate = j.value("missing_rate", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
    std::size_t n = 0;
    for (const auto& a : j.at("annotators")) {
      Annotator ann;
      ann.id = a.value("id", "a" + std::to_string(++n));
      ann.theta = a.at("theta").get<double>();
      if (a.contains("strategy")) ann.strategy = a.at("strategy").get<std::vector<double>>();
      if (a.contains("class_multipliers"))
        ann.class_multipliers = a.at("class_multipliers").get<std::vector<double>>();
      c.annotators.push_back(std::move(ann));
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid simulation config: ") + e.what());
  }
}

json Config::to_json() const {
  json j;
  j["n_items"] = n_items;
  j["labels"] = labels;
  if (!label_prior.empty()) j["label_prior"] = label_prior;
  j["missing_rate"] = missing_rate;
  j["seed"] = seed;
  j["annotators"] = json::array();
  for (const auto& a : annotators) {
    json e;
    e["id"] = a.id;
    e["theta"] = a.theta;
    if (!a.strategy.empty()) e["strategy"] = a.strategy;
    if (!a.class_multipliers.empty()) e["class_multipliers"] = a.class_multipliers;
    j["annotators"].push_back(std::move(e));
  }
  return j;
}

Config Config::uniform(std::size_t n_items, std::size_t num_labels,
                       const std::vector<double>& thetas, std::uint64_t seed) {
  Config c;
  c.n_items = n_items;
  for (std::size_t k = 0; k < num_labels; ++k) c.labels.push_back("label_" + std::to_string(k));
  for (std::size_t j = 0; j < thetas.size(); ++j)
    c.annotators.push_back({"a" + std::to_string(j + 1), thetas[j], {}, {}});
  c.seed = seed;
  return c;
}

Simulation simulate(const Config& config) {
  config.validate();
  const std::size_t K = config.labels.size();
  const std::size_t J = config.annotators.size();
  LabelSpace space(config.labels);

  std::vector<double> prior = config.label_prior;
  if (prior.empty()) prior.assign(K, 1.0 / static_cast<double>(K));

  const std::size_t width = std::to_string(config.n_items).size();
  std::vector<std::string> item_ids(config.n_items);
  for (std::size_t i = 0; i < config.n_items; ++i) item_ids[i] = "i" + padded(i + 1, width);
  std::vector<std::string> annotator_ids(J);
  for (std::size_t j = 0; j < J; ++j) annotator_ids[j] = config.annotators[j].id;

  Simulation sim{AnnotationMatrix(space, item_ids, annotator_ids), {}, config};
  sim.truth.resize(config.n_items);
  Rng truth_rng(derive_seed(config.seed, 0));
  for (auto& t : sim.truth) t = truth_rng.categorical(prior);

  std::vector<double> uniform(K, 1.0 / static_cast<double>(K));
  for (std::size_t j = 0; j < J; ++j) {
    const auto& a = config.annotators[j];
    const auto& strategy = a.strategy.empty() ? uniform : a.strategy;
    Rng rng(derive_seed(config.seed, 1, j));
    for (std::size_t i = 0; i < config.n_items; ++i) {
      const bool missing = rng.uniform01() < config.missing_rate;
      double theta = a.theta;
      if (!a.class_multipliers.empty())
        theta = std::clamp(theta * a.class_multipliers[sim.truth[i]], 0.0, 1.0);
      const bool truthful = rng.bernoulli(theta);
      const LabelId guess = rng.categorical(strategy);
      if (missing) continue;
      sim.matrix.set(i, j, truthful ? sim.truth[i] : guess);
    }
  }
  return sim;
}

void write_truth_csv(std::ostream& out, const Simulation& sim) {
  csv::write_row(out, {"item_id", "label"});
  for (std::size_t i = 0; i < sim.truth.size(); ++i)
    csv::write_row(out, {sim.matrix.item_ids()[i], sim.matrix.label_space().name(sim.truth[i])});
}

}  // namespace annotagg::sim
