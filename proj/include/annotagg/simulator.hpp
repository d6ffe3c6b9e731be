#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annotagg/label_data.hpp"

namespace annotagg::sim {

struct Annotator {
  std::string id;
  double theta = 0.5;             // probability of reporting the true label
  std::vector<double> strategy;   // guessing distribution over labels; empty = uniform
  /// Optional per-true-class multipliers on theta (clamped to [0,1]), to
  /// emulate annotators that specialize on some classes. Empty = off.
  std::vector<double> class_multipliers;
};

struct Config {
  std::size_t n_items = 1000;
  std::vector<std::string> labels;
  std::vector<double> label_prior;  // empty = uniform
  std::vector<Annotator> annotators;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;

  /// Throws UsageError when a distribution does not sum to 1 within 1e-9,
  /// a probability is out of range, or there is no annotator.
  void validate() const;

  static Config from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;

  /// K labels named label_0..label_{K-1} and annotators a1..aJ with the given
  /// competences and uniform strategies.
  static Config uniform(std::size_t n_items, std::size_t num_labels,
                        const std::vector<double>& thetas, std::uint64_t seed);
};

struct Simulation {
  AnnotationMatrix matrix;
  std::vector<LabelId> truth;
  Config config;
};

/// Draws T_i from the label prior; each cell is absent with probability
/// missing_rate, otherwise T_i with probability theta_j, otherwise a draw from
/// the annotator's strategy. Items can end up with no annotation when
/// missing_rate > 0. Deterministic in the seed.
Simulation simulate(const Config& config);

/// CSV item_id,label.
void write_truth_csv(std::ostream& out, const Simulation& sim);

}  // namespace annotagg::sim
