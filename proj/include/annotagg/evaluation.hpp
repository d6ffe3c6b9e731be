#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annotagg/label_data.hpp"

namespace annotagg::eval {

/// p-value at or below which a system counts as significantly better.
inline constexpr double kSignificanceLevel = 0.01;

struct F1Scores {
  double macro = 0.0;
  std::vector<double> per_class;  // one entry per label of the space

  bool operator==(const F1Scores&) const = default;
};

/// Per-class F1 (0 when precision + recall is 0) and their unweighted mean
/// over the whole label space.
F1Scores macro_f1(std::span<const LabelId> pred, std::span<const LabelId> gold,
                  std::size_t num_labels);

struct BootstrapConfig {
  std::size_t samples = 1000;
  double sample_frac = 0.2;  // resample size as a fraction of n, with replacement
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // 0 = hardware concurrency; output does not depend on it
};

struct BootstrapResult {
  double p_value = 1.0;  // (1 + #{F1_sys <= F1_ref}) / (samples + 1)
  std::size_t wins = 0;  // samples where the system is strictly better
  std::size_t ties = 0;
  std::size_t losses = 0;

  bool significant() const { return p_value <= kSignificanceLevel; }
  bool operator==(const BootstrapResult&) const = default;
};

BootstrapResult bootstrap_test(std::span<const LabelId> system, std::span<const LabelId> reference,
                               std::span<const LabelId> gold, std::size_t num_labels,
                               const BootstrapConfig& config = {});

struct Correlation {
  double spearman;
  double pearson;
};

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of mean ranks.
double spearman(std::span<const double> x, std::span<const double> y);
Correlation rank_correlation(std::span<const double> x, std::span<const double> y);

/// One system's predictions aligned with the gold items; nullopt marks items
/// the system did not label.
struct Source {
  std::string name;
  std::vector<std::optional<LabelId>> labels;
  std::optional<double> competence;
  std::optional<double> ool_rate;
};

struct SourceScore {
  std::string name;
  F1Scores f1;
  std::size_t n_items = 0;
  std::optional<double> competence;
  std::optional<double> ool_rate;
  std::optional<BootstrapResult> bootstrap;  // absent for the reference itself
};

struct Report {
  std::vector<std::string> labels;
  std::size_t n_items = 0;
  std::string reference;
  BootstrapConfig bootstrap;
  std::vector<SourceScore> sources;
  std::optional<Correlation> correlation;  // competence vs macro-F1
  std::vector<std::string> correlation_sources;
  std::optional<double> ool_rate_overall;
};

/// Scores every source against gold, tests each against `reference` (one of
/// the sources), and correlates competence with macro-F1 over the sources
/// that carry a competence when there are at least two of them.
Report evaluate(const LabelSpace& space, std::span<const LabelId> gold,
                const std::vector<Source>& sources, const std::string& reference,
                const BootstrapConfig& bootstrap);

nlohmann::ordered_json to_json(const Report& report);
/// One row per source; '*' marks p <= 0.01 against the reference.
std::string format_table(const Report& report, const std::string& column);

}  // namespace annotagg::eval
