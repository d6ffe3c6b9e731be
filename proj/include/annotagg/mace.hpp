#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annotagg/label_data.hpp"

namespace annotagg::mace {

enum class Mode { em, vb };

struct Config {
  std::size_t restarts = 10;
  std::size_t iterations = 50;  // M-steps per restart
  double smoothing = 0.1;       // additive pseudo-count per parameter (em mode)
  Mode mode = Mode::em;
  double vb_alpha = 0.5;  // symmetric Beta prior on competence (vb mode)
  double vb_beta = 0.5;   // symmetric Dirichlet prior on strategies (vb mode)
  double tolerance = 1e-6;  // relative log-likelihood change that stops a restart
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // restarts run concurrently; 0 = hardware concurrency

  /// Throws UsageError on an invalid combination.
  void validate() const;
};

struct IterationStats {
  double log_likelihood;
  /// Quantity EM is guaranteed not to decrease: the log-likelihood plus the
  /// smoothing log-prior in em mode; equal to log_likelihood in vb mode.
  double objective;
};

/// Fitted annotator competences, strategies and item label posteriors.
struct Model {
  std::vector<std::string> annotator_ids;
  std::vector<std::string> item_ids;
  std::vector<std::string> labels;
  std::vector<double> theta;                   // per annotator, in [0,1]
  std::vector<std::vector<double>> xi;         // annotator x label, rows sum to 1
  std::vector<std::vector<double>> posteriors;  // item x label, rows sum to 1
  double log_likelihood = 0.0;
  Config config;
  std::size_t best_restart = 0;
  std::size_t iterations_run = 0;
  /// Per-iteration statistics of the selected restart; entry 0 is the
  /// initialization, entry t follows the t-th M-step.
  std::vector<IterationStats> trace;
};

/// Fits the competence/strategy annotation model by restarted EM (or VB) and
/// returns the restart with the highest log-likelihood. Throws DataError for
/// an item without annotations.
Model fit(const AnnotationMatrix& matrix, const Config& config = {});

/// Observed-data log-likelihood under a uniform label prior:
/// sum_i log( 1/K sum_t prod_j theta_j [a_ij = t] + (1 - theta_j) xi_j(a_ij) ).
double log_likelihood(const AnnotationMatrix& matrix, const std::vector<double>& theta,
                      const std::vector<std::vector<double>>& xi);

/// Index of the largest entry; ties go to the lowest index.
LabelId argmax(const std::vector<double>& distribution);

/// Shannon entropy in nats of one distribution.
double shannon_entropy(const std::vector<double>& distribution);

/// Posterior argmax per item. With a threshold t in (0,1], only the
/// ceil(t * n) lowest-entropy items (plus entropy ties at the cutoff) receive
/// a label; the rest abstain.
std::vector<std::optional<LabelId>> decode(const Model& model,
                                           std::optional<double> threshold = std::nullopt);

/// Posterior entropy per item, in nats.
std::vector<double> entropy(const Model& model);

nlohmann::ordered_json to_json(const Model& model);
nlohmann::ordered_json to_json(const Config& config);

void write_competence_csv(std::ostream& out, const Model& model);
void write_entropy_csv(std::ostream& out, const Model& model);

struct Competence {
  std::string annotator_id;
  double competence;
};
std::vector<Competence> read_competence_csv(std::istream& in);

}  // namespace annotagg::mace
