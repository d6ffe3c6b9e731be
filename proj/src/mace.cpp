#include "annotagg/mace.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

#include <boost/math/special_functions/digamma.hpp>

#include "annotagg/csv.hpp"
#include "annotagg/error.hpp"
#include "annotagg/random.hpp"

namespace annotagg::mace {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Observation {
  std::size_t annotator;
  LabelId label;
};

// Sparse view of the matrix: present cells only, grouped by item.
struct Observations {
  std::size_t n_items = 0;
  std::size_t n_annotators = 0;
  std::size_t num_labels = 0;
  std::vector<std::vector<Observation>> rows;
  std::vector<double> per_annotator;  // n_j

  explicit Observations(const AnnotationMatrix& m)
      : n_items(m.n_items()),
        n_annotators(m.n_annotators()),
        num_labels(m.num_labels()),
        rows(m.n_items()),
        per_annotator(m.n_annotators(), 0.0) {
    for (std::size_t i = 0; i < n_items; ++i)
      for (std::size_t j = 0; j < n_annotators; ++j)
        if (auto a = m.at(i, j)) {
          rows[i].push_back({j, *a});
          per_annotator[j] += 1.0;
        }
  }
};

// Emission weights. P(a | t) = truthful[j] [a == t] + spam[j] * strategy[j][a].
// In em mode spam = 1 - truthful and strategy rows sum to one; in vb mode
// these are the exponentiated expected log-parameters and are subnormalized.
struct Emission {
  std::vector<double> truthful;
  std::vector<double> spam;
  std::vector<double> strategy;  // annotator-major, J x K
};

struct Counts {
  std::vector<double> truthful;  // expected non-spam count per annotator
  std::vector<double> spam;      // expected spam count per (annotator, label)
};

struct EStep {
  double log_likelihood;
  std::vector<double> posteriors;  // item-major, n x K
  Counts counts;
};

EStep expectation(const Observations& obs, const Emission& em) {
  const std::size_t K = obs.num_labels;
  EStep out{0.0, std::vector<double>(obs.n_items * K),
            {std::vector<double>(obs.n_annotators, 0.0),
             std::vector<double>(obs.n_annotators * K, 0.0)}};

  std::vector<double> log_match(obs.n_annotators * K);
  std::vector<double> log_miss(obs.n_annotators * K);
  for (std::size_t j = 0; j < obs.n_annotators; ++j)
    for (std::size_t k = 0; k < K; ++k) {
      const double guess = em.spam[j] * em.strategy[j * K + k];
      log_match[j * K + k] = std::log(em.truthful[j] + guess);
      log_miss[j * K + k] = std::log(guess);
    }

  const double log_prior = -std::log(static_cast<double>(K));
  std::vector<double> logp(K);
  for (std::size_t i = 0; i < obs.n_items; ++i) {
    std::fill(logp.begin(), logp.end(), 0.0);
    for (const auto& o : obs.rows[i])
      for (std::size_t t = 0; t < K; ++t)
        logp[t] += (t == o.label) ? log_match[o.annotator * K + o.label]
                                  : log_miss[o.annotator * K + o.label];
    const double peak = *std::max_element(logp.begin(), logp.end());
    double* post = &out.posteriors[i * K];
    if (peak == kNegInf) {
      // no label explains this row; the restart is degenerate
      std::fill(post, post + K, 1.0 / static_cast<double>(K));
      out.log_likelihood = kNegInf;
      continue;
    }
    double total = 0.0;
    for (std::size_t t = 0; t < K; ++t) total += std::exp(logp[t] - peak);
    const double lse = peak + std::log(total);
    out.log_likelihood += lse + log_prior;
    for (std::size_t t = 0; t < K; ++t) post[t] = std::exp(logp[t] - lse);

    for (const auto& o : obs.rows[i]) {
      const double guess = em.spam[o.annotator] * em.strategy[o.annotator * K + o.label];
      const double denom = em.truthful[o.annotator] + guess;
      const double truthful = denom > 0.0 ? post[o.label] * em.truthful[o.annotator] / denom : 0.0;
      out.counts.truthful[o.annotator] += truthful;
      out.counts.spam[o.annotator * K + o.label] += 1.0 - truthful;
    }
  }
  return out;
}

struct Parameters {
  std::vector<double> theta;
  std::vector<double> xi;  // J x K
};

// Point estimates; also the reported parameters in vb mode (posterior means).
Parameters maximize(const Observations& obs, const Counts& c, double pseudo_theta,
                    double pseudo_xi, const Parameters& previous) {
  const std::size_t K = obs.num_labels;
  Parameters p = previous;
  for (std::size_t j = 0; j < obs.n_annotators; ++j) {
    const double denom = 2.0 * pseudo_theta + obs.per_annotator[j];
    if (denom > 0.0) p.theta[j] = std::clamp((pseudo_theta + c.truthful[j]) / denom, 0.0, 1.0);
    double spam_total = 0.0;
    for (std::size_t k = 0; k < K; ++k) spam_total += c.spam[j * K + k];
    const double sdenom = static_cast<double>(K) * pseudo_xi + spam_total;
    if (sdenom > 0.0)
      for (std::size_t k = 0; k < K; ++k)
        p.xi[j * K + k] = (pseudo_xi + c.spam[j * K + k]) / sdenom;
  }
  return p;
}

Emission emission_from(const Parameters& p) {
  Emission e{p.theta, std::vector<double>(p.theta.size()), p.xi};
  for (std::size_t j = 0; j < p.theta.size(); ++j) e.spam[j] = 1.0 - p.theta[j];
  return e;
}

Emission variational_emission(const Observations& obs, const Counts& c, double alpha,
                              double beta) {
  using boost::math::digamma;
  const std::size_t K = obs.num_labels;
  Emission e{std::vector<double>(obs.n_annotators), std::vector<double>(obs.n_annotators),
             std::vector<double>(obs.n_annotators * K)};
  for (std::size_t j = 0; j < obs.n_annotators; ++j) {
    const double spam_count = std::max(0.0, obs.per_annotator[j] - c.truthful[j]);
    const double norm = digamma(2.0 * alpha + obs.per_annotator[j]);
    e.truthful[j] = std::exp(digamma(alpha + c.truthful[j]) - norm);
    e.spam[j] = std::exp(digamma(alpha + spam_count) - norm);
    double spam_total = 0.0;
    for (std::size_t k = 0; k < K; ++k) spam_total += c.spam[j * K + k];
    const double snorm = digamma(static_cast<double>(K) * beta + spam_total);
    for (std::size_t k = 0; k < K; ++k)
      e.strategy[j * K + k] = std::exp(digamma(beta + c.spam[j * K + k]) - snorm);
  }
  return e;
}

double smoothing_log_prior(const Parameters& p, double delta) {
  if (delta == 0.0) return 0.0;
  double lp = 0.0;
  for (double t : p.theta) lp += std::log(t) + std::log1p(-t);
  for (double x : p.xi) lp += std::log(x);
  return delta * lp;
}

struct RestartResult {
  Parameters params;
  std::vector<double> posteriors;
  double log_likelihood = kNegInf;
  std::size_t iterations = 0;
  std::vector<IterationStats> trace;
};

Parameters initial_parameters(const AnnotationMatrix& m, const Config& cfg, std::size_t restart) {
  const std::size_t K = m.num_labels();
  Parameters p{std::vector<double>(m.n_annotators()), std::vector<double>(m.n_annotators() * K)};
  for (std::size_t j = 0; j < m.n_annotators(); ++j) {
    // keyed by annotator id so that column order does not change the start
    Rng rng(derive_seed(cfg.seed, restart, hash_string(m.annotator_ids()[j])));
    p.theta[j] = rng.uniform(0.5, 1.0);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      // strictly positive so no strategy starts at a zero-probability corner
      const double u = 1.0 - rng.uniform01();
      p.xi[j * K + k] = u;
      total += u;
    }
    for (std::size_t k = 0; k < K; ++k) p.xi[j * K + k] /= total;
  }
  return p;
}

RestartResult run_restart(const AnnotationMatrix& m, const Observations& obs, const Config& cfg,
                          std::size_t restart) {
  RestartResult r;
  r.params = initial_parameters(m, cfg, restart);
  const bool vb = cfg.mode == Mode::vb;

  Emission emission = emission_from(r.params);
  EStep e = expectation(obs, emission);
  auto record = [&](const EStep& step) {
    const double obj =
        vb ? step.log_likelihood : step.log_likelihood + smoothing_log_prior(r.params, cfg.smoothing);
    r.trace.push_back({step.log_likelihood, obj});
  };
  record(e);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    if (vb) {
      r.params = maximize(obs, e.counts, cfg.vb_alpha, cfg.vb_beta, r.params);
      emission = variational_emission(obs, e.counts, cfg.vb_alpha, cfg.vb_beta);
    } else {
      r.params = maximize(obs, e.counts, cfg.smoothing, cfg.smoothing, r.params);
      emission = emission_from(r.params);
    }
    const double previous = e.log_likelihood;
    e = expectation(obs, emission);
    record(e);
    r.iterations = it;
    if (!std::isfinite(e.log_likelihood)) break;
    const double change = std::abs(e.log_likelihood - previous);
    if (change <= cfg.tolerance * std::max(std::abs(previous), 1e-300)) break;
  }

  r.posteriors = std::move(e.posteriors);
  if (vb) {
    std::vector<std::vector<double>> xi(obs.n_annotators);
    for (std::size_t j = 0; j < obs.n_annotators; ++j)
      xi[j].assign(r.params.xi.begin() + j * obs.num_labels,
                   r.params.xi.begin() + (j + 1) * obs.num_labels);
    r.log_likelihood = log_likelihood(m, r.params.theta, xi);
  } else {
    r.log_likelihood = e.log_likelihood;
  }
  if (std::isnan(r.log_likelihood)) r.log_likelihood = kNegInf;
  return r;
}

}  // namespace

void Config::validate() const {
  if (restarts < 1) throw UsageError("MACE restarts must be >= 1");
  if (iterations < 1) throw UsageError("MACE iterations must be >= 1");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing))
    throw UsageError("MACE smoothing must be a finite nonnegative number");
  if (!(tolerance > 0.0)) throw UsageError("MACE convergence tolerance must be positive");
  if (mode == Mode::vb && !(vb_alpha > 0.0 && vb_beta > 0.0))
    throw UsageError("VB priors must be positive");
}

Model fit(const AnnotationMatrix& matrix, const Config& config) {
  config.validate();
  if (matrix.num_labels() < 2) throw DataError("MACE needs at least 2 labels");
  matrix.require_nonempty_rows();

  const Observations obs(matrix);
  std::vector<RestartResult> results(config.restarts);
  std::size_t workers = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  workers = std::clamp<std::size_t>(workers, 1, config.restarts);
  if (workers == 1) {
    for (std::size_t r = 0; r < config.restarts; ++r)
      results[r] = run_restart(matrix, obs, config, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < config.restarts; r = next++)
          results[r] = run_restart(matrix, obs, config, r);
      });
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (results[r].log_likelihood > results[best].log_likelihood) best = r;
  RestartResult& chosen = results[best];

  const std::size_t K = matrix.num_labels();
  Model model;
  model.annotator_ids = matrix.annotator_ids();
  model.item_ids = matrix.item_ids();
  model.labels = matrix.label_space().labels();
  model.theta = chosen.params.theta;
  model.xi.resize(matrix.n_annotators());
  for (std::size_t j = 0; j < matrix.n_annotators(); ++j)
    model.xi[j].assign(chosen.params.xi.begin() + j * K, chosen.params.xi.begin() + (j + 1) * K);
  model.posteriors.resize(matrix.n_items());
  for (std::size_t i = 0; i < matrix.n_items(); ++i)
    model.posteriors[i].assign(chosen.posteriors.begin() + i * K,
                               chosen.posteriors.begin() + (i + 1) * K);
  model.log_likelihood = chosen.log_likelihood;
  model.config = config;
  model.best_restart = best;
  model.iterations_run = chosen.iterations;
  model.trace = std::move(chosen.trace);
  return model;
}

double log_likelihood(const AnnotationMatrix& matrix, const std::vector<double>& theta,
                      const std::vector<std::vector<double>>& xi) {
  const std::size_t K = matrix.num_labels();
  if (theta.size() != matrix.n_annotators() || xi.size() != matrix.n_annotators())
    throw UsageError("parameter count does not match the annotation matrix");
  double ll = 0.0;
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    double item = 0.0;
    for (std::size_t t = 0; t < K; ++t) {
      double prod = 1.0;
      for (std::size_t j = 0; j < matrix.n_annotators(); ++j)
        if (auto a = matrix.at(i, j))
          prod *= theta[j] * (*a == t ? 1.0 : 0.0) + (1.0 - theta[j]) * xi[j].at(*a);
      item += prod;
    }
    ll += std::log(item / static_cast<double>(K));
  }
  return ll;
}

LabelId argmax(const std::vector<double>& distribution) {
  LabelId best = 0;
  for (LabelId k = 1; k < distribution.size(); ++k)
    if (distribution[k] > distribution[best]) best = k;
  return best;
}

double shannon_entropy(const std::vector<double>& distribution) {
  double h = 0.0;
  for (double p : distribution)
    if (p > 0.0) h -= p * std::log(p);
  const double max_h = std::log(static_cast<double>(distribution.size()));
  return std::clamp(h, 0.0, max_h);
}

std::vector<std::optional<LabelId>> decode(const Model& model, std::optional<double> threshold) {
  std::vector<std::optional<LabelId>> labels(model.posteriors.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = argmax(model.posteriors[i]);
  if (!threshold || labels.empty()) return labels;
  if (!(*threshold > 0.0 && *threshold <= 1.0))
    throw UsageError("decode threshold must be in (0, 1]");

  const auto h = entropy(model);
  auto sorted = h;
  std::sort(sorted.begin(), sorted.end());
  const auto keep = static_cast<std::size_t>(std::ceil(*threshold * static_cast<double>(h.size())));
  const double cutoff = sorted[std::clamp<std::size_t>(keep, 1, h.size()) - 1];
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (h[i] > cutoff) labels[i].reset();
  return labels;
}

std::vector<double> entropy(const Model& model) {
  std::vector<double> h(model.posteriors.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = shannon_entropy(model.posteriors[i]);
  return h;
}

nlohmann::ordered_json to_json(const Config& config) {
  nlohmann::ordered_json j;
  j["restarts"] = config.restarts;
  j["iterations"] = config.iterations;
  j["smoothing"] = config.smoothing;
  j["mode"] = config.mode == Mode::em ? "em" : "vb";
  j["vb_alpha"] = config.vb_alpha;
  j["vb_beta"] = config.vb_beta;
  j["tolerance"] = config.tolerance;
  j["seed"] = config.seed;
  return j;
}

nlohmann::ordered_json to_json(const Model& model) {
  nlohmann::ordered_json j;
  j["theta"] = model.theta;
  j["xi"] = model.xi;
  j["posteriors"] = model.posteriors;
  if (std::isfinite(model.log_likelihood))
    j["log_likelihood"] = model.log_likelihood;
  else
    j["log_likelihood"] = nullptr;
  j["config"] = to_json(model.config);
  j["annotator_ids"] = model.annotator_ids;
  j["item_ids"] = model.item_ids;
  j["labels"] = model.labels;
  j["best_restart"] = model.best_restart;
  j["iterations_run"] = model.iterations_run;
  return j;
}

namespace {
std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}
}  // namespace

void write_competence_csv(std::ostream& out, const Model& model) {
  csv::write_row(out, {"annotator_id", "competence"});
  for (std::size_t j = 0; j < model.theta.size(); ++j)
    csv::write_row(out, {model.annotator_ids[j], format_double("%.6f", model.theta[j])});
}

void write_entropy_csv(std::ostream& out, const Model& model) {
  csv::write_row(out, {"item_id", "entropy"});
  const auto h = entropy(model);
  for (std::size_t i = 0; i < h.size(); ++i)
    csv::write_row(out, {model.item_ids[i], format_double("%.17g", h[i])});
}

std::vector<Competence> read_competence_csv(std::istream& in) {
  csv::Table table(in);
  std::vector<Competence> out;
  if (table.header().empty()) return out;
  const auto id_col = table.column("annotator_id");
  const auto c_col = table.column("competence");
  while (auto row = table.next()) {
    try {
      out.push_back({row->fields[id_col], std::stod(row->fields[c_col])});
    } catch (const std::logic_error&) {
      throw DataError("CSV line " + std::to_string(row->line) + ": bad competence value");
    }
  }
  return out;
}

}  // namespace annotagg::mace
