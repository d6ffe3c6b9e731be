#include "annotagg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "annotagg/error.hpp"
#include "annotagg/random.hpp"

namespace annotagg::eval {

namespace {

// Confusion tallies for one class: true positives, predicted, actual.
struct Tally {
  std::vector<double> tp, pred, gold;
  explicit Tally(std::size_t k) : tp(k, 0.0), pred(k, 0.0), gold(k, 0.0) {}
  void add(LabelId p, LabelId g) {
    pred[p] += 1.0;
    gold[g] += 1.0;
    if (p == g) tp[p] += 1.0;
  }
  void clear() {
    std::fill(tp.begin(), tp.end(), 0.0);
    std::fill(pred.begin(), pred.end(), 0.0);
    std::fill(gold.begin(), gold.end(), 0.0);
  }
  F1Scores scores() const {
    F1Scores s;
    s.per_class.resize(tp.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < tp.size(); ++k) {
      // 2PR/(P+R) == 2tp/(pred+gold); zero when the class is neither predicted nor present
      const double denom = pred[k] + gold[k];
      s.per_class[k] = denom > 0.0 ? 2.0 * tp[k] / denom : 0.0;
      sum += s.per_class[k];
    }
    s.macro = sum / static_cast<double>(tp.size());
    return s;
  }
};

std::vector<double> mean_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

void check_labels(std::span<const LabelId> v, std::size_t num_labels) {
  for (LabelId l : v)
    if (l >= num_labels) throw DataError("label index out of range");
}

}  // namespace

F1Scores macro_f1(std::span<const LabelId> pred, std::span<const LabelId> gold,
                  std::size_t num_labels) {
  if (pred.size() != gold.size())
    throw DataError("prediction and gold lengths differ (" + std::to_string(pred.size()) +
                    " vs " + std::to_string(gold.size()) + ")");
  if (gold.empty()) throw DataError("macro-F1 needs at least one item");
  if (num_labels == 0) throw UsageError("macro-F1 needs a non-empty label space");
  check_labels(pred, num_labels);
  check_labels(gold, num_labels);
  Tally t(num_labels);
  for (std::size_t i = 0; i < gold.size(); ++i) t.add(pred[i], gold[i]);
  return t.scores();
}

constexpr double kTieTolerance = 1e-12;

BootstrapResult bootstrap_test(std::span<const LabelId> system, std::span<const LabelId> reference,
                               std::span<const LabelId> gold, std::size_t num_labels,
                               const BootstrapConfig& config) {
  const std::size_t n = gold.size();
  if (n == 0) throw DataError("bootstrap test needs at least one item");
  if (system.size() != n || reference.size() != n)
    throw DataError("bootstrap inputs are not aligned");
  if (!(config.sample_frac > 0.0 && config.sample_frac <= 1.0))
    throw UsageError("sample_frac must be in (0, 1]");
  if (config.samples < 1) throw UsageError("bootstrap needs at least one sample");
  check_labels(system, num_labels);
  check_labels(reference, num_labels);
  check_labels(gold, num_labels);

  const auto draw = static_cast<std::size_t>(
      std::max(1.0, std::ceil(config.sample_frac * static_cast<double>(n) - 1e-9)));
  // +1 win, 0 tie, -1 loss per sample; reduced in sample order
  std::vector<signed char> outcome(config.samples, 0);

  auto run = [&](std::size_t b, Tally& ts, Tally& tr) {
    Rng rng(derive_seed(config.seed, b));
    ts.clear();
    tr.clear();
    for (std::size_t s = 0; s < draw; ++s) {
      const auto i = rng.below(n);
      ts.add(system[i], gold[i]);
      tr.add(reference[i], gold[i]);
    }
    const double fs = ts.scores().macro;
    const double fr = tr.scores().macro;
    // equal confusion-derived scores can differ in the last bits
    outcome[b] = fs > fr + kTieTolerance ? 1 : (fr > fs + kTieTolerance ? -1 : 0);
  };

  std::size_t workers = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  workers = std::clamp<std::size_t>(workers, 1, config.samples);
  if (workers == 1) {
    Tally ts(num_labels), tr(num_labels);
    for (std::size_t b = 0; b < config.samples; ++b) run(b, ts, tr);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        Tally ts(num_labels), tr(num_labels);
        for (std::size_t b = next++; b < config.samples; b = next++) run(b, ts, tr);
      });
  }

  BootstrapResult r;
  for (auto o : outcome) {
    if (o > 0)
      ++r.wins;
    else if (o == 0)
      ++r.ties;
    else
      ++r.losses;
  }
  r.p_value = static_cast<double>(1 + r.ties + r.losses) / static_cast<double>(config.samples + 1);
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  if (x.size() < 2) throw DataError("correlation needs at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DataError("correlation undefined: x has zero variance");
  if (syy == 0.0) throw DataError("correlation undefined: y has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  const auto rx = mean_ranks(x);
  const auto ry = mean_ranks(y);
  return pearson(rx, ry);
}

Correlation rank_correlation(std::span<const double> x, std::span<const double> y) {
  return {spearman(x, y), pearson(x, y)};
}

Report evaluate(const LabelSpace& space, std::span<const LabelId> gold,
                const std::vector<Source>& sources, const std::string& reference,
                const BootstrapConfig& bootstrap) {
  const std::size_t K = space.size();
  Report report;
  report.labels = space.labels();
  report.n_items = gold.size();
  report.reference = reference;
  report.bootstrap = bootstrap;

  const Source* ref = nullptr;
  for (const auto& s : sources) {
    if (s.labels.size() != gold.size())
      throw DataError("source '" + s.name + "' is not aligned with the gold items");
    if (s.name == reference) ref = &s;
  }
  if (!reference.empty() && !ref) throw UsageError("unknown reference source '" + reference + "'");

  std::vector<double> comp, perf;
  double ool_weighted = 0.0, ool_items = 0.0;
  for (const auto& s : sources) {
    SourceScore score;
    score.name = s.name;
    score.competence = s.competence;
    score.ool_rate = s.ool_rate;
    std::vector<LabelId> p, g;
    for (std::size_t i = 0; i < gold.size(); ++i)
      if (s.labels[i]) {
        p.push_back(*s.labels[i]);
        g.push_back(gold[i]);
      }
    if (p.empty()) throw DataError("source '" + s.name + "' labels no gold item");
    score.n_items = p.size();
    score.f1 = macro_f1(p, g, K);
    if (ref && &s != ref) {
      std::vector<LabelId> ps, pr, gg;
      for (std::size_t i = 0; i < gold.size(); ++i)
        if (s.labels[i] && ref->labels[i]) {
          ps.push_back(*s.labels[i]);
          pr.push_back(*ref->labels[i]);
          gg.push_back(gold[i]);
        }
      if (!gg.empty()) score.bootstrap = bootstrap_test(ps, pr, gg, K, bootstrap);
    }
    if (s.competence) {
      comp.push_back(*s.competence);
      perf.push_back(score.f1.macro);
      report.correlation_sources.push_back(s.name);
    }
    if (s.ool_rate) {
      ool_weighted += *s.ool_rate * static_cast<double>(score.n_items);
      ool_items += static_cast<double>(score.n_items);
    }
    report.sources.push_back(std::move(score));
  }
  if (comp.size() >= 2) report.correlation = rank_correlation(comp, perf);
  if (ool_items > 0.0) report.ool_rate_overall = ool_weighted / ool_items;
  return report;
}

nlohmann::ordered_json to_json(const Report& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["labels"] = report.labels;
  j["n_items"] = report.n_items;
  json sources = json::object();
  for (const auto& s : report.sources) {
    json e;
    e["macro_f1"] = s.f1.macro;
    e["per_class_f1"] = s.f1.per_class;
    e["n_items"] = s.n_items;
    if (s.competence) e["competence"] = *s.competence;
    if (s.ool_rate) e["ool_rate"] = *s.ool_rate;
    if (s.bootstrap)
      e["bootstrap"] = {{"p_value", s.bootstrap->p_value},
                        {"wins", s.bootstrap->wins},
                        {"ties", s.bootstrap->ties},
                        {"losses", s.bootstrap->losses},
                        {"significant", s.bootstrap->significant()}};
    sources[s.name] = std::move(e);
  }
  j["sources"] = std::move(sources);
  j["bootstrap"] = {{"reference", report.reference},
                    {"samples", report.bootstrap.samples},
                    {"sample_frac", report.bootstrap.sample_frac},
                    {"with_replacement", true},
                    {"seed", report.bootstrap.seed},
                    {"significance_level", kSignificanceLevel}};
  if (report.correlation)
    j["correlation"] = {{"spearman", report.correlation->spearman},
                        {"pearson", report.correlation->pearson},
                        {"sources", report.correlation_sources}};
  if (report.ool_rate_overall) j["ool_rate_overall"] = *report.ool_rate_overall;
  return j;
}

std::string format_table(const Report& report, const std::string& column) {
  std::size_t width = 6;
  for (const auto& s : report.sources) width = std::max(width, s.name.size());
  const int w = static_cast<int>(width);
  const int cw = std::max(9, static_cast<int>(column.size()));
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s %*s\n", w, "Source", cw, column.c_str());
  out += buf;
  for (const auto& s : report.sources) {
    char cell[32];
    std::snprintf(cell, sizeof cell, "%.3f%s", s.f1.macro,
                  (s.bootstrap && s.bootstrap->significant()) ? "*" : " ");
    std::snprintf(buf, sizeof buf, "%-*s %*s\n", w, s.name.c_str(), cw, cell);
    out += buf;
  }
  if (!report.reference.empty()) {
    std::snprintf(buf, sizeof buf, "* p <= %.2f vs %s (bootstrap, %zu samples, %.0f%%)\n",
                  kSignificanceLevel, report.reference.c_str(), report.bootstrap.samples,
                  report.bootstrap.sample_frac * 100.0);
    out += buf;
  }
  return out;
}

}  // namespace annotagg::eval
