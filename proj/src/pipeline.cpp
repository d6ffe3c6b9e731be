#include "annotagg/pipeline.hpp"

#include <fstream>
#include <map>
#include <unordered_map>

#include "annotagg/csv.hpp"
#include "annotagg/error.hpp"

namespace annotagg::pipeline {

GoldSet gold_from_dataset(const Dataset& dataset) {
  GoldSet g;
  for (const auto& inst : dataset.instances)
    if (inst.gold) {
      g.item_ids.push_back(inst.id);
      g.labels.push_back(*inst.gold);
    }
  return g;
}

GoldSet load_gold(const std::filesystem::path& path, const LabelSpace& space) {
  const auto format = format_from_path(path);
  if (format == DatasetFormat::csv) {
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open gold file '" + path.string() + "'");
    csv::Table table(probe);
    if (table.has_column("item_id") && table.has_column("label")) {
      GoldSet g;
      const auto id_col = table.column("item_id");
      const auto label_col = table.column("label");
      std::map<std::string, bool> seen;
      while (auto row = table.next()) {
        const auto& id = row->fields[id_col];
        if (!seen.emplace(id, true).second)
          throw DataError(path.string() + ": duplicate item id '" + id + "'");
        auto l = space.find(row->fields[label_col]);
        if (!l)
          throw DataError(path.string() + ": line " + std::to_string(row->line) +
                          ": unknown label '" + row->fields[label_col] + "'");
        g.item_ids.push_back(id);
        g.labels.push_back(*l);
      }
      return g;
    }
  }
  return gold_from_dataset(load_dataset(path, format, space));
}

LabelId resolve_fallback(const LabelSpace& space, const Dataset* dataset,
                         std::span<const AnnotationRecord> responses,
                         const std::optional<std::string>& override_label) {
  if (override_label) return space.index_of(*override_label);
  if (dataset) {
    const auto gold = gold_from_dataset(*dataset);
    if (auto mode = most_common_label(gold.labels, space.size())) return *mode;
  }
  std::vector<LabelId> normalized;
  for (const auto& r : responses) {
    const auto n = normalize_response(r.raw, space, 0);
    if (!n.was_ool) normalized.push_back(n.label);
  }
  if (auto mode = most_common_label(normalized, space.size())) return *mode;
  return 0;
}

eval::Report evaluate(const EvaluationInputs& in) {
  if (!in.space) throw UsageError("evaluation needs a label space");
  const LabelSpace& space = *in.space;
  const std::size_t n = in.gold.item_ids.size();
  if (n == 0) throw DataError("no gold-labelled items to evaluate against");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(in.gold.item_ids[i], i);
  auto locate = [&](const std::string& id, const std::string& what) {
    auto it = index.find(id);
    if (it == index.end())
      throw DataError("item id mismatch: '" + id + "' from " + what + " has no gold label");
    return it->second;
  };

  std::vector<eval::Source> sources;
  if (in.matrix) {
    const auto& m = *in.matrix;
    std::vector<std::size_t> row_of(m.n_items());
    for (std::size_t i = 0; i < m.n_items(); ++i) row_of[i] = locate(m.item_ids()[i], "the annotation matrix");
    std::map<std::string, double> competence;
    for (const auto& c : in.competence) competence[c.annotator_id] = c.competence;
    for (std::size_t j = 0; j < m.n_annotators(); ++j) {
      eval::Source s;
      s.name = m.annotator_ids()[j];
      s.labels.assign(n, std::nullopt);
      std::size_t present = 0, ool = 0;
      for (std::size_t i = 0; i < m.n_items(); ++i)
        if (auto a = m.at(i, j)) {
          s.labels[row_of[i]] = *a;
          ++present;
          ool += m.was_ool(i, j) ? 1 : 0;
        }
      if (present > 0) s.ool_rate = static_cast<double>(ool) / static_cast<double>(present);
      if (auto it = competence.find(s.name); it != competence.end()) s.competence = it->second;
      sources.push_back(std::move(s));
    }
  }
  if (in.baselines) {
    const auto mf = most_frequent_baseline(in.gold.labels, space.size(), n);
    const auto rnd = random_baseline(space, n, in.baseline_seed);
    sources.push_back({"most_frequent", {mf.begin(), mf.end()}, {}, {}});
    sources.push_back({"random", {rnd.begin(), rnd.end()}, {}, {}});
  }
  std::vector<std::string> methods;
  std::map<std::string, std::size_t> method_index;
  for (const auto& item : in.labels) {
    auto [it, inserted] = method_index.emplace(item.method, sources.size());
    if (inserted) {
      methods.push_back(item.method);
      sources.push_back({item.method, std::vector<std::optional<LabelId>>(n), {}, {}});
    }
    auto& slot = sources[it->second].labels[locate(item.item_id, "labels of '" + item.method + "'")];
    if (slot) throw DataError("duplicate label for item '" + item.item_id + "' in method '" + item.method + "'");
    slot = item.label;
  }
  std::string reference = in.reference;
  if (!in.baselines && reference == "random") reference.clear();
  return eval::evaluate(space, in.gold.labels, sources, reference, in.bootstrap);
}

}  // namespace annotagg::pipeline
