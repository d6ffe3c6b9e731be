#include "annotagg/baselines.hpp"

#include <algorithm>
#include <ostream>

#include "annotagg/csv.hpp"
#include "annotagg/error.hpp"
#include "annotagg/random.hpp"

namespace annotagg {

std::vector<VoteOutcome> majority_vote(const AnnotationMatrix& matrix, std::uint64_t seed) {
  matrix.require_nonempty_rows();
  const std::size_t K = matrix.num_labels();
  std::vector<VoteOutcome> out;
  out.reserve(matrix.n_items());
  std::vector<std::size_t> counts(K);
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < matrix.n_annotators(); ++j)
      if (auto a = matrix.at(i, j)) ++counts[*a];
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    VoteOutcome v{0, false, {}};
    for (LabelId k = 0; k < K; ++k)
      if (counts[k] == top) v.tied_set.push_back(k);
    if (v.tied_set.size() == 1) {
      v.label = v.tied_set.front();
    } else {
      Rng rng(derive_seed(seed, hash_string(matrix.item_ids()[i])));
      v.label = v.tied_set[rng.below(v.tied_set.size())];
      v.was_tie = true;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<LabelId> most_frequent_baseline(std::span<const LabelId> source,
                                            std::size_t num_labels, std::size_t n_items) {
  auto mode = most_common_label(source, num_labels);
  if (!mode) throw DataError("most-frequent baseline needs a non-empty label source");
  return std::vector<LabelId>(n_items, *mode);
}

std::vector<LabelId> most_frequent_baseline(LabelId label, std::size_t n_items) {
  return std::vector<LabelId>(n_items, label);
}

std::vector<LabelId> random_baseline(const LabelSpace& space, std::size_t n_items,
                                     std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x72616e64ULL));
  std::vector<LabelId> out(n_items);
  for (auto& l : out) l = rng.below(space.size());
  return out;
}

void write_labels_csv(std::ostream& out, const LabelSpace& space,
                      const std::vector<std::string>& item_ids,
                      std::span<const std::optional<LabelId>> labels, const std::string& method) {
  if (item_ids.size() != labels.size()) throw UsageError("labels and item ids differ in length");
  csv::write_row(out, {"item_id", "label", "method"});
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) csv::write_row(out, {item_ids[i], space.name(*labels[i]), method});
}

std::vector<LabelledItem> read_labels_csv(std::istream& in, const LabelSpace& space) {
  csv::Table table(in);
  std::vector<LabelledItem> out;
  if (table.header().empty()) return out;
  const auto item_col = table.column("item_id");
  const auto label_col = table.column("label");
  const bool has_method = table.has_column("method");
  const auto method_col = has_method ? table.column("method") : 0;
  while (auto row = table.next()) {
    auto l = space.find(row->fields[label_col]);
    if (!l)
      throw DataError("CSV line " + std::to_string(row->line) + ": unknown label '" +
                      row->fields[label_col] + "'");
    out.push_back({row->fields[item_col], *l, has_method ? row->fields[method_col] : "labels"});
  }
  return out;
}

}  // namespace annotagg
