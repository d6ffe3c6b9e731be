#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annotagg/label_data.hpp"

namespace annotagg {

struct VoteOutcome {
  LabelId label;
  bool was_tie;
  std::vector<LabelId> tied_set;  // ascending; the single winner when there is no tie

  bool operator==(const VoteOutcome&) const = default;
};

/// Modal label per item. Ties are split uniformly at random from a stream
/// keyed by (seed, item id), so adding or removing items leaves other items'
/// tie-breaks unchanged. Throws DataError for an item without annotations.
std::vector<VoteOutcome> majority_vote(const AnnotationMatrix& matrix, std::uint64_t seed);

/// Constant prediction of the modal label of `source` (ties by label order).
/// Throws DataError when `source` is empty.
std::vector<LabelId> most_frequent_baseline(std::span<const LabelId> source,
                                            std::size_t num_labels, std::size_t n_items);
std::vector<LabelId> most_frequent_baseline(LabelId label, std::size_t n_items);

/// I.i.d. uniform labels.
std::vector<LabelId> random_baseline(const LabelSpace& space, std::size_t n_items,
                                     std::uint64_t seed);

/// Aggregated labels as CSV item_id,label,method. Abstentions are omitted.
void write_labels_csv(std::ostream& out, const LabelSpace& space,
                      const std::vector<std::string>& item_ids,
                      std::span<const std::optional<LabelId>> labels, const std::string& method);

struct LabelledItem {
  std::string item_id;
  LabelId label;
  std::string method;
};
std::vector<LabelledItem> read_labels_csv(std::istream& in, const LabelSpace& space);

}  // namespace annotagg
