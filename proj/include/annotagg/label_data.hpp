#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace annotagg {

/// Position of a label within its LabelSpace.
using LabelId = std::size_t;

/// Lowercases (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic), trims
/// whitespace, strips one layer of surrounding quotes and trailing sentence
/// punctuation.
std::string canonicalize(std::string_view text);

/// Ordered set of class labels for one task.
class LabelSpace {
 public:
  LabelSpace() = default;
  /// `aliases` maps extra surface forms to a label name.
  explicit LabelSpace(std::vector<std::string> labels,
                      const std::map<std::string, std::string>& aliases = {});

  std::size_t size() const { return labels_.size(); }
  const std::string& name(LabelId id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Exact match of the canonical form of `text` against labels and aliases.
  std::optional<LabelId> find(std::string_view text) const;
  /// Like find() but throws DataError for unknown labels.
  LabelId index_of(std::string_view text) const;

  /// (canonical form, label) pairs including aliases, in label order.
  const std::vector<std::pair<std::string, LabelId>>& forms() const { return forms_; }

  bool operator==(const LabelSpace& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::vector<std::pair<std::string, LabelId>> forms_;
  std::unordered_map<std::string, LabelId> canonical_;
};

struct Instance {
  std::string id;
  std::string text;
  std::optional<LabelId> gold;
  std::optional<LabelId> class_hint;

  bool operator==(const Instance&) const = default;
};

struct Dataset {
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
  /// Instance with the given id, or nullptr.
  const Instance* find(std::string_view id) const;
  /// Gold labels in instance order; throws DataError if any instance lacks gold.
  std::vector<LabelId> gold_labels() const;

  bool operator==(const Dataset&) const = default;
};

enum class DatasetFormat { jsonl, csv };

/// jsonl for *.jsonl / *.json, csv otherwise.
DatasetFormat format_from_path(const std::filesystem::path& path);

Dataset load_dataset(std::istream& in, DatasetFormat format, const LabelSpace& space);
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LabelSpace& space);
void save_dataset(std::ostream& out, const Dataset& dataset, DatasetFormat format,
                  const LabelSpace& space);

struct NormalizedLabel {
  LabelId label;
  bool was_ool;

  bool operator==(const NormalizedLabel&) const = default;
};

/// Maps free-form annotator output onto the label space. Exact canonical match
/// first; then the label whose canonical form occurs as a whole word earliest
/// in the canonicalized text (longest form at the same position, then label
/// order); otherwise `fallback` with was_ool set.
NormalizedLabel normalize_response(std::string_view raw, const LabelSpace& space,
                                   LabelId fallback);

struct AnnotationRecord {
  std::string item_id;
  std::string annotator_id;
  std::string raw;
  std::optional<LabelId> label;
  bool was_ool = false;

  bool operator==(const AnnotationRecord&) const = default;
};

/// Fills label/was_ool on every record from its raw text.
std::vector<AnnotationRecord> normalize_records(std::vector<AnnotationRecord> records,
                                                const LabelSpace& space, LabelId fallback);

/// Modal label with ties broken by label order; nullopt for an empty input.
std::optional<LabelId> most_common_label(std::span<const LabelId> labels, std::size_t num_labels);

enum class OolGrouping { annotator, all };

/// Fraction of records flagged out-of-label, per annotator or under the single
/// key "all". Throws DataError on an empty record list.
std::map<std::string, double> ool_rate(std::span<const AnnotationRecord> records,
                                       OolGrouping group_by);

/// Long-format annotation CSV with columns item_id,annotator_id and either raw
/// or label (plus optional was_ool).
std::vector<AnnotationRecord> read_annotations_csv(std::istream& in, const LabelSpace& space);
/// Replay/response JSONL lines {"annotator_id","item_id","response"}.
std::vector<AnnotationRecord> read_responses_jsonl(std::istream& in);
void write_responses_jsonl(std::ostream& out, std::span<const AnnotationRecord> records);

/// Items x annotators table of optional labels.
class AnnotationMatrix {
 public:
  AnnotationMatrix() = default;
  AnnotationMatrix(LabelSpace space, std::vector<std::string> item_ids,
                   std::vector<std::string> annotator_ids);

  /// Builds from labelled records. Items and annotators appear in
  /// first-seen order unless `item_order` is given, in which case records for
  /// unknown items are rejected.
  static AnnotationMatrix from_records(std::span<const AnnotationRecord> records,
                                       const LabelSpace& space,
                                       const std::vector<std::string>* item_order = nullptr);

  std::size_t n_items() const { return item_ids_.size(); }
  std::size_t n_annotators() const { return annotator_ids_.size(); }
  std::size_t num_labels() const { return space_.size(); }
  const LabelSpace& label_space() const { return space_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& annotator_ids() const { return annotator_ids_; }

  std::optional<LabelId> at(std::size_t item, std::size_t annotator) const {
    return cells_[item * annotator_ids_.size() + annotator];
  }
  bool was_ool(std::size_t item, std::size_t annotator) const {
    return ool_[item * annotator_ids_.size() + annotator] != 0;
  }
  void set(std::size_t item, std::size_t annotator, std::optional<LabelId> label,
           bool was_ool = false);

  /// Number of present cells in row `item`.
  std::size_t row_count(std::size_t item) const;
  /// Throws DataError naming the first item without annotations.
  void require_nonempty_rows() const;

  /// Present cells as records (raw = label name), item-major.
  std::vector<AnnotationRecord> records() const;

  bool operator==(const AnnotationMatrix&) const = default;

 private:
  LabelSpace space_;
  std::vector<std::string> item_ids_;
  std::vector<std::string> annotator_ids_;
  std::vector<std::optional<LabelId>> cells_;
  std::vector<unsigned char> ool_;
};

/// CSV item_id,annotator_id,label,was_ool with one line per present cell.
void write_matrix_csv(std::ostream& out, const AnnotationMatrix& matrix);
AnnotationMatrix read_matrix_csv(std::istream& in, const LabelSpace& space);

}  // namespace annotagg
