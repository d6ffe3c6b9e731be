#include "annotagg/label_data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "annotagg/csv.hpp"
#include "annotagg/error.hpp"

namespace annotagg {

namespace {

using json = nlohmann::ordered_json;

// UTF-8 decode/encode of a single code point; malformed bytes pass through.
std::size_t decode_utf8(std::string_view s, std::size_t pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) {
    return pos + k < s.size() && (static_cast<unsigned char>(s[pos + k]) & 0xC0) == 0x80;
  };
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    cp = ((b0 & 0x1F) << 6) | (s[pos + 1] & 0x3F);
    return 2;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    cp = ((b0 & 0x0F) << 12) | ((s[pos + 1] & 0x3F) << 6) | (s[pos + 2] & 0x3F);
    return 3;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    cp = ((b0 & 0x07) << 18) | ((s[pos + 1] & 0x3F) << 12) | ((s[pos + 2] & 0x3F) << 6) |
         (s[pos + 3] & 0x3F);
    return 4;
  }
  cp = 0xFFFFFFFF;
  return 1;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 32;
  if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
  if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  return c;
}

std::string lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) {
    char32_t cp;
    const std::size_t n = decode_utf8(s, pos, cp);
    if (cp == 0xFFFFFFFF)
      out.push_back(s[pos]);
    else
      encode_utf8(to_lower(cp), out);
    pos += n;
  }
  return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view strip_trailing_punct(std::string_view s) {
  while (!s.empty()) {
    const char c = s.back();
    if (c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':')
      s.remove_suffix(1);
    else if (s.size() >= 3 && s.substr(s.size() - 3) == "\xE2\x80\xA6")  // ellipsis
      s.remove_suffix(3);
    else
      break;
    s = trim(s);
  }
  return s;
}

std::string_view strip_quotes(std::string_view s) {
  static constexpr std::pair<std::string_view, std::string_view> kPairs[] = {
      {"``", "''"},
      {"\"", "\""},
      {"'", "'"},
      {"`", "`"},
      {"\xE2\x80\x9C", "\xE2\x80\x9D"},  // “ ”
      {"\xE2\x80\x98", "\xE2\x80\x99"},  // ‘ ’
      {"\xE2\x80\x9E", "\xE2\x80\x9C"},  // „ “
      {"\xC2\xAB", "\xC2\xBB"},          // « »
  };
  for (auto [open, close] : kPairs) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close))
      return s.substr(open.size(), s.size() - open.size() - close.size());
  }
  return s;
}

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c >= 0x80;
}

std::optional<LabelId> label_field(const json& value, const LabelSpace& space, std::size_t line,
                                   const char* field) {
  if (value.is_null()) return std::nullopt;
  std::string text;
  if (value.is_string())
    text = value.get<std::string>();
  else if (value.is_number_integer())
    text = std::to_string(value.get<long long>());
  else
    throw DataError("line " + std::to_string(line) + ": field '" + field +
                    "' must be a string label");
  if (trim(text).empty()) return std::nullopt;
  auto id = space.find(text);
  if (!id)
    throw DataError("line " + std::to_string(line) + ": unknown label '" + text + "' in field '" +
                    field + "'");
  return id;
}

}  // namespace

std::string canonicalize(std::string_view text) {
  std::string_view s = trim(text);
  s = strip_trailing_punct(s);
  s = trim(strip_quotes(s));
  s = strip_trailing_punct(s);
  return lowercase(s);
}

LabelSpace::LabelSpace(std::vector<std::string> labels,
                       const std::map<std::string, std::string>& aliases)
    : labels_(std::move(labels)) {
  if (labels_.size() < 2)
    throw UsageError("a label space needs at least 2 labels, got " +
                     std::to_string(labels_.size()));
  for (LabelId k = 0; k < labels_.size(); ++k) {
    const std::string form = canonicalize(labels_[k]);
    if (form.empty()) throw UsageError("empty label at position " + std::to_string(k));
    if (!canonical_.emplace(form, k).second)
      throw UsageError("duplicate label '" + labels_[k] + "' after canonicalization");
    forms_.emplace_back(form, k);
  }
  for (const auto& [alias, target] : aliases) {
    auto it = canonical_.find(canonicalize(target));
    if (it == canonical_.end() || labels_[it->second] != target)
      throw UsageError("alias '" + alias + "' refers to unknown label '" + target + "'");
    const std::string form = canonicalize(alias);
    if (form.empty()) throw UsageError("empty alias for label '" + target + "'");
    auto [pos, inserted] = canonical_.emplace(form, it->second);
    if (!inserted && pos->second != it->second)
      throw UsageError("alias '" + alias + "' collides with another label");
    if (inserted) forms_.emplace_back(form, it->second);
  }
  std::stable_sort(forms_.begin(), forms_.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
}

std::optional<LabelId> LabelSpace::find(std::string_view text) const {
  auto it = canonical_.find(canonicalize(text));
  if (it == canonical_.end()) return std::nullopt;
  return it->second;
}

LabelId LabelSpace::index_of(std::string_view text) const {
  auto id = find(text);
  if (!id) throw DataError("unknown label '" + std::string(text) + "'");
  return *id;
}

const Instance* Dataset::find(std::string_view id) const {
  for (const auto& inst : instances)
    if (inst.id == id) return &inst;
  return nullptr;
}

std::vector<LabelId> Dataset::gold_labels() const {
  std::vector<LabelId> gold;
  gold.reserve(instances.size());
  for (const auto& inst : instances) {
    if (!inst.gold) throw DataError("instance '" + inst.id + "' has no gold label");
    gold.push_back(*inst.gold);
  }
  return gold;
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? DatasetFormat::jsonl
                                                                  : DatasetFormat::csv;
}

Dataset load_dataset(std::istream& in, DatasetFormat format, const LabelSpace& space) {
  Dataset ds;
  std::unordered_set<std::string> seen;
  auto add = [&](Instance inst, std::size_t line) {
    if (!seen.insert(inst.id).second)
      throw DataError("line " + std::to_string(line) + ": duplicate instance id '" + inst.id + "'");
    ds.instances.push_back(std::move(inst));
  };

  if (format == DatasetFormat::jsonl) {
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (trim(text).empty()) continue;
      json obj;
      try {
        obj = json::parse(text);
      } catch (const json::parse_error& e) {
        throw DataError("line " + std::to_string(line) + ": invalid JSON: " + e.what());
      }
      if (!obj.is_object() || !obj.contains("id") || !obj.contains("text"))
        throw DataError("line " + std::to_string(line) + ": record needs 'id' and 'text'");
      Instance inst;
      const auto& id = obj["id"];
      if (id.is_string())
        inst.id = id.get<std::string>();
      else if (id.is_number_integer())
        inst.id = std::to_string(id.get<long long>());
      else
        throw DataError("line " + std::to_string(line) + ": 'id' must be a string or integer");
      if (!obj["text"].is_string())
        throw DataError("line " + std::to_string(line) + ": 'text' must be a string");
      inst.text = obj["text"].get<std::string>();
      if (obj.contains("gold")) inst.gold = label_field(obj["gold"], space, line, "gold");
      if (obj.contains("class_hint"))
        inst.class_hint = label_field(obj["class_hint"], space, line, "class_hint");
      add(std::move(inst), line);
    }
    return ds;
  }

  csv::Table table(in);
  if (table.header().empty()) return ds;
  const auto id_col = table.column("id");
  const auto text_col = table.column("text");
  const bool has_gold = table.has_column("gold");
  const auto gold_col = has_gold ? table.column("gold") : 0;
  while (auto row = table.next()) {
    Instance inst;
    inst.id = row->fields[id_col];
    inst.text = row->fields[text_col];
    if (inst.id.empty()) throw DataError("line " + std::to_string(row->line) + ": empty id");
    if (has_gold) inst.gold = label_field(json(row->fields[gold_col]), space, row->line, "gold");
    add(std::move(inst), row->line);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LabelSpace& space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  try {
    return load_dataset(in, format, space);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_dataset(std::ostream& out, const Dataset& dataset, DatasetFormat format,
                  const LabelSpace& space) {
  if (format == DatasetFormat::jsonl) {
    for (const auto& inst : dataset.instances) {
      json obj;
      obj["id"] = inst.id;
      obj["text"] = inst.text;
      if (inst.gold) obj["gold"] = space.name(*inst.gold);
      if (inst.class_hint) obj["class_hint"] = space.name(*inst.class_hint);
      out << obj.dump() << '\n';
    }
    return;
  }
  csv::write_row(out, {"id", "text", "gold"});
  for (const auto& inst : dataset.instances)
    csv::write_row(out, {inst.id, inst.text, inst.gold ? space.name(*inst.gold) : ""});
}

NormalizedLabel normalize_response(std::string_view raw, const LabelSpace& space,
                                   LabelId fallback) {
  if (fallback >= space.size()) throw UsageError("fallback label out of range");
  const std::string text = canonicalize(raw);
  if (auto exact = space.find(text)) return {*exact, false};

  std::size_t best_pos = std::string::npos;
  std::size_t best_len = 0;
  std::optional<LabelId> best;
  for (const auto& [form, label] : space.forms()) {
    for (std::size_t pos = text.find(form); pos != std::string::npos;
         pos = text.find(form, pos + 1)) {
      const std::size_t end = pos + form.size();
      const bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(text[pos - 1]));
      const bool right_ok =
          end == text.size() || !is_word_byte(static_cast<unsigned char>(text[end]));
      if (!left_ok || !right_ok) continue;
      if (pos < best_pos || (pos == best_pos && form.size() > best_len)) {
        best_pos = pos;
        best_len = form.size();
        best = label;
      }
      break;  // later occurrences of this form can only be worse
    }
  }
  if (best) return {*best, false};
  return {fallback, true};
}

std::vector<AnnotationRecord> normalize_records(std::vector<AnnotationRecord> records,
                                                const LabelSpace& space, LabelId fallback) {
  for (auto& rec : records) {
    const auto result = normalize_response(rec.raw, space, fallback);
    rec.label = result.label;
    rec.was_ool = result.was_ool;
  }
  return records;
}

std::optional<LabelId> most_common_label(std::span<const LabelId> labels, std::size_t num_labels) {
  if (labels.empty()) return std::nullopt;
  std::vector<std::size_t> counts(num_labels, 0);
  for (LabelId l : labels) {
    if (l >= num_labels) throw DataError("label index out of range");
    ++counts[l];
  }
  return static_cast<LabelId>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::map<std::string, double> ool_rate(std::span<const AnnotationRecord> records,
                                       OolGrouping group_by) {
  if (records.empty()) throw DataError("ool_rate needs at least one record");
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // (ool, total)
  for (const auto& rec : records) {
    auto& t = tally[group_by == OolGrouping::all ? std::string("all") : rec.annotator_id];
    t.first += rec.was_ool ? 1 : 0;
    ++t.second;
  }
  std::map<std::string, double> rates;
  for (const auto& [key, t] : tally)
    rates[key] = static_cast<double>(t.first) / static_cast<double>(t.second);
  return rates;
}

std::vector<AnnotationRecord> read_annotations_csv(std::istream& in, const LabelSpace& space) {
  csv::Table table(in);
  std::vector<AnnotationRecord> records;
  if (table.header().empty()) return records;
  const auto item_col = table.column("item_id");
  const auto annot_col = table.column("annotator_id");
  const bool has_label = table.has_column("label");
  if (!has_label && !table.has_column("raw"))
    throw DataError("annotation CSV needs a 'raw' or 'label' column");
  const auto value_col = has_label ? table.column("label") : table.column("raw");
  const bool has_ool = table.has_column("was_ool");
  const auto ool_col = has_ool ? table.column("was_ool") : 0;
  while (auto row = table.next()) {
    AnnotationRecord rec;
    rec.item_id = row->fields[item_col];
    rec.annotator_id = row->fields[annot_col];
    rec.raw = row->fields[value_col];
    if (has_label) {
      rec.label = space.find(rec.raw);
      if (!rec.label)
        throw DataError("CSV line " + std::to_string(row->line) + ": unknown label '" + rec.raw +
                        "'");
      if (has_ool) {
        const auto& v = row->fields[ool_col];
        rec.was_ool = (v == "1" || v == "true");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<AnnotationRecord> read_responses_jsonl(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("annotator_id") || !obj.contains("item_id") ||
        !obj.contains("response") || !obj["annotator_id"].is_string() ||
        !obj["item_id"].is_string() || !obj["response"].is_string())
      throw DataError("line " + std::to_string(line) +
                      ": expected string fields annotator_id, item_id, response");
    AnnotationRecord rec;
    rec.annotator_id = obj["annotator_id"].get<std::string>();
    rec.item_id = obj["item_id"].get<std::string>();
    rec.raw = obj["response"].get<std::string>();
    records.push_back(std::move(rec));
  }
  return records;
}

void write_responses_jsonl(std::ostream& out, std::span<const AnnotationRecord> records) {
  for (const auto& rec : records) {
    json obj;
    obj["annotator_id"] = rec.annotator_id;
    obj["item_id"] = rec.item_id;
    obj["response"] = rec.raw;
    out << obj.dump() << '\n';
  }
}

AnnotationMatrix::AnnotationMatrix(LabelSpace space, std::vector<std::string> item_ids,
                                   std::vector<std::string> annotator_ids)
    : space_(std::move(space)),
      item_ids_(std::move(item_ids)),
      annotator_ids_(std::move(annotator_ids)),
      cells_(item_ids_.size() * annotator_ids_.size()),
      ool_(item_ids_.size() * annotator_ids_.size(), 0) {
  if (annotator_ids_.empty()) throw DataError("annotation matrix needs at least one annotator");
  std::set<std::string_view> seen(item_ids_.begin(), item_ids_.end());
  if (seen.size() != item_ids_.size()) throw DataError("duplicate item id in annotation matrix");
  std::set<std::string_view> seen_a(annotator_ids_.begin(), annotator_ids_.end());
  if (seen_a.size() != annotator_ids_.size())
    throw DataError("duplicate annotator id in annotation matrix");
}

AnnotationMatrix AnnotationMatrix::from_records(std::span<const AnnotationRecord> records,
                                                const LabelSpace& space,
                                                const std::vector<std::string>* item_order) {
  std::vector<std::string> items;
  std::vector<std::string> annotators;
  std::unordered_map<std::string, std::size_t> item_index;
  std::unordered_map<std::string, std::size_t> annot_index;
  if (item_order) {
    items = *item_order;
    for (std::size_t i = 0; i < items.size(); ++i) item_index.emplace(items[i], i);
  }
  for (const auto& rec : records) {
    if (!item_index.count(rec.item_id)) {
      if (item_order) throw DataError("annotation for unknown item '" + rec.item_id + "'");
      item_index.emplace(rec.item_id, items.size());
      items.push_back(rec.item_id);
    }
    if (annot_index.emplace(rec.annotator_id, annotators.size()).second)
      annotators.push_back(rec.annotator_id);
  }
  AnnotationMatrix m(space, std::move(items), std::move(annotators));
  for (const auto& rec : records) {
    if (!rec.label)
      throw DataError("record for item '" + rec.item_id + "' by '" + rec.annotator_id +
                      "' is not normalized");
    if (*rec.label >= space.size()) throw DataError("label index out of range");
    const auto i = item_index.at(rec.item_id);
    const auto j = annot_index.at(rec.annotator_id);
    if (m.at(i, j))
      throw DataError("duplicate annotation for item '" + rec.item_id + "' by '" +
                      rec.annotator_id + "'");
    m.set(i, j, rec.label, rec.was_ool);
  }
  return m;
}

void AnnotationMatrix::set(std::size_t item, std::size_t annotator, std::optional<LabelId> label,
                           bool was_ool) {
  if (label && *label >= space_.size()) throw DataError("label index out of range");
  const auto idx = item * annotator_ids_.size() + annotator;
  cells_.at(idx) = label;
  ool_.at(idx) = (label && was_ool) ? 1 : 0;
}

std::size_t AnnotationMatrix::row_count(std::size_t item) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < annotator_ids_.size(); ++j) n += at(item, j) ? 1 : 0;
  return n;
}

void AnnotationMatrix::require_nonempty_rows() const {
  for (std::size_t i = 0; i < n_items(); ++i)
    if (row_count(i) == 0) throw DataError("item '" + item_ids_[i] + "' has no annotations");
}

std::vector<AnnotationRecord> AnnotationMatrix::records() const {
  std::vector<AnnotationRecord> out;
  for (std::size_t i = 0; i < n_items(); ++i)
    for (std::size_t j = 0; j < n_annotators(); ++j)
      if (auto l = at(i, j))
        out.push_back({item_ids_[i], annotator_ids_[j], space_.name(*l), l, was_ool(i, j)});
  return out;
}

void write_matrix_csv(std::ostream& out, const AnnotationMatrix& matrix) {
  csv::write_row(out, {"item_id", "annotator_id", "label", "was_ool"});
  for (const auto& rec : matrix.records())
    csv::write_row(out, {rec.item_id, rec.annotator_id, rec.raw, rec.was_ool ? "1" : "0"});
}

AnnotationMatrix read_matrix_csv(std::istream& in, const LabelSpace& space) {
  const auto records = read_annotations_csv(in, space);
  for (const auto& rec : records)
    if (!rec.label) throw DataError("matrix CSV needs a 'label' column");
  return AnnotationMatrix::from_records(records, space);
}

}  // namespace annotagg
