#include "annotagg/exemplars.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "annotagg/csv.hpp"
#include "annotagg/error.hpp"
#include "annotagg/random.hpp"

namespace annotagg::exemplars {

namespace {

bool by_id(const PoolEntry& a, const PoolEntry& b) { return a.instance_id < b.instance_id; }

// Partial Fisher-Yates: the first k entries become a uniform sample.
template <typename T>
void shuffle_prefix(std::vector<T>& v, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k && i + 1 < v.size(); ++i) {
    const auto j = i + rng.below(v.size() - i);
    std::swap(v[i], v[j]);
  }
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  if (name == "low_entropy" || name == "low") return Strategy::low_entropy;
  if (name == "max_entropy" || name == "max") return Strategy::max_entropy;
  if (name == "random") return Strategy::random;
  throw UsageError("unknown selection strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::low_entropy: return "low_entropy";
    case Strategy::max_entropy: return "max_entropy";
    case Strategy::random: return "random";
  }
  return "";
}

Pool make_pool(std::vector<PoolEntry> entries, std::size_t cap, std::uint64_t seed) {
  for (const auto& e : entries)
    if (!std::isfinite(e.entropy) || e.entropy < 0.0)
      throw DataError("entropy of '" + e.instance_id + "' is not a finite nonnegative number");
  std::sort(entries.begin(), entries.end(), by_id);
  if (entries.size() > cap) {
    Rng rng(derive_seed(seed, 0x706f6f6cULL));
    shuffle_prefix(entries, cap, rng);
    entries.resize(cap);
    std::sort(entries.begin(), entries.end(), by_id);
  }
  return Pool{std::move(entries), cap};
}

std::map<LabelId, std::vector<std::string>> select(const Pool& pool, std::size_t k_per_class,
                                                   Strategy strategy, std::uint64_t seed) {
  std::map<LabelId, std::vector<PoolEntry>> by_class;
  for (const auto& e : pool.entries) {
    if (!std::isfinite(e.entropy))
      throw DataError("entropy of '" + e.instance_id + "' is not finite");
    by_class[e.label].push_back(e);
  }
  std::map<LabelId, std::vector<std::string>> out;
  for (auto& [label, entries] : by_class) {
    if (entries.size() < k_per_class)
      throw DataError("class " + std::to_string(label) + " has " + std::to_string(entries.size()) +
                      " pool entries, fewer than " + std::to_string(k_per_class));
    std::sort(entries.begin(), entries.end(), by_id);
    switch (strategy) {
      case Strategy::low_entropy:
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.entropy < b.entropy; });
        break;
      case Strategy::max_entropy:
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.entropy > b.entropy; });
        break;
      case Strategy::random: {
        Rng rng(derive_seed(seed, label));
        shuffle_prefix(entries, k_per_class, rng);
        break;
      }
    }
    auto& ids = out[label];
    for (std::size_t i = 0; i < k_per_class; ++i) ids.push_back(entries[i].instance_id);
  }
  return out;
}

nlohmann::ordered_json to_json(const std::map<LabelId, std::vector<std::string>>& selection,
                               const LabelSpace& space) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [label, ids] : selection) j[space.name(label)] = ids;
  return j;
}

std::map<LabelId, std::vector<std::string>> selection_from_json(const nlohmann::ordered_json& j,
                                                                const LabelSpace& space) {
  if (!j.is_object()) throw DataError("exemplar selection must be a JSON object");
  std::map<LabelId, std::vector<std::string>> out;
  for (const auto& [name, ids] : j.items()) {
    const auto label = space.index_of(name);
    if (!ids.is_array()) throw DataError("exemplars for '" + name + "' must be an array");
    for (const auto& id : ids) {
      if (!id.is_string()) throw DataError("exemplar ids must be strings");
      out[label].push_back(id.get<std::string>());
    }
  }
  return out;
}

std::vector<EntropyRow> read_entropy_csv(std::istream& in) {
  csv::Table table(in);
  std::vector<EntropyRow> out;
  if (table.header().empty()) return out;
  const auto id_col = table.column("item_id");
  const auto h_col = table.column("entropy");
  while (auto row = table.next()) {
    try {
      out.push_back({row->fields[id_col], std::stod(row->fields[h_col])});
    } catch (const std::logic_error&) {
      throw DataError("CSV line " + std::to_string(row->line) + ": bad entropy value");
    }
  }
  return out;
}

}  // namespace annotagg::exemplars
