#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annotagg/label_data.hpp"

namespace annotagg::exemplars {

struct PoolEntry {
  std::string instance_id;
  LabelId label;   // class the entry is grouped under
  double entropy;  // any nonnegative uncertainty score
};

struct Pool {
  std::vector<PoolEntry> entries;
  std::size_t cap = 4000;
};

enum class Strategy { low_entropy, max_entropy, random };

Strategy strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

/// Pool of at most `cap` entries, drawn uniformly without replacement (by
/// instance id order, so the input order is irrelevant) when there are more.
Pool make_pool(std::vector<PoolEntry> entries, std::size_t cap, std::uint64_t seed);

/// `k_per_class` instance ids per class present in the pool: the lowest or
/// highest entropies (ties by instance id), or a seeded uniform draw. Throws
/// DataError naming a class with fewer than k entries.
std::map<LabelId, std::vector<std::string>> select(const Pool& pool, std::size_t k_per_class,
                                                   Strategy strategy, std::uint64_t seed);

nlohmann::ordered_json to_json(const std::map<LabelId, std::vector<std::string>>& selection,
                               const LabelSpace& space);
std::map<LabelId, std::vector<std::string>> selection_from_json(const nlohmann::ordered_json& j,
                                                                const LabelSpace& space);

struct EntropyRow {
  std::string item_id;
  double entropy;
};
std::vector<EntropyRow> read_entropy_csv(std::istream& in);

}  // namespace annotagg::exemplars
