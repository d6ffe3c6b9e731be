#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annotagg/baselines.hpp"
#include "annotagg/evaluation.hpp"
#include "annotagg/label_data.hpp"
#include "annotagg/mace.hpp"

namespace annotagg::pipeline {

/// Items with gold labels, in file order.
struct GoldSet {
  std::vector<std::string> item_ids;
  std::vector<LabelId> labels;
};

/// Reads gold from a dataset (JSONL, or CSV with id,text,gold) or from a
/// truth CSV with item_id,label. Instances without gold are skipped.
GoldSet load_gold(const std::filesystem::path& path, const LabelSpace& space);
GoldSet gold_from_dataset(const Dataset& dataset);

/// Label substituted for out-of-label responses. An explicit override wins;
/// otherwise the most common gold label when the dataset has gold; otherwise
/// the most common label among responses that normalize without fallback.
LabelId resolve_fallback(const LabelSpace& space, const Dataset* dataset,
                         std::span<const AnnotationRecord> responses,
                         const std::optional<std::string>& override_label);

struct EvaluationInputs {
  const LabelSpace* space = nullptr;
  GoldSet gold;
  const AnnotationMatrix* matrix = nullptr;  // per-annotator sources, OOL rates
  std::vector<mace::Competence> competence;  // attached to annotator sources by id
  std::vector<LabelledItem> labels;          // aggregated labels; one source per method
  bool baselines = true;                     // add most_frequent and random sources
  std::uint64_t baseline_seed = 0;
  std::string reference = "random";
  eval::BootstrapConfig bootstrap;
};

/// Aligns every source with the gold items (throwing DataError naming the
/// first item id that gold lacks) and scores them. Source order: annotators,
/// most_frequent, random, then label methods in first-seen order.
eval::Report evaluate(const EvaluationInputs& inputs);

}  // namespace annotagg::pipeline
