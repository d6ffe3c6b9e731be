#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annotagg/label_data.hpp"

namespace annotagg::agreement {

struct PairKappa {
  std::size_t first;   // annotator column
  std::size_t second;  // annotator column, > first
  double kappa;
  std::size_t n_items;  // co-annotated items
};

struct Report {
  double cohen = 0.0;  // unweighted mean of pairwise kappas
  double fleiss = 0.0;
  double krippendorff = 0.0;
  double raw = 0.0;
  std::vector<PairKappa> cohen_pairs;
  struct {
    std::size_t cohen = 0, fleiss = 0, krippendorff = 0, raw = 0;
  } n_items_used;
};

/// Mean over items with >= 2 annotations of the fraction of agreeing
/// unordered annotator pairs.
double raw_agreement(const AnnotationMatrix& matrix);

/// Cohen's kappa for every annotator pair, using each annotator's own
/// marginals on the co-annotated items. A pair with chance agreement 1 scores
/// 1 if it agrees everywhere, else 0.
std::vector<PairKappa> pairwise_cohen(const AnnotationMatrix& matrix);
double cohen_kappa(const AnnotationMatrix& matrix);

/// Fleiss' kappa over items annotated by every annotator.
double fleiss_kappa(const AnnotationMatrix& matrix);

/// Nominal Krippendorff's alpha from the coincidence matrix; items with a
/// single annotation are not pairable and drop out.
double krippendorff_alpha(const AnnotationMatrix& matrix);

Report compute(const AnnotationMatrix& matrix);

nlohmann::ordered_json to_json(const Report& report, const AnnotationMatrix& matrix);
/// Aligned text table: Cohen, Fleiss, Krip., Raw.
std::string format_table(const Report& report, const std::string& row_label);

}  // namespace annotagg::agreement
