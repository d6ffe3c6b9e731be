#include "annotagg/agreement.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>

#include "annotagg/error.hpp"

namespace annotagg::agreement {

namespace {

std::vector<LabelId> present(const AnnotationMatrix& m, std::size_t item) {
  std::vector<LabelId> out;
  for (std::size_t j = 0; j < m.n_annotators(); ++j)
    if (auto a = m.at(item, j)) out.push_back(*a);
  return out;
}

double chance_corrected(double observed, double expected) {
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;
  return (observed - expected) / (1.0 - expected);
}

}  // namespace

double raw_agreement(const AnnotationMatrix& matrix) {
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    const auto labels = present(matrix, i);
    const std::size_t m = labels.size();
    if (m < 2) continue;
    std::size_t agree = 0;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) agree += labels[a] == labels[b] ? 1 : 0;
    total += static_cast<double>(agree) / static_cast<double>(m * (m - 1) / 2);
    ++used;
  }
  if (used == 0) throw DataError("raw agreement needs an item with at least 2 annotations");
  return total / static_cast<double>(used);
}

std::vector<PairKappa> pairwise_cohen(const AnnotationMatrix& matrix) {
  const std::size_t J = matrix.n_annotators();
  const std::size_t K = matrix.num_labels();
  if (J < 2) throw DataError("Cohen's kappa needs at least 2 annotators");
  std::vector<PairKappa> pairs;
  for (std::size_t a = 0; a < J; ++a)
    for (std::size_t b = a + 1; b < J; ++b) {
      std::vector<double> ma(K, 0.0), mb(K, 0.0);
      std::size_t n = 0, agree = 0;
      for (std::size_t i = 0; i < matrix.n_items(); ++i) {
        auto la = matrix.at(i, a);
        auto lb = matrix.at(i, b);
        if (!la || !lb) continue;
        ++n;
        agree += *la == *lb ? 1 : 0;
        ma[*la] += 1.0;
        mb[*lb] += 1.0;
      }
      if (n == 0)
        throw DataError("annotators '" + matrix.annotator_ids()[a] + "' and '" +
                        matrix.annotator_ids()[b] + "' share no annotated item");
      const double dn = static_cast<double>(n);
      double pe = 0.0;
      for (std::size_t k = 0; k < K; ++k) pe += (ma[k] / dn) * (mb[k] / dn);
      pairs.push_back({a, b, chance_corrected(static_cast<double>(agree) / dn, pe), n});
    }
  return pairs;
}

double cohen_kappa(const AnnotationMatrix& matrix) {
  const auto pairs = pairwise_cohen(matrix);
  double sum = 0.0;
  for (const auto& p : pairs) sum += p.kappa;
  return sum / static_cast<double>(pairs.size());
}

double fleiss_kappa(const AnnotationMatrix& matrix) {
  const std::size_t J = matrix.n_annotators();
  const std::size_t K = matrix.num_labels();
  if (J < 2) throw DataError("Fleiss' kappa needs at least 2 annotators");
  // Integer tallies, combined into one exact ratio before the final division.
  std::vector<std::uint64_t> totals(K, 0);
  std::uint64_t same_pairs = 0;
  std::uint64_t rows = 0;
  std::vector<std::uint64_t> counts(K);
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    if (matrix.row_count(i) != J) continue;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < J; ++j) ++counts[*matrix.at(i, j)];
    for (std::size_t k = 0; k < K; ++k) {
      same_pairs += counts[k] * (counts[k] - (counts[k] > 0 ? 1 : 0));
      totals[k] += counts[k];
    }
    ++rows;
  }
  if (rows == 0) throw DataError("Fleiss' kappa needs an item annotated by every annotator");
  using wide = __int128;
  const wide A = same_pairs;                // P_bar = A / B
  const wide B = static_cast<wide>(rows) * J * (J - 1);
  wide C = 0;                               // P_e = C / D
  for (auto t : totals) C += static_cast<wide>(t) * t;
  const wide n = static_cast<wide>(rows) * J;
  const wide D = n * n;
  if (C == D) return A == B ? 1.0 : 0.0;
  wide num = A * D - C * B;
  wide den = B * (D - C);
  wide a = num < 0 ? -num : num, b = den;
  while (b != 0) {
    const wide r = a % b;
    a = b;
    b = r;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

double krippendorff_alpha(const AnnotationMatrix& matrix) {
  const std::size_t K = matrix.num_labels();
  std::vector<double> coincidence(K * K, 0.0);
  std::vector<double> counts(K);
  bool any = false;
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    const auto labels = present(matrix, i);
    const std::size_t m = labels.size();
    if (m < 2) continue;
    any = true;
    std::fill(counts.begin(), counts.end(), 0.0);
    for (LabelId l : labels) counts[l] += 1.0;
    // ordered pairs of distinct coders: n_c n_k for c != k, n_c (n_c - 1) on the diagonal
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t c = 0; c < K; ++c)
      for (std::size_t k = 0; k < K; ++k)
        coincidence[c * K + k] += w * counts[c] * (c == k ? counts[k] - 1.0 : counts[k]);
  }
  if (!any) throw DataError("Krippendorff's alpha needs an item with at least 2 annotations");
  std::vector<double> marginal(K, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t k = 0; k < K; ++k) marginal[c] += coincidence[c * K + k];
  for (double v : marginal) n += v;
  if (n < 2.0) throw DataError("Krippendorff's alpha needs at least 2 pairable values");
  double disagree_obs = 0.0, disagree_exp = 0.0;
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t k = 0; k < K; ++k)
      if (c != k) {
        disagree_obs += coincidence[c * K + k];
        disagree_exp += marginal[c] * marginal[k];
      }
  disagree_obs /= n;
  disagree_exp /= n * (n - 1.0);
  if (disagree_exp == 0.0) return disagree_obs == 0.0 ? 1.0 : 0.0;
  return 1.0 - disagree_obs / disagree_exp;
}

Report compute(const AnnotationMatrix& matrix) {
  Report r;
  r.raw = raw_agreement(matrix);
  r.cohen_pairs = pairwise_cohen(matrix);
  r.cohen = cohen_kappa(matrix);
  r.fleiss = fleiss_kappa(matrix);
  r.krippendorff = krippendorff_alpha(matrix);
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    const auto m = matrix.row_count(i);
    if (m >= 2) {
      ++r.n_items_used.raw;
      ++r.n_items_used.cohen;
      ++r.n_items_used.krippendorff;
    }
    if (m == matrix.n_annotators()) ++r.n_items_used.fleiss;
  }
  return r;
}

nlohmann::ordered_json to_json(const Report& report, const AnnotationMatrix& matrix) {
  nlohmann::ordered_json j;
  j["cohen"] = report.cohen;
  j["fleiss"] = report.fleiss;
  j["krippendorff"] = report.krippendorff;
  j["raw"] = report.raw;
  j["cohen_reduction"] = "mean_pairwise";
  auto& pairs = j["cohen_pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : report.cohen_pairs)
    pairs.push_back({{"first", matrix.annotator_ids()[p.first]},
                     {"second", matrix.annotator_ids()[p.second]},
                     {"kappa", p.kappa},
                     {"n_items", p.n_items}});
  j["n_items_used"] = {{"cohen", report.n_items_used.cohen},
                       {"fleiss", report.n_items_used.fleiss},
                       {"krippendorff", report.n_items_used.krippendorff},
                       {"raw", report.n_items_used.raw}};
  return j;
}

std::string format_table(const Report& report, const std::string& row_label) {
  const int width = std::max<int>(static_cast<int>(row_label.size()), 4);
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s %7s %7s %7s %7s\n", width, "Task", "Cohen", "Fleiss",
                "Krip.", "Raw");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-*s %7.3f %7.3f %7.3f %7.3f\n", width, row_label.c_str(),
                report.cohen, report.fleiss, report.krippendorff, report.raw);
  out += buf;
  return out;
}

}  // namespace annotagg::agreement
