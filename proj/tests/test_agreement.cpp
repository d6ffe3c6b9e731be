#include <doctest.h>

#include "annotagg/agreement.hpp"
#include "annotagg/error.hpp"
#include "annotagg/random.hpp"
#include "helpers.hpp"

using namespace annotagg;
namespace ag = annotagg::agreement;

namespace {

// Krippendorff's reliability-data example (values 1..5, '.' missing), as
// annotator rows; transposed into items below.
oracle::Grid krippendorff_example() {
  const std::vector<std::vector<int>> by_annotator = {
      {1, 2, 3, 3, 2, 1, 4, 1, 2, -1, -1, -1},
      {1, 2, 3, 3, 2, 2, 4, 1, 2, 5, -1, 3},
      {-1, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, -1},
      {1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, -1}};
  oracle::Grid items(12, std::vector<int>(4));
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 12; ++i) items[i][j] = by_annotator[j][i] < 0 ? -1 : by_annotator[j][i] - 1;
  return items;
}

oracle::Grid columns(const std::vector<std::vector<int>>& cols) {
  oracle::Grid g(cols.at(0).size(), std::vector<int>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < cols[j].size(); ++i) g[i][j] = cols[j][i];
  return g;
}

}  // namespace

TEST_CASE("raw agreement examples") {
  CHECK(ag::raw_agreement(to_matrix(columns({{0, 1, 0, 1}, {0, 1, 0, 1}, {0, 1, 0, 1}}), 2)) == 1.0);
  CHECK(ag::raw_agreement(to_matrix(columns({{0, 1, 0, 1}, {0, 1, 0, 0}}), 2)) == 0.75);
  CHECK(ag::raw_agreement(to_matrix({{0, 0, 1}}, 2)) == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(ag::raw_agreement(to_matrix({{0, -1}, {-1, 1}}, 2)), DataError);
}

TEST_CASE("cohen kappa examples") {
  CHECK(ag::cohen_kappa(to_matrix(columns({{0, 0, 1, 1}, {0, 0, 1, 1}}), 2)) == 1.0);
  CHECK(ag::cohen_kappa(to_matrix(columns({{0, 0, 1, 1}, {0, 1, 0, 1}}), 2)) == 0.0);
  CHECK(ag::cohen_kappa(to_matrix(columns({{0, 0, 0, 1}, {0, 0, 1, 1}}), 2)) == doctest::Approx(0.5));
  // chance agreement 1
  CHECK(ag::cohen_kappa(to_matrix(columns({{0, 0, 0}, {0, 0, 0}}), 2)) == 1.0);
  try {
    ag::cohen_kappa(to_matrix(columns({{0, 1, -1, -1}, {-1, -1, 0, 1}, {0, 1, 0, 1}}), 2));
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ann0") != std::string::npos);
    CHECK(std::string(e.what()).find("ann1") != std::string::npos);
  }
}

TEST_CASE("fleiss kappa examples") {
  CHECK(ag::fleiss_kappa(to_matrix(columns({{0, 1, 1}, {0, 1, 1}, {0, 1, 1}}), 2)) == 1.0);
  CHECK(ag::fleiss_kappa(to_matrix(columns({{0, 0, 0, 1}, {0, 0, 1, 1}}), 2)) ==
        doctest::Approx((0.75 - 34.0 / 64) / (1 - 34.0 / 64)));
  const oracle::Grid split = {{0, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 1, 0}};
  CHECK(ag::fleiss_kappa(to_matrix(split, 2)) == -1.0 / 3);
  CHECK_THROWS_AS(ag::fleiss_kappa(to_matrix({{0, -1}, {1, -1}}, 2)), DataError);
}

TEST_CASE("krippendorff alpha examples") {
  const auto ex = krippendorff_example();
  CHECK(ag::krippendorff_alpha(to_matrix(ex, 5)) == doctest::Approx(0.743421052632).epsilon(1e-10));
  CHECK(ag::krippendorff_alpha(to_matrix(columns({{0, 1, 1}, {0, 1, 1}}), 2)) == 1.0);
  CHECK(ag::krippendorff_alpha(to_matrix({{0, 0, 1, 1}, {1, 1, 0, 0}}, 2)) < 0.0);
  CHECK_THROWS_AS(ag::krippendorff_alpha(to_matrix({{0, -1}, {-1, 1}}, 2)), DataError);
}

TEST_CASE("metrics match the brute-force oracles") {
  Rng rng(4);
  std::vector<oracle::Grid> fixtures = {krippendorff_example()};
  for (int f = 0; f < 30; ++f) {
    const std::size_t n = 5 + rng.below(30), J = 2 + rng.below(4), K = 2 + rng.below(3);
    oracle::Grid g(n, std::vector<int>(J));
    const double missing = f % 2 ? 0.2 : 0.0;
    for (auto& row : g) {
      const int base = static_cast<int>(rng.below(K));
      for (auto& v : row) v = rng.bernoulli(0.6) ? base : static_cast<int>(rng.below(K));
      for (std::size_t j = 2; j < J; ++j)
        if (rng.bernoulli(missing)) row[j] = -1;
    }
    fixtures.push_back(g);
  }
  for (const auto& g : fixtures) {
    int K = 0;
    for (const auto& r : g)
      for (int v : r) K = std::max(K, v + 1);
    const auto m = to_matrix(g, std::max(K, 2));
    CHECK(ag::cohen_kappa(m) == doctest::Approx(oracle::mean_pairwise_cohen(g, std::max(K, 2))).epsilon(1e-9));
    CHECK(ag::fleiss_kappa(m) == doctest::Approx(oracle::fleiss(g, std::max(K, 2))).epsilon(1e-9));
    CHECK(ag::krippendorff_alpha(m) == doctest::Approx(oracle::krippendorff(g)).epsilon(1e-9));
    CHECK(ag::raw_agreement(m) == doctest::Approx(oracle::raw_pairwise(g)).epsilon(1e-9));
    const auto r = ag::compute(m);
    CHECK(r.raw >= 0.0);
    CHECK(r.raw <= 1.0);
  }
}

TEST_CASE("two complete annotators: raw agreement equals observed agreement") {
  const auto m = to_matrix(columns({{0, 1, 2, 0, 1}, {0, 2, 2, 0, 0}}), 3);
  CHECK(ag::raw_agreement(m) == doctest::Approx(3.0 / 5));
}

TEST_CASE("metrics are invariant to label and annotator permutation") {
  auto g = krippendorff_example();
  const auto base = ag::compute(to_matrix(g, 5));
  for (auto& row : g) {
    std::swap(row[0], row[3]);
    for (auto& v : row)
      if (v >= 0) v = (v + 2) % 5;
  }
  const auto perm = ag::compute(to_matrix(g, 5));
  CHECK(perm.cohen == doctest::Approx(base.cohen).epsilon(1e-12));
  CHECK(perm.fleiss == doctest::Approx(base.fleiss).epsilon(1e-12));
  CHECK(perm.krippendorff == doctest::Approx(base.krippendorff).epsilon(1e-12));
  CHECK(perm.raw == doctest::Approx(base.raw).epsilon(1e-12));
}

TEST_CASE("duplicating every item barely moves the metrics") {
  Rng rng(8);
  oracle::Grid g(1000, std::vector<int>(4));
  for (auto& row : g) {
    const int base = static_cast<int>(rng.below(3));
    for (auto& v : row) v = rng.bernoulli(0.7) ? base : static_cast<int>(rng.below(3));
  }
  oracle::Grid doubled = g;
  doubled.insert(doubled.end(), g.begin(), g.end());
  const auto a = ag::compute(to_matrix(g, 3));
  const auto b = ag::compute(to_matrix(doubled, 3));
  CHECK(b.cohen == doctest::Approx(a.cohen).epsilon(1e-12));
  CHECK(b.raw == doctest::Approx(a.raw).epsilon(1e-12));
  CHECK(std::abs(b.fleiss - a.fleiss) <= 1e-3);
  CHECK(std::abs(b.krippendorff - a.krippendorff) <= 1e-3);
  CHECK(a.cohen <= a.raw);
  CHECK(a.fleiss <= a.raw);
  CHECK(a.krippendorff <= a.raw);
}

TEST_CASE("report serialization") {
  const auto m = to_matrix(columns({{0, 0, 0, 1}, {0, 0, 1, 1}, {0, 1, 1, 1}}), 2);
  const auto r = ag::compute(m);
  CHECK(r.cohen_pairs.size() == 3);
  CHECK(r.n_items_used.fleiss == 4);
  const auto j = ag::to_json(r, m);
  CHECK(j.at("cohen").get<double>() == r.cohen);
  const auto table = ag::format_table(r, "SA");
  CHECK(table.find("Cohen") < table.find("Fleiss"));
  CHECK(table.find("Fleiss") < table.find("Krip."));
  CHECK(table.find("Krip.") < table.find("Raw"));
  CHECK(table.find("SA") != std::string::npos);
}
