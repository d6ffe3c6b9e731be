#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "annotagg/error.hpp"
#include "annotagg/mace.hpp"
#include "annotagg/random.hpp"
#include "annotagg/simulator.hpp"
#include "helpers.hpp"

using namespace annotagg;

namespace {

oracle::Grid unanimous_grid() {
  oracle::Grid g;
  for (int i = 0; i < 50; ++i) g.push_back(std::vector<int>(4, i % 3));
  return g;
}

oracle::Grid random_grid(Rng& rng, std::size_t n, std::size_t J, std::size_t K, double missing) {
  oracle::Grid g(n, std::vector<int>(J, -1));
  for (auto& row : g) {
    for (auto& v : row)
      if (!rng.bernoulli(missing)) v = static_cast<int>(rng.below(K));
    if (std::all_of(row.begin(), row.end(), [](int v) { return v < 0; }))
      row[rng.below(J)] = static_cast<int>(rng.below(K));
  }
  return g;
}

void check_model_invariants(const mace::Model& m, const AnnotationMatrix& matrix) {
  for (double t : m.theta) {
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
  }
  for (const auto& row : m.xi) CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& row : m.posteriors)
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.log_likelihood == doctest::Approx(oracle::mace_ll(to_grid(matrix), static_cast<int>(matrix.num_labels()), m.theta, m.xi)).epsilon(1e-9));
}

}  // namespace

TEST_CASE("unanimous annotators are fully trusted") {
  const auto matrix = to_matrix(unanimous_grid(), 3);
  const auto model = mace::fit(matrix);
  check_model_invariants(model, matrix);
  CHECK(*std::min_element(model.theta.begin(), model.theta.end()) >= 0.9);
  const auto decoded = mace::decode(model);
  for (std::size_t i = 0; i < 50; ++i) CHECK(decoded[i] == LabelId(i % 3));
}

TEST_CASE("a uniform-random annotator gets low competence") {
  auto cfg = sim::Config::uniform(500, 3, {0.95, 0.95, 0.0}, 17);
  const auto s = sim::simulate(cfg);
  const auto model = mace::fit(s.matrix);
  check_model_invariants(model, s.matrix);
  CHECK(model.theta[2] < 0.2);
  CHECK(model.theta[0] > 0.2);
  CHECK(model.theta[1] > 0.2);
}

TEST_CASE("EM reaches the grid-search optimum on a tiny matrix") {
  const oracle::Grid g = {{0, 0}, {0, 1}, {1, 1}, {0, 0}};
  mace::Config cfg;
  cfg.smoothing = 0.0;
  cfg.iterations = 500;
  cfg.tolerance = 1e-12;
  const auto model = mace::fit(to_matrix(g, 2), cfg);
  CHECK(model.log_likelihood >= oracle::mace_grid_max(g, 0.05) - 1e-3);
  CHECK(model.log_likelihood == doctest::Approx(oracle::mace_ll(g, 2, model.theta, model.xi)).epsilon(1e-12));
}

TEST_CASE("argmax and entropy") {
  CHECK(mace::argmax({0.1, 0.7, 0.2}) == 1);
  CHECK(mace::argmax({0.5, 0.5}) == 0);
  CHECK(mace::shannon_entropy({1.0, 0.0}) == 0.0);
  CHECK(mace::shannon_entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(mace::shannon_entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("a 2-2 split has the highest entropy") {
  oracle::Grid g;
  for (int i = 0; i < 12; ++i) g.push_back(std::vector<int>(4, i % 2));
  g.push_back({0, 0, 1, 1});
  for (int i = 0; i < 6; ++i) g.push_back({i % 2, i % 2, i % 2, 1 - i % 2});
  const auto model = mace::fit(to_matrix(g, 2));
  const auto h = mace::entropy(model);
  CHECK(std::max_element(h.begin(), h.end()) - h.begin() == 12);
  for (double v : h) {
    CHECK(v >= 0.0);
    CHECK(v <= std::log(2.0) + 1e-12);
  }
}

TEST_CASE("decode with a threshold abstains on the uncertain items") {
  mace::Model m;
  m.posteriors = {{0.9, 0.1}, {0.5, 0.5}, {0.2, 0.8}, {0.6, 0.4}};
  CHECK(mace::decode(m) == std::vector<std::optional<LabelId>>{0, 0, 1, 0});
  const auto half = mace::decode(m, 0.5);
  CHECK(half == std::vector<std::optional<LabelId>>{0, std::nullopt, 1, std::nullopt});
  CHECK(mace::decode(m, 1.0) == mace::decode(m));
  m.posteriors = {{0.9, 0.1}, {0.1, 0.9}, {0.5, 0.5}};
  // entropy tie at the cutoff keeps both
  CHECK(mace::decode(m, 0.34) == std::vector<std::optional<LabelId>>{0, 1, std::nullopt});
}

TEST_CASE("fit rejects bad input") {
  AnnotationMatrix m(numbered_labels(2), {"x", "y"}, {"a"});
  m.set(0, 0, LabelId{0});
  try {
    mace::fit(m);
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'y'") != std::string::npos);
  }
  mace::Config bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.smoothing = -1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.tolerance = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("permuting annotators and items permutes the outputs") {
  Rng rng(3);
  const auto s = sim::simulate(sim::Config::uniform(200, 3, {0.9, 0.6, 0.4, 0.2}, 8));
  const auto base = mace::fit(s.matrix);
  const auto g = to_grid(s.matrix);

  std::vector<std::size_t> items(g.size()), anns(4);
  std::iota(items.begin(), items.end(), 0);
  std::iota(anns.begin(), anns.end(), 0);
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
  anns = {2, 0, 3, 1};

  std::vector<std::string> item_ids, ann_ids;
  for (auto i : items) item_ids.push_back(s.matrix.item_ids()[i]);
  for (auto j : anns) ann_ids.push_back(s.matrix.annotator_ids()[j]);
  AnnotationMatrix p(s.matrix.label_space(), item_ids, ann_ids);
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = 0; j < anns.size(); ++j) p.set(i, j, s.matrix.at(items[i], anns[j]));
  const auto perm = mace::fit(p);
  CHECK(perm.log_likelihood == doctest::Approx(base.log_likelihood).epsilon(1e-9));
  for (std::size_t j = 0; j < anns.size(); ++j) {
    CHECK(perm.theta[j] == doctest::Approx(base.theta[anns[j]]).epsilon(1e-6));
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(perm.xi[j][k] == doctest::Approx(base.xi[anns[j]][k]).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(perm.posteriors[i][k] == doctest::Approx(base.posteriors[items[i]][k]).epsilon(1e-6));
}

TEST_CASE("relabeling permutes strategies and posteriors, theta unchanged") {
  const auto s = sim::simulate(sim::Config::uniform(300, 3, {0.9, 0.7, 0.5, 0.3}, 21));
  // run to convergence so both fits land on the same fixed point
  mace::Config cfg;
  cfg.iterations = 5000;
  cfg.tolerance = 1e-15;
  const auto base = mace::fit(s.matrix, cfg);
  const std::vector<LabelId> sigma = {2, 0, 1};
  AnnotationMatrix r(s.matrix.label_space(), s.matrix.item_ids(), s.matrix.annotator_ids());
  for (std::size_t i = 0; i < s.matrix.n_items(); ++i)
    for (std::size_t j = 0; j < s.matrix.n_annotators(); ++j)
      if (auto a = s.matrix.at(i, j)) r.set(i, j, sigma[*a]);
  const auto relabeled = mace::fit(r, cfg);
  CHECK(relabeled.log_likelihood == doctest::Approx(base.log_likelihood).epsilon(1e-7));
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(relabeled.theta[j] == doctest::Approx(base.theta[j]).epsilon(1e-4));
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(relabeled.xi[j][sigma[k]] == doctest::Approx(base.xi[j][k]).epsilon(1e-4));
  }
  for (std::size_t i = 0; i < s.matrix.n_items(); ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(relabeled.posteriors[i][sigma[k]] == doctest::Approx(base.posteriors[i][k]).epsilon(1e-4));
}

TEST_CASE("EM objective never decreases; raw likelihood too without smoothing") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t K = 2 + rng.below(3), J = 2 + rng.below(4);
    const auto matrix = to_matrix(random_grid(rng, 5 + rng.below(40), J, K, 0.3), K);
    mace::Config cfg;
    cfg.restarts = 2;
    cfg.seed = trial;
    cfg.tolerance = 1e-15;
    const auto smoothed = mace::fit(matrix, cfg);
    for (std::size_t t = 1; t < smoothed.trace.size(); ++t)
      CHECK(smoothed.trace[t].objective >= smoothed.trace[t - 1].objective - 1e-9);
    cfg.smoothing = 0.0;
    const auto raw = mace::fit(matrix, cfg);
    for (std::size_t t = 1; t < raw.trace.size(); ++t)
      CHECK(raw.trace[t].log_likelihood >= raw.trace[t - 1].log_likelihood - 1e-9);
    check_model_invariants(smoothed, matrix);
  }
}

TEST_CASE("fit is reproducible and thread-count independent") {
  const auto s = sim::simulate(sim::Config::uniform(300, 4, {0.8, 0.6, 0.4}, 5));
  mace::Config cfg;
  cfg.seed = 42;
  const auto a = mace::fit(s.matrix, cfg);
  const auto b = mace::fit(s.matrix, cfg);
  cfg.threads = 4;
  const auto c = mace::fit(s.matrix, cfg);
  CHECK(mace::to_json(a).dump() == mace::to_json(b).dump());
  CHECK(a.theta == c.theta);
  CHECK(a.posteriors == c.posteriors);
  CHECK(a.log_likelihood == c.log_likelihood);
  cfg.seed = 43;
  cfg.threads = 1;
  CHECK(mace::fit(s.matrix, cfg).trace[0].log_likelihood != a.trace[0].log_likelihood);
}

TEST_CASE("competence recovery on simulated annotators") {
  const auto s = sim::simulate(sim::Config::uniform(1000, 3, {0.9, 0.7, 0.5, 0.3}, 1));
  const auto model = mace::fit(s.matrix);
  const std::vector<double> truth = {0.9, 0.7, 0.5, 0.3};
  CHECK(oracle::spearman(model.theta, truth) == doctest::Approx(1.0));
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(model.theta[j] - truth[j]) <= 0.1);
}

TEST_CASE("vb mode produces a valid model") {
  const auto s = sim::simulate(sim::Config::uniform(300, 3, {0.9, 0.7, 0.5, 0.1}, 2));
  mace::Config cfg;
  cfg.mode = mace::Mode::vb;
  const auto model = mace::fit(s.matrix, cfg);
  check_model_invariants(model, s.matrix);
  CHECK(model.theta[0] > model.theta[3]);
}

TEST_CASE("competence CSV round trip and JSON layout") {
  const auto s = sim::simulate(sim::Config::uniform(50, 2, {0.9, 0.5}, 2));
  const auto model = mace::fit(s.matrix);
  std::stringstream io;
  mace::write_competence_csv(io, model);
  const auto back = mace::read_competence_csv(io);
  REQUIRE(back.size() == 2);
  CHECK(back[0].annotator_id == "a1");
  CHECK(back[0].competence == doctest::Approx(model.theta[0]).epsilon(1e-6));
  const auto j = mace::to_json(model);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  REQUIRE(keys.size() >= 5);
  CHECK(std::vector<std::string>(keys.begin(), keys.begin() + 5) ==
        std::vector<std::string>{"theta", "xi", "posteriors", "log_likelihood", "config"});
}
