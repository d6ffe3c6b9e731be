#include <doctest.h>

#include <cmath>

#include "annotagg/error.hpp"
#include "annotagg/evaluation.hpp"
#include "annotagg/random.hpp"
#include "oracles.hpp"

using namespace annotagg;
namespace ev = annotagg::eval;

namespace {

using Labels = std::vector<LabelId>;

std::vector<int> ints(const Labels& v) { return {v.begin(), v.end()}; }

// 20 items over 3 labels; system is right on 18, reference on 10.
struct Fixture20 {
  Labels gold, sys, ref;
  Fixture20() {
    for (LabelId i = 0; i < 20; ++i) gold.push_back(i % 3);
    sys = gold;
    sys[3] = (sys[3] + 1) % 3;
    sys[11] = (sys[11] + 2) % 3;
    ref = gold;
    for (std::size_t i = 0; i < 20; i += 2) ref[i] = (ref[i] + 1) % 3;
  }
};

// Resampling procedure written out from its definition.
double oracle_p(const Labels& sys, const Labels& ref, const Labels& gold, int K,
                const ev::BootstrapConfig& cfg) {
  const std::size_t n = gold.size();
  const auto draw = static_cast<std::size_t>(std::ceil(cfg.sample_frac * n - 1e-9));
  std::size_t not_better = 0;
  for (std::size_t b = 0; b < cfg.samples; ++b) {
    Rng rng(derive_seed(cfg.seed, b));
    std::vector<int> g, s, r;
    for (std::size_t k = 0; k < draw; ++k) {
      const auto i = rng.below(n);
      g.push_back(gold[i]);
      s.push_back(sys[i]);
      r.push_back(ref[i]);
    }
    if (!(oracle::macro_f1(g, s, K) > oracle::macro_f1(g, r, K) + 1e-9)) ++not_better;
  }
  return (1.0 + not_better) / (cfg.samples + 1.0);
}

}  // namespace

TEST_CASE("macro F1 examples") {
  const Labels gold = {0, 0, 1, 1};
  CHECK(ev::macro_f1(gold, gold, 2).macro == 1.0);
  const auto f = ev::macro_f1(Labels{0, 1, 1, 1}, gold, 2);
  CHECK(f.per_class[0] == doctest::Approx(2.0 / 3));
  CHECK(f.per_class[1] == doctest::Approx(0.8));
  CHECK(f.macro == doctest::Approx((2.0 / 3 + 0.8) / 2));
  const auto c = ev::macro_f1(Labels{0, 0, 0, 0}, gold, 3);
  CHECK(c.per_class[0] == doctest::Approx(2.0 / 3));
  CHECK(c.per_class[1] == 0.0);
  CHECK(c.per_class[2] == 0.0);
  CHECK(c.macro == doctest::Approx(2.0 / 9));
  CHECK_THROWS_AS(ev::macro_f1(Labels{0}, gold, 2), DataError);
  CHECK_THROWS_AS(ev::macro_f1(Labels{}, Labels{}, 2), DataError);
  CHECK_THROWS_AS(ev::macro_f1(Labels{0, 0, 0, 5}, gold, 2), DataError);
}

TEST_CASE("macro F1 matches the precision/recall oracle and is permutation invariant") {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const std::size_t K = 2 + rng.below(4), n = 1 + rng.below(40);
    Labels gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = rng.below(K);
      pred[i] = rng.bernoulli(0.5) ? gold[i] : rng.below(K);
    }
    const auto got = ev::macro_f1(pred, gold, K);
    CHECK(got.macro == doctest::Approx(oracle::macro_f1(ints(gold), ints(pred), K)).epsilon(1e-12));
    CHECK(got.per_class.size() == K);
    Labels pg(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pg[i] = (gold[i] + 1) % K;
      pp[i] = (pred[i] + 1) % K;
    }
    CHECK(ev::macro_f1(pp, pg, K).macro == doctest::Approx(got.macro).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap extremes") {
  Fixture20 f;
  ev::BootstrapConfig cfg;
  CHECK(ev::bootstrap_test(f.sys, f.sys, f.gold, 3, cfg).p_value == 1.0);
  Labels wrong = f.gold;
  for (auto& l : wrong) l = (l + 1) % 3;
  const auto best = ev::bootstrap_test(f.gold, wrong, f.gold, 3, cfg);
  CHECK(best.p_value == 1.0 / 1001);
  CHECK(best.wins == 1000);
  CHECK(best.significant());
}

TEST_CASE("bootstrap regression value on the 20-item fixture") {
  Fixture20 f;
  ev::BootstrapConfig cfg;
  cfg.seed = 2023;
  const auto r = ev::bootstrap_test(f.sys, f.ref, f.gold, 3, cfg);
  CHECK(r.p_value == oracle_p(f.sys, f.ref, f.gold, 3, cfg));
  CHECK(r.p_value == 183.0 / 1001);
  // 4 draws per sample: the reference is perfect on all of them with
  // probability 1/16, so p cannot reach 0.01 at this size
  CHECK(r.p_value > 0.0625 * 0.5);
  ev::BootstrapConfig full = cfg;
  full.sample_frac = 1.0;
  CHECK(ev::bootstrap_test(f.sys, f.ref, f.gold, 3, full).significant());
  CHECK(ev::bootstrap_test(f.sys, f.ref, f.gold, 3, cfg) == r);
  cfg.threads = 8;
  CHECK(ev::bootstrap_test(f.sys, f.ref, f.gold, 3, cfg) == r);
}

TEST_CASE("bootstrap matches the resampling oracle on random inputs") {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 10 + rng.below(50);
    Labels gold(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = rng.below(3);
      a[i] = rng.bernoulli(0.7) ? gold[i] : rng.below(3);
      b[i] = rng.bernoulli(0.6) ? gold[i] : rng.below(3);
    }
    ev::BootstrapConfig cfg;
    cfg.samples = 200;
    cfg.seed = t;
    const auto r = ev::bootstrap_test(a, b, gold, 3, cfg);
    CHECK(r.p_value == oracle_p(a, b, gold, 3, cfg));
    // swapping sides swaps wins and losses
    const auto s = ev::bootstrap_test(b, a, gold, 3, cfg);
    CHECK(r.wins + s.wins + r.ties == cfg.samples);
    CHECK(r.ties == s.ties);
  }
}

TEST_CASE("bootstrap argument checks") {
  Fixture20 f;
  ev::BootstrapConfig cfg;
  cfg.sample_frac = 0.0;
  CHECK_THROWS_AS(ev::bootstrap_test(f.sys, f.ref, f.gold, 3, cfg), UsageError);
  cfg.sample_frac = 1.5;
  CHECK_THROWS_AS(ev::bootstrap_test(f.sys, f.ref, f.gold, 3, cfg), UsageError);
  CHECK_THROWS_AS(ev::bootstrap_test(Labels{}, Labels{}, Labels{}, 3, {}), DataError);
}

TEST_CASE("correlations") {
  const std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(ev::pearson(x, y) == doctest::Approx(1.0));
  CHECK(ev::spearman(x, y) == doctest::Approx(1.0));
  const std::vector<double> rev = {4, 3, 2, 1};
  CHECK(ev::pearson(x, rev) == doctest::Approx(-1.0));
  CHECK(ev::spearman(x, rev) == doctest::Approx(-1.0));
  CHECK(ev::spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
  const std::vector<double> tied = {1, 1, 2, 3};
  CHECK(ev::spearman(tied, x) == doctest::Approx(oracle::spearman(tied, x)).epsilon(1e-12));
  try {
    ev::pearson(x, std::vector<double>{5, 5, 5, 5});
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("variance") != std::string::npos);
  }
  CHECK_THROWS_AS(ev::pearson(std::vector<double>{1}, std::vector<double>{2}), DataError);
}

TEST_CASE("evaluate scores sources and correlates competence") {
  const LabelSpace space({"a", "b", "c"});
  Fixture20 f;
  std::vector<ev::Source> sources;
  auto to_opt = [](const Labels& v) {
    return std::vector<std::optional<LabelId>>(v.begin(), v.end());
  };
  sources.push_back({"good", to_opt(f.sys), 0.9, 0.1});
  sources.push_back({"poor", to_opt(f.ref), 0.4, 0.3});
  auto partial = to_opt(f.gold);
  partial[0].reset();
  sources.push_back({"partial", partial, 0.95, std::nullopt});
  ev::BootstrapConfig cfg;
  cfg.sample_frac = 1.0;
  const auto report = ev::evaluate(space, f.gold, sources, "poor", cfg);
  REQUIRE(report.sources.size() == 3);
  CHECK(report.sources[0].bootstrap->significant());
  CHECK_FALSE(report.sources[1].bootstrap);
  CHECK(report.sources[2].n_items == 19);
  REQUIRE(report.correlation);
  CHECK(report.correlation->spearman == doctest::Approx(1.0));
  CHECK(*report.ool_rate_overall == doctest::Approx(0.2));
  const auto table = ev::format_table(report, "SA");
  CHECK(table.find("good") != std::string::npos);
  CHECK(table.find('*') != std::string::npos);
  const auto j = ev::to_json(report);
  CHECK(j.at("bootstrap").at("with_replacement").get<bool>());
  CHECK(j.at("bootstrap").at("samples").get<int>() == 1000);
  CHECK(j.at("bootstrap").at("sample_frac").get<double>() == 1.0);
  CHECK_THROWS_AS(ev::evaluate(space, f.gold, sources, "missing", cfg), UsageError);
}
