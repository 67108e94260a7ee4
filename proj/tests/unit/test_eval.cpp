#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "redct/experiment.hpp"
#include "redct/labeler.hpp"
#include "redct/metrics.hpp"
#include "redct/synthetic.hpp"
#include "support.hpp"

using namespace redct;
using namespace redct::eval;

namespace {

std::vector<ClassIndex> balanced(std::size_t n, std::size_t k) {
  std::vector<ClassIndex> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = i % k;
  return g;
}

Dataset simulated(std::size_t n, double accuracy, labeler::BetaParams correct, labeler::BetaParams wrong,
                  std::uint64_t seed, double signal = 0.2) {
  SyntheticTaskConfig tc;
  tc.num_docs = n;
  tc.signal = signal;
  tc.seed = seed;
  const auto gold = make_synthetic_task(tc);
  labeler::SimulatorConfig sc;
  sc.accuracy_per_class.assign(3, accuracy);
  sc.correct = correct;
  sc.wrong = wrong;
  sc.seed = seed;
  return labeler::simulate_labels(gold, sc);
}

MatrixConfig small_matrix() {
  MatrixConfig cfg;
  cfg.seeds = {0, 1};
  cfg.featurizer.dim = 1u << 14;
  cfg.train.epochs = 10;
  cfg.baseline_trials = 20;
  return cfg;
}

}  // namespace

TEST_CASE("weighted F1: perfect predictions score 1") {
  const auto g = balanced(30, 3);
  const auto r = weighted_f1(g, g, 3);
  CHECK(r.weighted_f1 == 1.0);
  CHECK(r.num_evaluated == 30);
}

TEST_CASE("weighted F1 worked example") {
  const std::vector<ClassIndex> gold{0, 0, 1, 1, 1}, pred{0, 1, 1, 1, 1};
  const auto r = weighted_f1(gold, pred, 2);
  // class A: P 1, R 1/2, F1 2/3; class B: P 3/4, R 1, F1 6/7
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3));
  CHECK(r.per_class[1].f1 == doctest::Approx(6.0 / 7));
  CHECK(r.weighted_f1 == doctest::Approx(0.4 * 2.0 / 3 + 0.6 * 6.0 / 7).epsilon(1e-15));
  CHECK(r.weighted_f1 == doctest::Approx(0.78095238095238).epsilon(1e-12));
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 3}});
}

TEST_CASE("weighted F1: absent class has zero support and no weight") {
  const std::vector<ClassIndex> gold{0, 1, 0, 1}, pred{0, 1, 1, 1};
  const auto two = weighted_f1(gold, pred, 2);
  const auto three = weighted_f1(gold, pred, 3);
  CHECK(three.per_class[2].support == 0);
  CHECK(three.weighted_f1 == two.weighted_f1);
}

TEST_CASE("weighted F1 equals the brute-force oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng.below(3);
    const std::size_t n = 1 + rng.below(50);
    std::vector<ClassIndex> gold(n), pred(n);
    for (auto& g : gold) g = rng.below(k);
    for (auto& p : pred) p = rng.below(k);
    const auto r = weighted_f1(gold, pred, k);
    CHECK(r.weighted_f1 == test::weighted_f1_oracle(gold, pred, k));
    CHECK(std::fabs(static_cast<long double>(r.weighted_f1) - test::weighted_f1_rational(gold, pred, k)) < 1e-15L);
    CHECK(r.weighted_f1 >= 0.0);
    CHECK(r.weighted_f1 <= 1.0);
    std::size_t total = 0;
    for (const auto& row : r.confusion) {
      for (auto v : row) total += v;
    }
    CHECK(total == n);
  }
}

TEST_CASE("weighted F1 input errors") {
  const std::vector<ClassIndex> a{0, 1}, b{0};
  CHECK_THROWS_AS(weighted_f1(a, b, 2), DataError);
  CHECK_THROWS_AS(weighted_f1(a, a, 1), DataError);
  CHECK_THROWS_AS(weighted_f1(std::vector<ClassIndex>{}, std::vector<ClassIndex>{}, 2), DataError);
}

TEST_CASE("aggregate reports the spread over repetitions") {
  const std::vector<ClassIndex> gold{0, 0, 1, 1};
  const std::vector<EvalReport> runs{weighted_f1(gold, std::vector<ClassIndex>{0, 0, 1, 1}, 2),
                                     weighted_f1(gold, std::vector<ClassIndex>{0, 1, 1, 1}, 2)};
  const auto agg = aggregate(runs);
  CHECK(agg.repetitions == 2);
  CHECK(agg.mean_weighted_f1 == doctest::Approx((1.0 + runs[1].weighted_f1) / 2));
  CHECK(agg.sd_weighted_f1 == doctest::Approx(std::fabs(1.0 - runs[1].weighted_f1) / std::sqrt(2.0)));
  CHECK(agg.num_evaluated == 8);
}

TEST_CASE("random baseline matches 1/K on balanced gold") {
  const auto r3 = random_baseline(balanced(3000, 3), 3, 1, 200);
  CHECK(r3.mean == doctest::Approx(0.333).epsilon(0.03));
  CHECK(std::fabs(r3.mean - 0.333) <= 0.01);
  const auto r2 = random_baseline(balanced(3000, 2), 2, 1, 200);
  CHECK(std::fabs(r2.mean - 0.500) <= 0.01);
  // one trial with a fixed seed is deterministic
  CHECK(random_baseline(balanced(90, 3), 3, 5, 1).mean == random_baseline(balanced(90, 3), 3, 5, 1).mean);
  CHECK_THROWS_AS(random_baseline(balanced(9, 3), 3, 5, 0), ConfigError);
}

TEST_CASE("random baseline standard error shrinks as trials^-1/2") {
  const auto g = balanced(300, 3);
  const auto a = random_baseline(g, 3, 11, 100);
  const auto b = random_baseline(g, 3, 11, 1600);
  const double ratio = a.standard_error / b.standard_error;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.3);
}

TEST_CASE("KS worked examples") {
  const std::vector<double> a{1, 2, 3}, b{1.5, 2.5, 3.5};
  const auto r = ks_two_sample(a, b);
  CHECK(r.statistic == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(r.n == 3);
  CHECK(r.m == 3);

  const auto same = ks_two_sample(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);

  const std::vector<double> lo{0.1, 0.2, 0.3, 0.4}, hi{1.1, 1.2, 1.3};
  CHECK(ks_two_sample(lo, hi).statistic == 1.0);
  CHECK(ks_two_sample(hi, lo).statistic == 1.0);
  CHECK_THROWS_AS(ks_two_sample(a, std::vector<double>{}), DataError);
}

TEST_CASE("KS statistic equals exhaustive ECDF enumeration, symmetric and reflexive") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(1 + rng.below(12)), b(1 + rng.below(12));
    // coarse grid for ties inside and across samples
    for (auto& v : a) v = static_cast<double>(rng.below(10));
    for (auto& v : b) v = static_cast<double>(rng.below(10));
    const auto r = ks_two_sample(a, b);
    const auto exact = test::ks_oracle(a, b);
    CHECK(std::llround(r.statistic * static_cast<double>(exact.den)) == exact.num);
    CHECK(std::fabs(r.statistic - static_cast<double>(exact.num) / static_cast<double>(exact.den)) < 1e-15);
    CHECK(ks_two_sample(b, a).statistic == r.statistic);
    CHECK(ks_two_sample(a, a).statistic == 0.0);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("Kolmogorov survival function") {
  CHECK(kolmogorov_survival(0.0) == 1.0);
  CHECK(kolmogorov_survival(0.01) == 1.0);
  // tabulated critical values
  CHECK(kolmogorov_survival(1.358) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(kolmogorov_survival(1.628) == doctest::Approx(0.01).epsilon(0.01));
  CHECK(kolmogorov_survival(5.0) < 1e-20);
}

TEST_CASE("separation report") {
  SUBCASE("calibrated simulator separates correct from incorrect") {
    const auto ds = simulated(2000, 0.7, {8, 2}, {2, 2}, 3);
    const auto r = confidence_separation_report(ds);
    REQUIRE(r.ks.has_value());
    CHECK(r.ks->p_value < 0.01);
    CHECK(r.correct_confidences.size() + r.incorrect_confidences.size() == 2000);
    std::size_t binned = 0;
    for (const auto& b : r.histogram) binned += b.correct + b.incorrect;
    CHECK(binned == 2000);
    CHECK(r.histogram.size() == 20);
    CHECK(r.histogram_csv().rfind("bin_lo,bin_hi,correct,incorrect\n", 0) == 0);
  }
  SUBCASE("identical confidence distributions do not separate") {
    const auto ds = simulated(2000, 0.7, {2, 2}, {2, 2}, 3);
    const auto r = confidence_separation_report(ds);
    REQUIRE(r.ks.has_value());
    CHECK(r.ks->p_value > 0.05);
  }
  SUBCASE("all labels correct: KS skipped with a notice") {
    const auto ds = simulated(300, 1.0, {8, 2}, {2, 2}, 3);
    const auto r = confidence_separation_report(ds);
    CHECK_FALSE(r.ks.has_value());
    CHECK(r.notice.find("no incorrectly") != std::string::npos);
    CHECK(r.to_json()["ks"].is_null());
  }
}

TEST_CASE("split_train_test is deterministic and keeps dataset order") {
  const auto ds = simulated(101, 0.7, {8, 2}, {2, 2}, 4);
  const auto a = split_train_test(ds, 0.2, 9);
  const auto b = split_train_test(ds, 0.2, 9);
  CHECK(a.test == b.test);
  CHECK(a.test.size() == 21);
  CHECK(a.train.size() == 80);
  std::vector<std::size_t> pos;
  for (const auto& d : a.train.documents()) pos.push_back(*ds.index_of(d.doc_id));
  CHECK(std::is_sorted(pos.begin(), pos.end()));
  CHECK_THROWS_AS(split_train_test(ds, 1.0, 0), ConfigError);
}

TEST_CASE("matrix runs are a pure function of their inputs") {
  const auto ds = simulated(600, 0.7, {8, 2}, {2, 2}, 5);
  const auto cfg = small_matrix();
  const auto a = run_matrix(ds, cfg);
  const auto b = run_matrix(ds, cfg);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.settings.size() == 5);
  CHECK(a.oracle_expert);
  CHECK(a.at(Setting::base).expert_labels == 0);
  CHECK(a.at(Setting::CI).expert_labels > 0);
  CHECK(a.to_text().find("CI SL 10%") != std::string::npos);

  auto par = cfg;
  par.parallelism = 4;
  CHECK(run_matrix(ds, par).to_json().dump() == a.to_json().dump());
}

TEST_CASE("perfect labels: the base classifier nearly matches the labeler") {
  const auto ds = simulated(1500, 1.0, {8, 2}, {2, 2}, 6, 0.5);
  auto cfg = small_matrix();
  cfg.settings = {Setting::base};
  const auto r = run_matrix(ds, cfg);
  CHECK(r.llm_f1 == 1.0);
  CHECK(r.at(Setting::base).mean >= 0.95 * r.llm_f1);
}

TEST_CASE("sweep") {
  const auto ds = simulated(500, 0.7, {8, 2}, {2, 2}, 7);
  auto cfg = small_matrix();
  cfg.settings = {Setting::RS, Setting::CI, Setting::CI_SL};
  SUBCASE("at p = 1 every training label is an expert label") {
    const auto s = run_sweep(ds, {1.0}, cfg);
    const auto& pt = s.points.at(0);
    CHECK(pt.at(Setting::RS).f1_per_seed == pt.at(Setting::CI).f1_per_seed);
    CHECK(pt.at(Setting::CI).f1_per_seed == pt.at(Setting::CI_SL).f1_per_seed);
    CHECK(pt.at(Setting::CI).expert_labels == pt.num_train);
    CHECK(s.to_csv().rfind("p,setting,mean_f1,sd_f1,llm_f1\n", 0) == 0);
  }
  SUBCASE("the weight reading reaches CI SL and the report") {
    auto lp = cfg;
    lp.weight_argument = softlabel::WeightArgument::log_probability;
    const auto a = run_sweep(ds, {0.1}, cfg);
    const auto b = run_sweep(ds, {0.1}, lp);
    CHECK(a.points[0].at(Setting::CI).f1_per_seed == b.points[0].at(Setting::CI).f1_per_seed);
    CHECK(a.points[0].at(Setting::CI_SL).f1_per_seed != b.points[0].at(Setting::CI_SL).f1_per_seed);
    CHECK(b.to_json()["weight_argument"] == "log_probability");
    CHECK(a.to_json()["weight_argument"] == "probability");
  }
  SUBCASE("empty fraction set is a configuration error") {
    CHECK_THROWS_AS(run_sweep(ds, {}, cfg), ConfigError);
  }
}
