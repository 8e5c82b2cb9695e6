#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "conformal.hpp"
#include "experiment.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace ndcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class ConstantRegressor final : public Regressor {
 public:
  ConstantRegressor(double value, std::size_t p) : value_(value), p_(p) {}
  double predict(std::span<const double>) const override { return value_; }
  std::size_t feature_count() const noexcept override { return p_; }

 private:
  double value_;
  std::size_t p_;
};

PredictorConfig plain_config(PredictorKind kind = PredictorKind::Icp) {
  PredictorConfig c;
  c.kind = kind;
  c.regressor = {RegressorFamily::KernelRidge, {{"gamma", 1.0}, {"lambda", 0.01}}, true};
  return c;
}

const std::vector<double> kOrigin{0.0};

TEST(Score, Examples) {
  const NonconformityMeasure abs{MeasureKind::Absolute};
  const NonconformityMeasure norm{MeasureKind::Normalized};
  EXPECT_EQ(score(abs, 7, 4), 3.0);
  EXPECT_EQ(score(abs, 4, 4), 0.0);
  EXPECT_NEAR(score(norm, 7, 4, std::log(3.0)), 1.0, 1e-15);
  EXPECT_THROW(score(abs, 1, 2, 0.5), std::invalid_argument);
  EXPECT_THROW(score(norm, 1, 2), std::invalid_argument);
}

TEST(Rank, Examples) {
  EXPECT_EQ(calibration_rank(4, 0.2), 4u);
  EXPECT_EQ(calibration_rank(4, 0.05), 5u);
  EXPECT_EQ(calibration_rank(9, 0.1), 9u);
  EXPECT_EQ(calibration_rank(59, 0.05), 57u);
  EXPECT_EQ(calibration_rank(67, 0.1), 62u);
  EXPECT_THROW(calibration_rank(4, 0.0), std::invalid_argument);
  EXPECT_THROW(calibration_rank(4, 1.0), std::invalid_argument);
}

TEST(Icp, RankArithmeticExample) {
  const IcpModel m(std::make_shared<ConstantRegressor>(10.0, 1), nullptr, {4, 2, 3, 1}, {}, 10);
  EXPECT_EQ(m.interval(kOrigin, 0.2), (PredictionInterval{6, 14, 0.2}));
  const auto exhausted = m.interval(kOrigin, 0.05);
  EXPECT_EQ(exhausted.lower, -kInf);
  EXPECT_EQ(exhausted.upper, kInf);
  EXPECT_EQ(m.calibration_scores(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Icp, NormalizedIntervalScalesBySigma) {
  const IcpModel m(std::make_shared<ConstantRegressor>(10.0, 1), std::make_shared<ConstantRegressor>(std::log(2.0), 1),
                   {1, 2, 3, 4}, {MeasureKind::Normalized}, 10);
  const auto iv = m.interval(kOrigin, 0.2);
  EXPECT_NEAR(iv.lower, 2.0, 1e-12);
  EXPECT_NEAR(iv.upper, 18.0, 1e-12);
  EXPECT_THROW(IcpModel(std::make_shared<ConstantRegressor>(0, 1), nullptr, {1}, {MeasureKind::Normalized}, 1),
               std::invalid_argument);
}

TEST(Icp, ThreeExampleShard) {
  const auto d = test::make_dataset({{0.0}, {1.0}, {2.0}}, {1, 2, 3});
  const auto m = fit_icp(d, plain_config(), 1);
  EXPECT_EQ(m.proper_size(), 2u);
  EXPECT_EQ(m.calibration_scores().size(), 1u);
}

TEST(Icp, ConcreteShardSplit) {
  EXPECT_EQ(calibration_size(463, 1.0 / 3.0), 154u);
  const auto d = test::sine_data(463, 0.1, 2);
  const auto m = fit_icp(d, plain_config(), 3);
  EXPECT_EQ(m.proper_size(), 309u);
  EXPECT_EQ(m.calibration_scores().size(), 154u);
}

TEST(Icp, ConstantLabelsGiveZeroScores) {
  auto d = test::sine_data(60, 0.0, 1);
  d = d.with_labels(std::vector<double>(60, 4.2));
  const auto m = fit_icp(d, plain_config(), 1);
  for (double s : m.calibration_scores()) EXPECT_NEAR(s, 0.0, 1e-9);
}

TEST(Icp, TooSmallShard) {
  const auto d = test::make_dataset({{0.0}}, {1.0});
  EXPECT_THROW(fit_icp(d, plain_config(), 1), FitError);
}

// p(y) = (#{alpha_i >= |y - yhat|} + 1) / (n + 1); y is in the region iff p(y) > eps.
TEST(Icp, AgreesWithPValueSweep) {
  Rng rng(2024);
  for (int instance = 0; instance < 25; ++instance) {
    const std::size_t n = 6 + uniform_index(rng, 28);
    const auto d = test::sine_data(n, 0.3, 100 + instance);
    auto cfg = plain_config();
    cfg.calibration_fraction = 0.3 + 0.3 * uniform_unit(rng);
    const auto m = fit_icp(d, cfg, instance);
    const auto& scores = m.calibration_scores();
    ASSERT_LE(scores.size(), 20u);
    const auto [lo_it, hi_it] = std::minmax_element(d.labels().begin(), d.labels().end());
    const double range = *hi_it - *lo_it;
    const double step = 1e-3 * range;
    const std::vector<double> x{uniform_unit(rng)};
    const double y_hat = m.predict(x);
    const double reach = scores.back() + range;
    for (double eps : {0.05, 0.1, 0.2, 0.3}) {
      double first = kInf;
      double last = -kInf;
      for (double y = y_hat - reach; y <= y_hat + reach; y += step) {
        const double a = std::abs(y - y_hat);
        const auto count = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= a; });
        const double p = static_cast<double>(count + 1) / static_cast<double>(scores.size() + 1);
        if (p > eps) {
          first = std::min(first, y);
          last = std::max(last, y);
        }
      }
      const auto iv = m.interval(x, eps);
      if (!iv.finite()) {
        EXPECT_LE(first, y_hat - reach + step);
        EXPECT_GE(last, y_hat + reach - 2 * step);
        EXPECT_LT(eps, 1.0 / static_cast<double>(scores.size() + 1) + 1e-12);
      } else {
        EXPECT_NEAR(first, iv.lower, step);
        EXPECT_NEAR(last, iv.upper, step);
      }
    }
  }
}

TEST(Icp, ExhaustionBelowOneOverNPlusOne) {
  for (std::size_t n = 1; n < 40; ++n) {
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = static_cast<double>(i);
    const IcpModel m(std::make_shared<ConstantRegressor>(0.0, 1), nullptr, scores, {}, 1);
    const double eps = 0.999 / static_cast<double>(n + 1);
    EXPECT_FALSE(m.interval(kOrigin, eps).finite());
    EXPECT_TRUE(m.interval(kOrigin, 1.001 / static_cast<double>(n + 1)).finite());
  }
}

TEST(Icp, NestedAndSymmetric) {
  const auto d = test::sine_data(150, 0.2, 7);
  for (auto kind : {MeasureKind::Absolute, MeasureKind::Normalized}) {
    auto cfg = plain_config();
    cfg.measure.kind = kind;
    const auto m = fit_conformal(d, cfg, 4);
    for (double x = 0.0; x < 1.0; x += 0.05) {
      const std::vector<double> v{x};
      PredictionInterval prev{-kInf, kInf, 0.01};
      for (double eps = 0.02; eps < 0.9; eps += 0.02) {
        const auto iv = m.interval(v, eps);
        EXPECT_LE(prev.lower, iv.lower);
        EXPECT_GE(prev.upper, iv.upper);
        if (iv.finite()) EXPECT_NEAR((iv.lower + iv.upper) / 2.0, m.predict(v), 1e-9);
        prev = iv;
      }
    }
  }
}

TEST(Ccp, PooledRankExample) {
  std::vector<CcpModel::Fold> folds;
  folds.push_back({std::make_shared<ConstantRegressor>(0.0, 1), nullptr, {1, 2, 3}});
  folds.push_back({std::make_shared<ConstantRegressor>(0.0, 1), nullptr, {9, 8, 7}});
  folds.push_back({std::make_shared<ConstantRegressor>(0.0, 1), nullptr, {4, 5, 6}});
  const CcpModel m(std::move(folds), {});
  EXPECT_EQ(m.interval(kOrigin, 0.1), (PredictionInterval{-9, 9, 0.1}));
  EXPECT_EQ(m.pooled_scores().size(), 9u);
}

TEST(Ccp, MeanOfFoldPredictions) {
  std::vector<CcpModel::Fold> folds;
  folds.push_back({std::make_shared<ConstantRegressor>(1.0, 1), nullptr, {1, 2}});
  folds.push_back({std::make_shared<ConstantRegressor>(4.0, 1), nullptr, {1, 2}});
  const CcpModel m(std::move(folds), {});
  EXPECT_EQ(m.predict(kOrigin), 2.5);
}

TEST(Ccp, FoldCounts) {
  const auto four = test::sine_data(4, 0.1, 1);
  auto cfg = plain_config(PredictorKind::Ccp);
  cfg.ccp_folds = 2;
  const auto m = fit_ccp(four, cfg, 1);
  ASSERT_EQ(m.fold_count(), 2u);
  for (const auto& f : m.folds()) EXPECT_EQ(f.scores.size(), 2u);
  EXPECT_EQ(m.pooled_scores().size(), 4u);

  const auto ten = test::sine_data(10, 0.1, 1);
  cfg.ccp_folds = 10;
  const auto loo = fit_ccp(ten, cfg, 1);
  ASSERT_EQ(loo.fold_count(), 10u);
  for (const auto& f : loo.folds()) EXPECT_EQ(f.scores.size(), 1u);

  cfg.ccp_folds = 11;
  EXPECT_THROW(fit_ccp(ten, cfg, 1), FitError);
}

TEST(Ccp, EveryExampleScoredOnce) {
  const auto d = test::sine_data(53, 0.1, 5);
  auto cfg = plain_config(PredictorKind::Ccp);
  cfg.regressor = {RegressorFamily::Linear, {}, false};
  const auto m = fit_ccp(d, cfg, 3);
  // Recompute every example's score under the model that did not train on it.
  std::vector<double> recomputed;
  const auto folds = kfold_indices(d.size(), 5, derive_seed(3, {0x636370}));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (auto i : folds[f]) recomputed.push_back(std::abs(d.label(i) - m.folds()[f].regressor->predict(d.row(i))));
  }
  std::sort(recomputed.begin(), recomputed.end());
  EXPECT_EQ(recomputed, m.pooled_scores());
}

TEST(Ccp, ConstantDataDegeneratesToIcpOnPooledScores) {
  auto d = test::sine_data(40, 0.0, 3).with_labels(std::vector<double>(40, -1.5));
  auto cfg = plain_config(PredictorKind::Ccp);
  const auto m = fit_ccp(d, cfg, 2);
  for (double s : m.pooled_scores()) EXPECT_NEAR(s, 0.0, 1e-9);
  const IcpModel icp(m.folds()[0].regressor, nullptr, m.pooled_scores(), {}, 1);
  for (double eps : {0.05, 0.1, 0.2}) {
    const auto a = m.interval(kOrigin, eps);
    const auto b = icp.interval(kOrigin, eps);
    EXPECT_NEAR(a.lower, b.lower, 1e-9);
    EXPECT_NEAR(a.upper, b.upper, 1e-9);
  }
}

TEST(Ccp, WidthMonotoneInEpsilon) {
  const auto d = test::sine_data(120, 0.2, 9);
  for (auto kind : {MeasureKind::Absolute, MeasureKind::Normalized}) {
    auto cfg = plain_config(PredictorKind::Ccp);
    cfg.measure.kind = kind;
    const auto m = fit_conformal(d, cfg, 1);
    for (double x = 0.0; x < 1.0; x += 0.1) {
      const std::vector<double> v{x};
      double prev = kInf;
      for (double eps : {0.05, 0.1, 0.15, 0.2}) {
        const double w = m.interval(v, eps).width();
        EXPECT_LE(w, prev);
        prev = w;
      }
    }
  }
}

TEST(Predictor, ChecksArguments) {
  const auto d = test::sine_data(30, 0.1, 1);
  const auto m = fit_conformal(d, plain_config(), 1);
  EXPECT_THROW(m.interval(std::vector<double>{0.1, 0.2}, 0.1), std::invalid_argument);
  EXPECT_THROW(m.interval(kOrigin, 0.0), std::invalid_argument);
  EXPECT_THROW(m.interval(kOrigin, 1.5), std::invalid_argument);
  EXPECT_EQ(m.kind(), PredictorKind::Icp);
  EXPECT_NE(m.icp(), nullptr);
  EXPECT_EQ(m.ccp(), nullptr);
}

TEST(Predictor, DeterministicGivenSeed) {
  const auto d = test::sine_data(90, 0.1, 1);
  for (auto kind : {PredictorKind::Icp, PredictorKind::Ccp}) {
    auto cfg = default_predictor_config();
    cfg.kind = kind;
    const auto a = fit_conformal(d, cfg, 5);
    const auto b = fit_conformal(d, cfg, 5);
    for (double x = 0.0; x < 1.0; x += 0.1) {
      EXPECT_EQ(a.interval(std::vector<double>{x}, 0.1), b.interval(std::vector<double>{x}, 0.1));
    }
  }
}

// One fresh draw per repetition; coverage of a single test point is Bernoulli.
TEST(Icp, MarginalValidityBand) {
  const std::size_t reps = 1000;
  const std::vector<double> eps_levels{0.05, 0.1, 0.2};
  std::vector<std::size_t> covered(eps_levels.size(), 0);
  auto cfg = plain_config();
  cfg.regressor.params = {{"gamma", 3.0}, {"lambda", 0.05}};
  // 200 examples with 79 calibration scores: (n_cal + 1)(1 - eps) is integral
  // for every level tested, so the expected coverage is exactly 1 - eps.
  cfg.calibration_fraction = 0.395;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto d = test::sine_data(201, 0.1, 5000 + r, 1.0);
    const auto train = d.subset(std::vector<std::size_t>([] {
      std::vector<std::size_t> v(200);
      for (std::size_t i = 0; i < 200; ++i) v[i] = i;
      return v;
    }()));
    const auto m = fit_icp(train, cfg, r);
    ASSERT_EQ(m.calibration_scores().size(), 79u);
    for (std::size_t e = 0; e < eps_levels.size(); ++e) {
      covered[e] += m.interval(d.row(200), eps_levels[e]).contains(d.label(200));
    }
  }
  for (std::size_t e = 0; e < eps_levels.size(); ++e) {
    const double p = 1.0 - eps_levels[e];
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
    const double rate = static_cast<double>(covered[e]) / static_cast<double>(reps);
    EXPECT_NEAR(rate, p, 3.0 * sigma) << "eps " << eps_levels[e];
  }
}

}  // namespace
}  // namespace ndcp
