#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "aggregation.hpp"
#include "oracles.hpp"
#include "random.hpp"
#include "support.hpp"

namespace ndcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PredictionInterval iv(double lo, double hi, double eps = 0.1) { return {lo, hi, eps}; }

std::vector<PredictionInterval> random_intervals(Rng& rng, std::size_t k) {
  std::vector<PredictionInterval> out;
  for (std::size_t i = 0; i < k; ++i) {
    const double a = 10.0 * uniform_unit(rng) - 5.0;
    const double b = 10.0 * uniform_unit(rng) - 5.0;
    out.push_back(iv(std::min(a, b), std::max(a, b)));
  }
  return out;
}

TEST(Median, OddEvenAndInfinite) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({-kInf, 1, 2}), 1.0);
  EXPECT_EQ(median({-kInf, -kInf, 2}), -kInf);
  EXPECT_EQ(median({kInf, kInf}), kInf);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(Combine, Examples) {
  const std::vector<PredictionInterval> three{iv(1, 3), iv(2, 6), iv(0, 5)};
  EXPECT_EQ(combine(three), iv(1, 5));
  const std::vector<PredictionInterval> two{iv(0, 2), iv(2, 4)};
  EXPECT_EQ(combine(two), iv(1, 3));
  const std::vector<PredictionInterval> one{iv(-1.25, 7.5, 0.05)};
  EXPECT_EQ(combine(one), one[0]);
}

TEST(Combine, Errors) {
  EXPECT_THROW(combine(std::vector<PredictionInterval>{}), std::invalid_argument);
  const std::vector<PredictionInterval> mixed{iv(0, 1, 0.1), iv(0, 1, 0.05)};
  EXPECT_THROW(combine(mixed), std::invalid_argument);
  const std::vector<PredictionInterval> inverted{iv(2, 1)};
  EXPECT_THROW(combine(inverted), std::invalid_argument);
}

TEST(Combine, InfiniteBoundsParticipate) {
  const std::vector<PredictionInterval> a{iv(-kInf, kInf), iv(0, 2), iv(1, 3)};
  EXPECT_EQ(combine(a), iv(0, 3));
  const std::vector<PredictionInterval> b{iv(-kInf, kInf), iv(-kInf, kInf), iv(1, 3)};
  EXPECT_EQ(combine(b), iv(-kInf, kInf));
}

TEST(Combine, MatchesOrderStatisticOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 7);
    const auto ivs = random_intervals(rng, k);
    std::vector<double> lo;
    std::vector<double> hi;
    for (const auto& i : ivs) {
      lo.push_back(i.lower);
      hi.push_back(i.upper);
    }
    const auto c = combine(ivs);
    EXPECT_DOUBLE_EQ(c.lower, oracle::sample_median(lo));
    EXPECT_DOUBLE_EQ(c.upper, oracle::sample_median(hi));
  }
}

TEST(Combine, Properties) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 9);
    auto ivs = random_intervals(rng, k);
    const auto c = combine(ivs);
    EXPECT_LE(c.lower, c.upper);
    double lo_min = kInf, lo_max = -kInf, hi_min = kInf, hi_max = -kInf;
    for (const auto& i : ivs) {
      lo_min = std::min(lo_min, i.lower);
      lo_max = std::max(lo_max, i.lower);
      hi_min = std::min(hi_min, i.upper);
      hi_max = std::max(hi_max, i.upper);
    }
    EXPECT_GE(c.lower, lo_min);
    EXPECT_LE(c.lower, lo_max);
    EXPECT_GE(c.upper, hi_min);
    EXPECT_LE(c.upper, hi_max);
    shuffle(std::span<PredictionInterval>(ivs), rng);
    EXPECT_EQ(combine(ivs), c);
  }
}

IntervalSource fixed_source(PredictionInterval out) {
  return [out](std::span<const double>, double eps) {
    auto r = out;
    r.significance = eps;
    return r;
  };
}

IntervalSource failing_source() {
  return [](std::span<const double>, double) -> PredictionInterval { throw std::runtime_error("unreachable"); };
}

TEST(NdcpPredict, SingleSourceIsIdentity) {
  const auto d = test::sine_data(60, 0.1, 1);
  PredictorConfig cfg;
  cfg.regressor = {RegressorFamily::KernelRidge, {{"gamma", 1.0}, {"lambda", 0.1}}, true};
  const auto m = fit_conformal(d, cfg, 1);
  const std::vector<IntervalSource> sources{as_source(m)};
  const std::vector<double> x{0.3};
  const auto out = ndcp_predict(sources, x, 0.1);
  EXPECT_EQ(out.interval, m.interval(x, 0.1));
  EXPECT_EQ(out.source_count, 1u);
}

TEST(NdcpPredict, IdenticalShardsGiveTheSharedInterval) {
  const auto d = test::sine_data(60, 0.1, 1);
  PredictorConfig cfg;
  cfg.regressor = {RegressorFamily::KernelRidge, {{"gamma", 1.0}, {"lambda", 0.1}}, true};
  const auto a = fit_conformal(d, cfg, 3);
  const auto b = fit_conformal(d, cfg, 3);
  const auto c = fit_conformal(d, cfg, 3);
  const std::vector<IntervalSource> sources{as_source(a), as_source(b), as_source(c)};
  for (double x = 0.0; x < 1.0; x += 0.1) {
    const std::vector<double> v{x};
    EXPECT_EQ(ndcp_predict(sources, v, 0.2).interval, a.interval(v, 0.2));
  }
}

TEST(NdcpPredict, DistinctShardsEqualHandCombination) {
  const auto d = test::sine_data(180, 0.1, 4);
  const auto shards = partition(d, PartitionPlan{PartitionScheme::Equal, 3, 9});
  PredictorConfig cfg;
  cfg.regressor = {RegressorFamily::KernelRidge, {{"gamma", 2.0}, {"lambda", 0.1}}, true};
  std::vector<ConformalPredictor> models;
  for (std::size_t k = 0; k < shards.size(); ++k) models.push_back(fit_conformal(shards[k], cfg, k));
  std::vector<IntervalSource> sources;
  for (const auto& m : models) sources.push_back(as_source(m));
  const std::vector<double> x{0.42};
  const auto i0 = models[0].interval(x, 0.1);
  const auto i1 = models[1].interval(x, 0.1);
  const auto i2 = models[2].interval(x, 0.1);
  const double lo = std::max(std::min(i0.lower, i1.lower), std::min(std::max(i0.lower, i1.lower), i2.lower));
  const double hi = std::max(std::min(i0.upper, i1.upper), std::min(std::max(i0.upper, i1.upper), i2.upper));
  const auto out = ndcp_predict(sources, x, 0.1);
  EXPECT_EQ(out.interval.lower, lo);
  EXPECT_EQ(out.interval.upper, hi);
  EXPECT_EQ(out.per_source, (std::vector<PredictionInterval>{i0, i1, i2}));
}

TEST(NdcpPredict, FailFastByDefault) {
  const std::vector<IntervalSource> sources{fixed_source(iv(0, 1)), failing_source(), fixed_source(iv(1, 2))};
  const std::vector<double> x{0.0};
  EXPECT_THROW(ndcp_predict(sources, x, 0.1), std::runtime_error);
  try {
    ndcp_predict(sources, x, 0.1);
  } catch (const QuorumError&) {
    ADD_FAILURE() << "fail-fast must not report a quorum error";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "unreachable");
  }
}

TEST(NdcpPredict, QuorumCombinesSurvivors) {
  const std::vector<IntervalSource> sources{fixed_source(iv(0, 1)), failing_source(), fixed_source(iv(1, 2))};
  const std::vector<double> x{0.0};
  const auto out = ndcp_predict(sources, x, 0.1, FailurePolicy::majority(3));
  EXPECT_EQ(out.interval, iv(0.5, 1.5));
  EXPECT_EQ(out.failed_sources, std::vector<std::size_t>{1});
  EXPECT_EQ(out.per_source.size(), 2u);

  EXPECT_EQ(FailurePolicy::majority(3).quorum, 2u);
  EXPECT_EQ(FailurePolicy::majority(4).quorum, 2u);
  EXPECT_EQ(FailurePolicy::majority(1).quorum, 1u);

  const std::vector<IntervalSource> mostly_down{failing_source(), failing_source(), fixed_source(iv(1, 2))};
  try {
    ndcp_predict(mostly_down, x, 0.1, FailurePolicy::majority(3));
    ADD_FAILURE() << "expected a quorum error";
  } catch (const QuorumError& e) {
    EXPECT_EQ(e.responders(), 1u);
    EXPECT_EQ(e.required(), 2u);
    ASSERT_EQ(e.outcomes().size(), 3u);
    EXPECT_EQ(e.outcomes()[2], "ok");
    EXPECT_EQ(e.outcomes()[0], "unreachable");
  }
}

TEST(NdcpPredict, Errors) {
  const std::vector<double> x{0.0};
  EXPECT_THROW(ndcp_predict(std::vector<IntervalSource>{}, x, 0.1), std::invalid_argument);
  const std::vector<IntervalSource> one{fixed_source(iv(0, 1))};
  EXPECT_THROW(ndcp_predict(one, x, 0.0), std::invalid_argument);
}

TEST(Shrink, Interval) {
  EXPECT_EQ(shrink_interval(iv(0, 4), 0.5), iv(1, 3));
  EXPECT_EQ(shrink_interval(iv(0, 4), 1.0), iv(0, 4));
  EXPECT_EQ(shrink_interval(iv(-2, 2), 0.0), iv(0, 0));
}

// Smallest c on a grid for which at least ceil((1 - eps) n) truths satisfy
// |y - m| <= c w / 2.
double grid_scan_factor(const std::vector<PredictionInterval>& ivs, const std::vector<double>& y, double eps,
                        double step) {
  const auto need = static_cast<std::size_t>(std::ceil((1.0 - eps) * static_cast<double>(ivs.size()) - 1e-9));
  for (double c = 0.0; c <= 1.0; c += step) {
    std::size_t covered = 0;
    for (std::size_t i = 0; i < ivs.size(); ++i) {
      const double m = (ivs[i].lower + ivs[i].upper) / 2.0;
      const double w = ivs[i].upper - ivs[i].lower;
      covered += std::abs(y[i] - m) <= c * w / 2.0 ? 1 : 0;
    }
    if (covered >= need) return c;
  }
  return 1.0;
}

std::size_t coverage(const std::vector<PredictionInterval>& ivs, const std::vector<double>& y) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < ivs.size(); ++i) c += ivs[i].contains(y[i]) ? 1 : 0;
  return c;
}

TEST(IdealShrink, TenIntervalsMatchGridScan) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PredictionInterval> ivs;
    std::vector<double> y;
    std::vector<double> critical;
    for (int i = 0; i < 10; ++i) {
      const double m = uniform_unit(rng) * 4.0;
      const double w = 0.5 + uniform_unit(rng) * 3.0;
      ivs.push_back(iv(m - w / 2.0, m + w / 2.0));
      y.push_back(m + (uniform_unit(rng) - 0.5) * w * 0.95);
      critical.push_back(2.0 * std::abs(y.back() - m) / w);
    }
    const auto r = ideal_shrink(ivs, y, 0.1);
    std::sort(critical.begin(), critical.end());
    EXPECT_NEAR(r.factor, critical[8], 1e-12);
    EXPECT_NEAR(r.factor, grid_scan_factor(ivs, y, 0.1, 1e-4), 1e-4 + 1e-12);
    EXPECT_GE(coverage(r.intervals, y), 9u);
  }
}

TEST(IdealShrink, TruthsAtMidpoints) {
  const std::vector<PredictionInterval> ivs{iv(0, 2), iv(1, 5), iv(-3, 3)};
  const std::vector<double> y{1, 3, 0};
  const auto r = ideal_shrink(ivs, y, 0.1);
  EXPECT_EQ(r.factor, 0.0);
  EXPECT_EQ(coverage(r.intervals, y), 3u);
}

TEST(IdealShrink, BoundaryTruthsKeepFactorOne) {
  const std::vector<PredictionInterval> ivs{iv(0, 2), iv(1, 5), iv(-3, 3), iv(0, 1)};
  const std::vector<double> y{2, 1, 3, 0};
  const auto r = ideal_shrink(ivs, y, 0.2);
  EXPECT_EQ(r.factor, 1.0);
  EXPECT_EQ(r.intervals, ivs);
}

TEST(IdealShrink, UndercoverageLeavesIntervalsAlone) {
  const std::vector<PredictionInterval> ivs{iv(0, 1), iv(0, 1), iv(0, 1), iv(3, 3)};
  const std::vector<double> y{5, 6, 0.5, 4};
  const auto r = ideal_shrink(ivs, y, 0.1);
  EXPECT_EQ(r.factor, 1.0);
  EXPECT_EQ(r.intervals, ivs);
}

TEST(IdealShrink, Errors) {
  const std::vector<PredictionInterval> ivs{iv(0, 1)};
  EXPECT_THROW(ideal_shrink(ivs, std::vector<double>{}, 0.1), std::invalid_argument);
  EXPECT_THROW(ideal_shrink(std::vector<PredictionInterval>{}, std::vector<double>{}, 0.1), std::invalid_argument);
  const std::vector<PredictionInterval> infinite{iv(-kInf, kInf)};
  EXPECT_THROW(ideal_shrink(infinite, std::vector<double>{0}, 0.1), std::invalid_argument);
}

TEST(IdealShrink, MinimalAndNeverWidens) {
  Rng rng(32);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 60);
    const double eps = 0.01 + 0.4 * uniform_unit(rng);
    std::vector<PredictionInterval> ivs;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = 100.0 * uniform_unit(rng) - 50.0;
      const double w = 20.0 * uniform_unit(rng);
      ivs.push_back(iv(m - w / 2.0, m + w / 2.0));
      y.push_back(m + (uniform_unit(rng) - 0.5) * 1.2 * w);
    }
    const auto need = static_cast<std::size_t>(std::ceil((1.0 - eps) * static_cast<double>(n) - 1e-9));
    const auto r = ideal_shrink(ivs, y, eps);
    ASSERT_EQ(r.intervals.size(), n);
    EXPECT_GT(r.factor, -1e-300);
    EXPECT_LE(r.factor, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(r.intervals[i].width(), ivs[i].width() * (1.0 + 1e-12));
    }
    if (coverage(ivs, y) >= need) {
      EXPECT_GE(coverage(r.intervals, y), need);
      // The next critical factor below c loses coverage.
      std::vector<double> critical;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = ivs[i].upper - ivs[i].lower;
        const double m = (ivs[i].lower + ivs[i].upper) / 2.0;
        critical.push_back(w > 0 ? 2.0 * std::abs(y[i] - m) / w : (y[i] == m ? 0.0 : kInf));
      }
      std::sort(critical.begin(), critical.end());
      const auto below = std::lower_bound(critical.begin(), critical.end(), r.factor * (1.0 - 1e-9));
      if (below != critical.begin()) {
        const double smaller = *(below - 1);
        std::vector<PredictionInterval> tighter;
        for (const auto& i : ivs) tighter.push_back(shrink_interval(i, smaller));
        EXPECT_LT(coverage(tighter, y), need);
      }
    } else {
      EXPECT_EQ(r.factor, 1.0);
    }
  }
}

}  // namespace
}  // namespace ndcp
