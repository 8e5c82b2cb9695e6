#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conformal.hpp"

namespace ndcp {

/// Sample median; an even count averages the two central order statistics.
/// Infinite values take part in the ordering.
double median(std::vector<double> values);

/// Median of the lower bounds and median of the upper bounds. All inputs must
/// share one significance level.
PredictionInterval combine(std::span<const PredictionInterval> intervals);

struct CombinedInterval {
  PredictionInterval interval;
  std::size_t source_count = 0;
  /// Per-source intervals in source order, kept for diagnostics only.
  std::vector<PredictionInterval> per_source;
  /// Indices of sources that failed (quorum mode only).
  std::vector<std::size_t> failed_sources;
};

/// Raised when too few sources answered.
class QuorumError : public std::runtime_error {
 public:
  QuorumError(std::size_t responders, std::size_t required, std::vector<std::string> outcomes);
  std::size_t responders() const noexcept { return responders_; }
  std::size_t required() const noexcept { return required_; }
  const std::vector<std::string>& outcomes() const noexcept { return outcomes_; }

 private:
  std::size_t responders_;
  std::size_t required_;
  std::vector<std::string> outcomes_;
};

/// Something that turns (x, eps) into an interval and nothing else.
using IntervalSource = std::function<PredictionInterval(std::span<const double>, double)>;

IntervalSource as_source(const ConformalPredictor& predictor);

struct FailurePolicy {
  /// Unset: any failing source aborts the prediction. Set: combine the
  /// survivors when at least this many answered.
  std::optional<std::size_t> quorum;

  /// ceil(K/2) survivors.
  static FailurePolicy majority(std::size_t source_count);
};

/// Queries every source with the same object and significance, then combines.
CombinedInterval ndcp_predict(std::span<const IntervalSource> sources, std::span<const double> x, double epsilon,
                              const FailurePolicy& policy = {});

struct ShrinkResult {
  double factor = 1.0;
  std::vector<PredictionInterval> intervals;
};

/// Common symmetric shrink factor c in [0, 1] giving the smallest intervals
/// that still cover at least ceil((1 - eps) n) of the truths. Needs the
/// truths, so it is an evaluation device rather than a predictor.
ShrinkResult ideal_shrink(std::span<const PredictionInterval> intervals, std::span<const double> truths,
                          double epsilon);

/// Interval [m - c w/2, m + c w/2] around the midpoint m of `iv`.
PredictionInterval shrink_interval(const PredictionInterval& iv, double factor);

}  // namespace ndcp
