#include "aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ndcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_interval(const PredictionInterval& iv) {
  if (std::isnan(iv.lower) || std::isnan(iv.upper) || iv.lower > iv.upper || iv.lower == kInf ||
      iv.upper == -kInf) {
    throw std::invalid_argument("malformed interval [" + std::to_string(iv.lower) + ", " + std::to_string(iv.upper) +
                                "]");
  }
}

std::size_t covered_count(std::span<const PredictionInterval> intervals, std::span<const double> truths) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) c += intervals[i].contains(truths[i]) ? 1 : 0;
  return c;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty list");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper_mid = values[mid];
  if (n % 2 == 1) return upper_mid;
  const double lower_mid = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  if (lower_mid == upper_mid) return lower_mid;
  return (lower_mid + upper_mid) / 2.0;
}

PredictionInterval combine(std::span<const PredictionInterval> intervals) {
  if (intervals.empty()) throw std::invalid_argument("combine: no intervals");
  const double eps = intervals.front().significance;
  std::vector<double> lowers;
  std::vector<double> uppers;
  lowers.reserve(intervals.size());
  uppers.reserve(intervals.size());
  for (const auto& iv : intervals) {
    validate_interval(iv);
    if (iv.significance != eps) throw std::invalid_argument("combine: intervals have mixed significance levels");
    lowers.push_back(iv.lower);
    uppers.push_back(iv.upper);
  }
  return {median(std::move(lowers)), median(std::move(uppers)), eps};
}

QuorumError::QuorumError(std::size_t responders, std::size_t required, std::vector<std::string> outcomes)
    : std::runtime_error([&] {
        std::string msg = "quorum not met: " + std::to_string(responders) + " of " + std::to_string(outcomes.size()) +
                          " sources answered, " + std::to_string(required) + " required";
        for (std::size_t i = 0; i < outcomes.size(); ++i) msg += "\n  source " + std::to_string(i) + ": " + outcomes[i];
        return msg;
      }()),
      responders_(responders),
      required_(required),
      outcomes_(std::move(outcomes)) {}

IntervalSource as_source(const ConformalPredictor& predictor) {
  return [&predictor](std::span<const double> x, double eps) { return predictor.interval(x, eps); };
}

FailurePolicy FailurePolicy::majority(std::size_t source_count) { return {(source_count + 1) / 2}; }

CombinedInterval ndcp_predict(std::span<const IntervalSource> sources, std::span<const double> x, double epsilon,
                              const FailurePolicy& policy) {
  if (sources.empty()) throw std::invalid_argument("ndcp_predict: no sources");
  validate_significance(epsilon);
  CombinedInterval out;
  out.source_count = sources.size();
  std::vector<std::string> outcomes;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    try {
      out.per_source.push_back(sources[k](x, epsilon));
      outcomes.emplace_back("ok");
    } catch (const std::exception& e) {
      if (!policy.quorum) throw;
      out.failed_sources.push_back(k);
      outcomes.emplace_back(e.what());
    }
  }
  if (policy.quorum && out.per_source.size() < std::max<std::size_t>(*policy.quorum, 1)) {
    throw QuorumError(out.per_source.size(), *policy.quorum, std::move(outcomes));
  }
  out.interval = combine(out.per_source);
  return out;
}

PredictionInterval shrink_interval(const PredictionInterval& iv, double factor) {
  if (factor == 1.0) return iv;
  const double mid = iv.lower / 2.0 + iv.upper / 2.0;
  const double half = factor * ((iv.upper - iv.lower) / 2.0);
  return {mid - half, mid + half, iv.significance};
}

ShrinkResult ideal_shrink(std::span<const PredictionInterval> intervals, std::span<const double> truths,
                          double epsilon) {
  if (intervals.empty()) throw std::invalid_argument("ideal_shrink: no intervals");
  if (intervals.size() != truths.size()) throw std::invalid_argument("ideal_shrink: length mismatch");
  validate_significance(epsilon);
  const std::size_t n = intervals.size();
  std::vector<double> critical(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& iv = intervals[i];
    if (!iv.finite()) throw std::invalid_argument("ideal_shrink: intervals must be finite");
    validate_interval(iv);
    const double mid = iv.lower / 2.0 + iv.upper / 2.0;
    const double half = (iv.upper - iv.lower) / 2.0;
    const double dist = std::abs(truths[i] - mid);
    critical[i] = half > 0.0 ? dist / half : (dist == 0.0 ? 0.0 : kInf);
  }
  std::sort(critical.begin(), critical.end());
  const double target = (1.0 - epsilon) * static_cast<double>(n);
  const auto need = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(target - 1e-9)));

  ShrinkResult out;
  double factor = std::min(critical[need - 1], 1.0);
  auto apply = [&](double c) {
    out.intervals.clear();
    for (const auto& iv : intervals) out.intervals.push_back(shrink_interval(iv, c));
  };
  apply(factor);
  // Rounding in m +- c w/2 can leave the boundary example a few ulps outside.
  while (factor < 1.0 && covered_count(out.intervals, truths) < need) {
    factor = std::min(1.0, std::nextafter(factor, kInf));
    apply(factor);
  }
  out.factor = factor;
  return out;
}

}  // namespace ndcp
