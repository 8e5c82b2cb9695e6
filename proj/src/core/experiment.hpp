#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aggregation.hpp"
#include "conformal.hpp"
#include "data.hpp"

namespace ndcp {

/// Fraction of truths inside their (closed) intervals.
double validity(std::span<const PredictionInterval> intervals, std::span<const double> truths);

/// Median interval width; infinite widths take part.
double efficiency(std::span<const PredictionInterval> intervals);

struct ExperimentConfig {
  std::string dataset;
  std::string label_column;
  std::vector<PartitionScheme> schemes{PartitionScheme::Equal, PartitionScheme::Unequal, PartitionScheme::NonIID};
  std::vector<std::size_t> source_counts{2, 4, 6};
  std::size_t repetitions = 100;
  std::vector<double> significances{0.05, 0.10, 0.15, 0.20};
  std::vector<PredictorKind> predictors{PredictorKind::Icp, PredictorKind::Ccp};
  PredictorConfig predictor;
  double test_fraction = 0.1;
  double non_iid_quantile = 0.75;
  double non_iid_boost = 2.0;
  double unequal_ratio = 2.0;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const;
};

/// Config with the stock regressor grid for `family`.
PredictorConfig default_predictor_config(RegressorFamily family = RegressorFamily::KernelRidge);
GridSearchSpec default_grid(RegressorFamily family);

inline constexpr const char* kModelNdcp = "NDCP";
inline constexpr const char* kModelIdeal = "IdealNDCP";
inline constexpr const char* kModelPooled = "Pooled";
std::string source_model_name(std::size_t index);  // "Source1", ...

struct MetricsRow {
  std::string model;
  std::size_t n = 0;
  double validity = 0.0;
  double efficiency = 0.0;
};

struct CellKey {
  PartitionScheme scheme = PartitionScheme::Equal;
  std::size_t sources = 0;
  PredictorKind predictor = PredictorKind::Icp;
  double significance = 0.0;

  bool operator==(const CellKey&) const = default;
};

struct RepetitionRow {
  std::size_t repetition = 0;
  CellKey key;
  MetricsRow metrics;
};

/// Aggregate over repetitions: mean validity, median of per-repetition median widths.
struct ReportCell {
  CellKey key;
  std::vector<MetricsRow> rows;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReportCell> cells;
  std::vector<RepetitionRow> repetitions;

  const ReportCell* find(const CellKey& key) const;
  /// Per-repetition rows of one model in one cell, ordered by repetition.
  std::vector<MetricsRow> series(const CellKey& key, const std::string& model) const;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional progress hook, called after each finished repetition.
using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& data, const ProgressFn& progress = {});

}  // namespace ndcp
