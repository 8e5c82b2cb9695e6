#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "data.hpp"
#include "grid_search.hpp"
#include "regressors.hpp"

namespace ndcp {

enum class MeasureKind { Absolute, Normalized };

std::string to_string(MeasureKind k);
MeasureKind measure_kind_from_string(const std::string& s);

struct NonconformityMeasure {
  MeasureKind kind = MeasureKind::Absolute;
  /// Smoothing inside ln(|residual| + beta) for the difficulty model.
  double beta = 0.01;
};

/// |truth - prediction|, divided by exp(sigma) for the normalized measure.
/// `sigma` must be present exactly when the measure is normalized.
double score(const NonconformityMeasure& measure, double truth, double prediction,
             std::optional<double> sigma = std::nullopt);

/// Closed interval [lower, upper] at significance `significance`. Bounds may be infinite.
struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
  double significance = 0.05;

  double width() const noexcept { return upper - lower; }
  bool contains(double y) const noexcept { return lower <= y && y <= upper; }
  bool finite() const noexcept;
  bool operator==(const PredictionInterval&) const = default;
};

/// 1-based rank ceil((1 - eps)(n + 1)) of the calibration quantile. Values
/// above n mean the interval is unbounded.
std::size_t calibration_rank(std::size_t n_calibration, double epsilon);

/// The rank statistic of `sorted_scores` used as interval half-width
/// multiplier; +inf on calibration exhaustion.
double calibration_quantile(std::span<const double> sorted_scores, double epsilon);

void validate_significance(double epsilon);

enum class PredictorKind { Icp, Ccp };

std::string to_string(PredictorKind k);
PredictorKind predictor_kind_from_string(const std::string& s);

/// Everything a data source needs to build its conformal predictor.
struct PredictorConfig {
  PredictorKind kind = PredictorKind::Icp;
  RegressorSpec regressor;
  /// When set, hyperparameters are chosen by cross-validated grid search on
  /// the data the point regressor is trained on.
  std::optional<GridSearchSpec> grid;
  NonconformityMeasure measure;
  /// ICP share of the shard held out for calibration.
  double calibration_fraction = 1.0 / 3.0;
  std::size_t ccp_folds = 5;
};

class IcpModel {
 public:
  IcpModel(RegressorPtr regressor, RegressorPtr sigma_model, std::vector<double> calibration_scores,
           NonconformityMeasure measure, std::size_t proper_size);

  PredictionInterval interval(std::span<const double> x, double epsilon) const;
  double predict(std::span<const double> x) const { return regressor_->predict(x); }

  const std::vector<double>& calibration_scores() const noexcept { return scores_; }
  std::size_t proper_size() const noexcept { return proper_size_; }
  std::size_t feature_count() const noexcept { return regressor_->feature_count(); }
  const NonconformityMeasure& measure() const noexcept { return measure_; }

 private:
  RegressorPtr regressor_;
  RegressorPtr sigma_;
  std::vector<double> scores_;
  NonconformityMeasure measure_;
  std::size_t proper_size_;
};

class CcpModel {
 public:
  struct Fold {
    RegressorPtr regressor;
    RegressorPtr sigma_model;
    std::vector<double> scores;
  };

  CcpModel(std::vector<Fold> folds, NonconformityMeasure measure);

  /// Pooled-calibration interval around the mean of the fold predictions.
  PredictionInterval interval(std::span<const double> x, double epsilon) const;
  double predict(std::span<const double> x) const;

  const std::vector<Fold>& folds() const noexcept { return folds_; }
  std::size_t fold_count() const noexcept { return folds_.size(); }
  /// All fold scores, sorted ascending.
  const std::vector<double>& pooled_scores() const noexcept { return pooled_; }
  std::size_t feature_count() const noexcept { return folds_.front().regressor->feature_count(); }

 private:
  std::vector<Fold> folds_;
  std::vector<double> pooled_;
  NonconformityMeasure measure_;
};

/// Number of calibration examples an ICP takes from a shard of `size`.
std::size_t calibration_size(std::size_t size, double calibration_fraction);

IcpModel fit_icp(const Dataset& shard, const PredictorConfig& config, std::uint64_t seed);
CcpModel fit_ccp(const Dataset& shard, const PredictorConfig& config, std::uint64_t seed);

/// A fitted ICP or CCP.
class ConformalPredictor {
 public:
  explicit ConformalPredictor(IcpModel m) : model_(std::move(m)) {}
  explicit ConformalPredictor(CcpModel m) : model_(std::move(m)) {}

  PredictionInterval interval(std::span<const double> x, double epsilon) const;
  double predict(std::span<const double> x) const;
  std::size_t feature_count() const noexcept;
  PredictorKind kind() const noexcept { return std::holds_alternative<IcpModel>(model_) ? PredictorKind::Icp : PredictorKind::Ccp; }

  const IcpModel* icp() const noexcept { return std::get_if<IcpModel>(&model_); }
  const CcpModel* ccp() const noexcept { return std::get_if<CcpModel>(&model_); }

 private:
  std::variant<IcpModel, CcpModel> model_;
};

ConformalPredictor fit_conformal(const Dataset& shard, const PredictorConfig& config, std::uint64_t seed);

}  // namespace ndcp
