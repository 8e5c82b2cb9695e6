#include "conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "random.hpp"

namespace ndcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RegressorSpec select_hyperparameters(const Dataset& train, const PredictorConfig& config, std::uint64_t seed) {
  RegressorSpec spec = config.regressor;
  if (config.grid) {
    GridSearchSpec grid = *config.grid;
    grid.seed = derive_seed(seed, {0x67726964});
    spec.params = grid_search(train, spec, grid).best;
  }
  return spec;
}

// Difficulty model: least squares on ln(|residual| + beta) over the training set.
RegressorPtr fit_sigma_model(const Dataset& train, const Regressor& regressor, double beta) {
  std::vector<double> targets(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    targets[i] = std::log(std::abs(train.label(i) - regressor.predict(train.row(i))) + beta);
  }
  return fit_linear(train.with_labels(std::move(targets)));
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& held_out) {
  std::vector<char> mask(n, 1);
  for (auto i : held_out) mask[i] = 0;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

std::string to_string(MeasureKind k) { return k == MeasureKind::Absolute ? "absolute" : "normalized"; }

MeasureKind measure_kind_from_string(const std::string& s) {
  if (s == "absolute") return MeasureKind::Absolute;
  if (s == "normalized" || s == "normalised") return MeasureKind::Normalized;
  throw std::invalid_argument("unknown nonconformity measure '" + s + "'");
}

std::string to_string(PredictorKind k) { return k == PredictorKind::Icp ? "icp" : "ccp"; }

PredictorKind predictor_kind_from_string(const std::string& s) {
  if (s == "icp" || s == "ICP") return PredictorKind::Icp;
  if (s == "ccp" || s == "CCP") return PredictorKind::Ccp;
  throw std::invalid_argument("unknown predictor '" + s + "' (expected icp or ccp)");
}

double score(const NonconformityMeasure& measure, double truth, double prediction, std::optional<double> sigma) {
  const double residual = std::abs(truth - prediction);
  if (measure.kind == MeasureKind::Absolute) {
    if (sigma) throw std::invalid_argument("absolute measure takes no sigma");
    return residual;
  }
  if (!sigma) throw std::invalid_argument("normalized measure needs sigma");
  return residual / std::exp(*sigma);
}

bool PredictionInterval::finite() const noexcept { return std::isfinite(lower) && std::isfinite(upper); }

void validate_significance(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("significance must lie in (0, 1), got " + std::to_string(epsilon));
  }
}

std::size_t calibration_rank(std::size_t n_calibration, double epsilon) {
  validate_significance(epsilon);
  // The small slack keeps products like 0.95 * 60 from rounding up past 57.
  const double target = (1.0 - epsilon) * static_cast<double>(n_calibration + 1);
  return static_cast<std::size_t>(std::ceil(target - 1e-9));
}

double calibration_quantile(std::span<const double> sorted_scores, double epsilon) {
  const auto k = calibration_rank(sorted_scores.size(), epsilon);
  if (k > sorted_scores.size()) return kInf;
  return sorted_scores[k == 0 ? 0 : k - 1];
}

std::size_t calibration_size(std::size_t size, double calibration_fraction) {
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw std::invalid_argument("calibration_fraction must lie in (0, 1)");
  }
  return static_cast<std::size_t>(std::llround(static_cast<double>(size) * calibration_fraction));
}

IcpModel::IcpModel(RegressorPtr regressor, RegressorPtr sigma_model, std::vector<double> calibration_scores,
                   NonconformityMeasure measure, std::size_t proper_size)
    : regressor_(std::move(regressor)),
      sigma_(std::move(sigma_model)),
      scores_(std::move(calibration_scores)),
      measure_(measure),
      proper_size_(proper_size) {
  std::sort(scores_.begin(), scores_.end());
  if ((measure_.kind == MeasureKind::Normalized) != static_cast<bool>(sigma_)) {
    throw std::invalid_argument("ICP: sigma model must be present exactly for the normalized measure");
  }
}

PredictionInterval IcpModel::interval(std::span<const double> x, double epsilon) const {
  const double q = calibration_quantile(scores_, epsilon);
  if (std::isinf(q)) return {-kInf, kInf, epsilon};
  const double y_hat = regressor_->predict(x);
  const double half = sigma_ ? q * std::exp(sigma_->predict(x)) : q;
  return {y_hat - half, y_hat + half, epsilon};
}

CcpModel::CcpModel(std::vector<Fold> folds, NonconformityMeasure measure)
    : folds_(std::move(folds)), measure_(measure) {
  if (folds_.size() < 2) throw std::invalid_argument("CCP needs at least two folds");
  for (const auto& f : folds_) pooled_.insert(pooled_.end(), f.scores.begin(), f.scores.end());
  std::sort(pooled_.begin(), pooled_.end());
}

double CcpModel::predict(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& f : folds_) s += f.regressor->predict(x);
  return s / static_cast<double>(folds_.size());
}

PredictionInterval CcpModel::interval(std::span<const double> x, double epsilon) const {
  const double q = calibration_quantile(pooled_, epsilon);
  if (std::isinf(q)) return {-kInf, kInf, epsilon};
  const double y_hat = predict(x);
  double half = q;
  if (measure_.kind == MeasureKind::Normalized) {
    double sigma = 0.0;
    for (const auto& f : folds_) sigma += f.sigma_model->predict(x);
    half = q * std::exp(sigma / static_cast<double>(folds_.size()));
  }
  return {y_hat - half, y_hat + half, epsilon};
}

IcpModel fit_icp(const Dataset& shard, const PredictorConfig& config, std::uint64_t seed) {
  const std::size_t n_cal = calibration_size(shard.size(), config.calibration_fraction);
  if (n_cal == 0 || n_cal >= shard.size()) {
    throw FitError("ICP: shard of " + std::to_string(shard.size()) + " examples is too small to split");
  }
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x696370}));
  shuffle(std::span(order), rng);
  const auto split = order.begin() + static_cast<std::ptrdiff_t>(shard.size() - n_cal);
  const Dataset proper = shard.subset(std::vector<std::size_t>(order.begin(), split));
  const Dataset calibration = shard.subset(std::vector<std::size_t>(split, order.end()));

  const auto spec = select_hyperparameters(proper, config, seed);
  auto regressor = fit_regressor(proper, spec, derive_seed(seed, {0x726567}));
  RegressorPtr sigma;
  if (config.measure.kind == MeasureKind::Normalized) sigma = fit_sigma_model(proper, *regressor, config.measure.beta);

  std::vector<double> scores(calibration.size());
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    auto x = calibration.row(i);
    std::optional<double> s;
    if (sigma) s = sigma->predict(x);
    scores[i] = score(config.measure, calibration.label(i), regressor->predict(x), s);
  }
  return IcpModel(std::move(regressor), std::move(sigma), std::move(scores), config.measure, proper.size());
}

CcpModel fit_ccp(const Dataset& shard, const PredictorConfig& config, std::uint64_t seed) {
  if (config.ccp_folds < 2 || shard.size() < config.ccp_folds) {
    throw FitError("CCP: need at least " + std::to_string(std::max<std::size_t>(config.ccp_folds, 2)) +
                   " examples, shard has " + std::to_string(shard.size()));
  }
  const auto folds = kfold_indices(shard.size(), config.ccp_folds, derive_seed(seed, {0x636370}));
  const auto spec = select_hyperparameters(shard, config, seed);

  std::vector<CcpModel::Fold> out;
  out.reserve(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Dataset train = shard.subset(complement(shard.size(), folds[f]));
    CcpModel::Fold fold;
    fold.regressor = fit_regressor(train, spec, derive_seed(seed, {0x726567, f}));
    if (config.measure.kind == MeasureKind::Normalized) {
      fold.sigma_model = fit_sigma_model(train, *fold.regressor, config.measure.beta);
    }
    for (auto i : folds[f]) {
      auto x = shard.row(i);
      std::optional<double> s;
      if (fold.sigma_model) s = fold.sigma_model->predict(x);
      fold.scores.push_back(score(config.measure, shard.label(i), fold.regressor->predict(x), s));
    }
    out.push_back(std::move(fold));
  }
  return CcpModel(std::move(out), config.measure);
}

PredictionInterval ConformalPredictor::interval(std::span<const double> x, double epsilon) const {
  validate_significance(epsilon);
  if (x.size() != feature_count()) {
    throw std::invalid_argument("expected " + std::to_string(feature_count()) + " features, got " +
                                std::to_string(x.size()));
  }
  return std::visit([&](const auto& m) { return m.interval(x, epsilon); }, model_);
}

double ConformalPredictor::predict(std::span<const double> x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

std::size_t ConformalPredictor::feature_count() const noexcept {
  return std::visit([](const auto& m) { return m.feature_count(); }, model_);
}

ConformalPredictor fit_conformal(const Dataset& shard, const PredictorConfig& config, std::uint64_t seed) {
  if (config.kind == PredictorKind::Icp) return ConformalPredictor(fit_icp(shard, config, seed));
  return ConformalPredictor(fit_ccp(shard, config, seed));
}

}  // namespace ndcp
