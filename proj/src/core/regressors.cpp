#include "regressors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "kernel_solvers.hpp"

namespace ndcp {

namespace {

double param(const Hyperparameters& params, const Hyperparameters& defaults, const std::string& name) {
  if (auto it = params.find(name); it != params.end()) return it->second;
  return defaults.at(name);
}

class StandardizedRegressor final : public Regressor {
 public:
  StandardizedRegressor(FeatureScaler scaler, RegressorPtr inner)
      : scaler_(std::move(scaler)), inner_(std::move(inner)) {}

  double predict(std::span<const double> x) const override { return inner_->predict(scaler_.transform(x)); }
  std::size_t feature_count() const noexcept override { return inner_->feature_count(); }

 private:
  FeatureScaler scaler_;
  RegressorPtr inner_;
};

void check_nonempty(const Dataset& train, const char* what) {
  if (train.empty()) throw std::invalid_argument(std::string(what) + ": empty training set");
}

}  // namespace

ConvergenceError::ConvergenceError(std::size_t iterations, double kkt_gap)
    : FitError("SMO did not converge after " + std::to_string(iterations) + " iterations (KKT gap " +
               std::to_string(kkt_gap) + ")"),
      iterations_(iterations),
      kkt_gap_(kkt_gap) {}

std::string to_string(RegressorFamily f) {
  switch (f) {
    case RegressorFamily::KernelRidge:
      return "kernel_ridge";
    case RegressorFamily::Svr:
      return "svr";
    case RegressorFamily::RandomForest:
      return "random_forest";
    case RegressorFamily::Linear:
      return "linear";
  }
  return "?";
}

RegressorFamily regressor_family_from_string(const std::string& s) {
  if (s == "kernel_ridge" || s == "krr") return RegressorFamily::KernelRidge;
  if (s == "svr") return RegressorFamily::Svr;
  if (s == "random_forest" || s == "rf") return RegressorFamily::RandomForest;
  if (s == "linear" || s == "ols") return RegressorFamily::Linear;
  throw std::invalid_argument("unknown regressor family '" + s + "'");
}

std::vector<double> Regressor::predict_all(const Dataset& d) const {
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = predict(d.row(i));
  return out;
}

FeatureScaler::FeatureScaler(const Dataset& train) {
  check_nonempty(train, "FeatureScaler");
  const std::size_t p = train.feature_count();
  mean_.assign(p, 0.0);
  scale_.assign(p, 0.0);
  const auto n = static_cast<double>(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto r = train.row(i);
    for (std::size_t j = 0; j < p; ++j) mean_[j] += r[j];
  }
  for (auto& m : mean_) m /= n;
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto r = train.row(i);
    for (std::size_t j = 0; j < p; ++j) scale_[j] += (r[j] - mean_[j]) * (r[j] - mean_[j]);
  }
  for (auto& s : scale_) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;
  }
}

void FeatureScaler::transform_into(std::span<const double> x, std::span<double> out) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("FeatureScaler: feature length mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean_[j]) / scale_[j];
}

std::vector<double> FeatureScaler::transform(std::span<const double> x) const {
  std::vector<double> out(x.size());
  transform_into(x, out);
  return out;
}

Dataset FeatureScaler::transform(const Dataset& d) const {
  std::vector<double> features(d.feature_data().size());
  const std::size_t p = d.feature_count();
  for (std::size_t i = 0; i < d.size(); ++i) {
    transform_into(d.row(i), std::span(features).subspan(i * p, p));
  }
  return Dataset(p, std::move(features), std::vector<double>(d.labels().begin(), d.labels().end()),
                 d.feature_names(), d.label_name());
}

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) noexcept {
  double d2 = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double d = u[j] - v[j];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace detail {

Eigen::MatrixXd gram_matrix(const Dataset& d, double gamma) {
  const auto n = static_cast<Eigen::Index>(d.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = rbf_kernel(d.row(static_cast<std::size_t>(i)), d.row(static_cast<std::size_t>(j)), gamma);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

KernelRidgeSolution solve_kernel_ridge(const Eigen::MatrixXd& gram, std::span<const double> labels, double lambda) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  KernelRidgeSolution out;
  double mean = 0.0;
  for (double y : labels) mean += y;
  mean /= static_cast<double>(n);
  Eigen::VectorXd centred(n);
  for (Eigen::Index i = 0; i < n; ++i) centred(i) = labels[static_cast<std::size_t>(i)] - mean;

  Eigen::MatrixXd system = gram;
  system.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  if (ldlt.info() != Eigen::Success) throw FitError("kernel ridge: singular system");
  Eigen::VectorXd a = ldlt.solve(centred);
  if (!a.allFinite()) throw FitError("kernel ridge: singular system");
  out.coefficients.assign(a.data(), a.data() + n);
  out.label_mean = mean;
  return out;
}

}  // namespace detail

KernelRidge::KernelRidge(Dataset train, std::vector<double> coefficients, double label_mean, double gamma)
    : train_(std::move(train)), coefficients_(std::move(coefficients)), label_mean_(label_mean), gamma_(gamma) {}

double KernelRidge::predict(std::span<const double> x) const {
  if (x.size() != train_.feature_count()) throw std::invalid_argument("kernel ridge: feature length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < coefficients_.size(); ++i) s += coefficients_[i] * rbf_kernel(train_.row(i), x, gamma_);
  return label_mean_ + s;
}

std::shared_ptr<const KernelRidge> fit_kernel_ridge(const Dataset& train, double gamma, double lambda) {
  check_nonempty(train, "kernel ridge");
  if (!(gamma > 0.0)) throw std::invalid_argument("kernel ridge: gamma must be > 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("kernel ridge: lambda must be > 0");
  auto sol = detail::solve_kernel_ridge(detail::gram_matrix(train, gamma), train.labels(), lambda);
  return std::make_shared<const KernelRidge>(train, std::move(sol.coefficients), sol.label_mean, gamma);
}

LinearModel::LinearModel(std::vector<double> coefficients, double intercept, bool ridge_fallback)
    : coefficients_(std::move(coefficients)), intercept_(intercept), ridge_fallback_(ridge_fallback) {}

double LinearModel::predict(std::span<const double> x) const {
  if (x.size() != coefficients_.size()) throw std::invalid_argument("linear: feature length mismatch");
  double s = intercept_;
  for (std::size_t j = 0; j < x.size(); ++j) s += coefficients_[j] * x[j];
  return s;
}

std::shared_ptr<const LinearModel> fit_linear(const Dataset& train) {
  check_nonempty(train, "linear");
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto p = static_cast<Eigen::Index>(train.feature_count());
  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto r = train.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < p; ++j) design(i, j) = r[static_cast<std::size_t>(j)];
    design(i, p) = 1.0;
    y(i) = train.label(static_cast<std::size_t>(i));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::VectorXd beta;
  bool fallback = false;
  if (n >= p + 1 && qr.rank() == p + 1) {
    beta = qr.solve(y);
  } else {
    fallback = true;
    Eigen::MatrixXd normal = design.transpose() * design;
    normal.diagonal().array() += 1e-8;
    beta = normal.ldlt().solve(design.transpose() * y);
  }
  std::vector<double> coefficients(beta.data(), beta.data() + p);
  return std::make_shared<const LinearModel>(std::move(coefficients), beta(p), fallback);
}

Hyperparameters default_hyperparameters(RegressorFamily family) {
  switch (family) {
    case RegressorFamily::KernelRidge:
      return {{"gamma", 0.1}, {"lambda", 0.1}};
    case RegressorFamily::Svr:
      return {{"c", 10.0}, {"epsilon", 0.1}, {"gamma", 0.1}, {"tolerance", 1e-3}, {"max_iterations", 1e5}};
    case RegressorFamily::RandomForest:
      return {{"trees", 100.0}, {"min_leaf", 5.0}};
    case RegressorFamily::Linear:
      return {};
  }
  return {};
}

RegressorPtr fit_regressor(const Dataset& train, const RegressorSpec& spec, std::uint64_t seed) {
  check_nonempty(train, "fit_regressor");
  if (spec.standardize && spec.family != RegressorFamily::RandomForest && spec.family != RegressorFamily::Linear) {
    FeatureScaler scaler(train);
    RegressorSpec inner = spec;
    inner.standardize = false;
    auto model = fit_regressor(scaler.transform(train), inner, seed);
    return std::make_shared<const StandardizedRegressor>(std::move(scaler), std::move(model));
  }
  const auto defaults = default_hyperparameters(spec.family);
  const auto& p = spec.params;
  switch (spec.family) {
    case RegressorFamily::KernelRidge:
      return fit_kernel_ridge(train, param(p, defaults, "gamma"), param(p, defaults, "lambda"));
    case RegressorFamily::Svr: {
      SvrOptions o;
      o.c = param(p, defaults, "c");
      o.eps_tube = param(p, defaults, "epsilon");
      o.gamma = param(p, defaults, "gamma");
      o.tolerance = param(p, defaults, "tolerance");
      o.max_iterations = static_cast<std::size_t>(param(p, defaults, "max_iterations"));
      return fit_svr(train, o);
    }
    case RegressorFamily::RandomForest:
      return fit_random_forest(train, static_cast<std::size_t>(param(p, defaults, "trees")),
                               static_cast<std::size_t>(param(p, defaults, "min_leaf")), seed);
    case RegressorFamily::Linear:
      return fit_linear(train);
  }
  throw std::invalid_argument("unknown regressor family");
}

}  // namespace ndcp
