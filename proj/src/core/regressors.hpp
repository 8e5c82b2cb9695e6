#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"

namespace ndcp {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SMO stopped before the KKT gap fell below tolerance.
class ConvergenceError : public FitError {
 public:
  ConvergenceError(std::size_t iterations, double kkt_gap);
  std::size_t iterations() const noexcept { return iterations_; }
  double kkt_gap() const noexcept { return kkt_gap_; }

 private:
  std::size_t iterations_;
  double kkt_gap_;
};

using Hyperparameters = std::map<std::string, double>;

enum class RegressorFamily { KernelRidge, Svr, RandomForest, Linear };

std::string to_string(RegressorFamily f);
RegressorFamily regressor_family_from_string(const std::string& s);

/// A fitted point predictor. Implementations are immutable after fitting.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual double predict(std::span<const double> x) const = 0;
  virtual std::size_t feature_count() const noexcept = 0;

  std::vector<double> predict_all(const Dataset& d) const;
};

using RegressorPtr = std::shared_ptr<const Regressor>;

/// Per-column z-scoring fitted on a training set. Constant columns keep
/// scale 1 so they map to zero.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  explicit FeatureScaler(const Dataset& train);

  std::vector<double> transform(std::span<const double> x) const;
  void transform_into(std::span<const double> x, std::span<double> out) const;
  Dataset transform(const Dataset& d) const;

  std::span<const double> mean() const noexcept { return mean_; }
  std::span<const double> scale() const noexcept { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// RBF kernel exp(-gamma * ||u - v||^2).
double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) noexcept;

/// Kernel ridge regression on centred labels: solves (K + lambda I) a = y - mean(y)
/// and predicts mean(y) + sum_i a_i k(x_i, x).
class KernelRidge final : public Regressor {
 public:
  KernelRidge(Dataset train, std::vector<double> coefficients, double label_mean, double gamma);

  double predict(std::span<const double> x) const override;
  std::size_t feature_count() const noexcept override { return train_.feature_count(); }

  std::span<const double> coefficients() const noexcept { return coefficients_; }
  double label_mean() const noexcept { return label_mean_; }

 private:
  Dataset train_;
  std::vector<double> coefficients_;
  double label_mean_;
  double gamma_;
};

std::shared_ptr<const KernelRidge> fit_kernel_ridge(const Dataset& train, double gamma, double lambda);

struct SvrOptions {
  double c = 1.0;
  double eps_tube = 0.1;
  double gamma = 0.1;
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
};

/// Epsilon-insensitive support vector regression with an RBF kernel, trained by
/// SMO with maximal-violating-pair working set selection.
class SvrModel final : public Regressor {
 public:
  SvrModel(Dataset train, std::vector<double> alpha, std::vector<double> alpha_star, double bias, double gamma,
           std::size_t iterations, double kkt_gap, double objective);

  double predict(std::span<const double> x) const override;
  std::size_t feature_count() const noexcept override { return train_.feature_count(); }

  std::span<const double> alpha() const noexcept { return alpha_; }
  std::span<const double> alpha_star() const noexcept { return alpha_star_; }
  double bias() const noexcept { return bias_; }
  std::size_t iterations() const noexcept { return iterations_; }
  double kkt_gap() const noexcept { return kkt_gap_; }
  /// Dual objective 1/2 b'Kb - y'b + eps*sum|b| with b = alpha - alpha*, at the solution.
  double objective() const noexcept { return objective_; }

 private:
  Dataset train_;
  std::vector<double> alpha_;
  std::vector<double> alpha_star_;
  std::vector<double> coef_;
  double bias_;
  double gamma_;
  std::size_t iterations_;
  double kkt_gap_;
  double objective_;
};

std::shared_ptr<const SvrModel> fit_svr(const Dataset& train, const SvrOptions& options);

class RandomForest final : public Regressor {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  RandomForest(std::vector<Tree> trees, std::size_t feature_count);

  double predict(std::span<const double> x) const override;
  std::size_t feature_count() const noexcept override { return feature_count_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }

 private:
  std::vector<Tree> trees_;
  std::size_t feature_count_;
};

/// Bootstrap-aggregated CART trees; each split considers ceil(p/3) random features.
std::shared_ptr<const RandomForest> fit_random_forest(const Dataset& train, std::size_t trees, std::size_t min_leaf,
                                                      std::uint64_t seed);

/// Ordinary least squares with intercept.
class LinearModel final : public Regressor {
 public:
  LinearModel(std::vector<double> coefficients, double intercept, bool ridge_fallback);

  double predict(std::span<const double> x) const override;
  std::size_t feature_count() const noexcept override { return coefficients_.size(); }

  std::span<const double> coefficients() const noexcept { return coefficients_; }
  double intercept() const noexcept { return intercept_; }
  /// True when the design was rank deficient and a 1e-8 ridge was used.
  bool used_ridge_fallback() const noexcept { return ridge_fallback_; }

 private:
  std::vector<double> coefficients_;
  double intercept_;
  bool ridge_fallback_;
};

std::shared_ptr<const LinearModel> fit_linear(const Dataset& train);

/// Family plus hyperparameters. Names: kernel ridge {gamma, lambda};
/// svr {c, epsilon, gamma, tolerance, max_iterations}; random forest
/// {trees, min_leaf}; linear has none.
struct RegressorSpec {
  RegressorFamily family = RegressorFamily::KernelRidge;
  Hyperparameters params;
  /// z-score features with statistics of the training set before fitting.
  bool standardize = true;
};

/// Defaults used when a hyperparameter is absent from the spec.
Hyperparameters default_hyperparameters(RegressorFamily family);

RegressorPtr fit_regressor(const Dataset& train, const RegressorSpec& spec, std::uint64_t seed);

}  // namespace ndcp
