#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "regressors.hpp"

namespace ndcp {

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

/// Axes are enumerated row-major: the first axis varies slowest.
struct GridSearchSpec {
  std::vector<GridAxis> axes;
  std::size_t folds = 10;
  std::uint64_t seed = 0;

  std::vector<Hyperparameters> points() const;
};

struct GridSearchResult {
  Hyperparameters best;
  double best_score = 0.0;
  /// Mean cross-validated MSE per grid point, in enumeration order. Candidates
  /// whose fit failed (e.g. SMO non-convergence) score +inf.
  std::vector<double> scores;
};

/// Random assignment of `n` items to `folds` folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Selects the grid point with the lowest mean fold MSE; ties keep the earlier
/// point. Grid values override `base.params`. With `base.standardize` the
/// scaler is fitted once on `train` and shared by every fold.
GridSearchResult grid_search(const Dataset& train, const RegressorSpec& base, const GridSearchSpec& spec);

/// Reference path: refits through `fit_regressor` for every fold, no Gram
/// matrix reuse. Used to cross-check the fast path.
double cross_validated_mse(const Dataset& train, const RegressorSpec& spec,
                           const std::vector<std::vector<std::size_t>>& folds, std::uint64_t seed);

}  // namespace ndcp
