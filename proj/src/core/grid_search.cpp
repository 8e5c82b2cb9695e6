#include "grid_search.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "kernel_solvers.hpp"
#include "random.hpp"

namespace ndcp {

namespace {

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& held_out) {
  std::vector<char> mask(n, 1);
  for (auto i : held_out) mask[i] = 0;
  std::vector<std::size_t> out;
  out.reserve(n - held_out.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

double lookup(const Hyperparameters& params, const Hyperparameters& defaults, const char* name) {
  auto it = params.find(name);
  return it != params.end() ? it->second : defaults.at(name);
}

// Kernel families: one Gram matrix per gamma, sliced per fold.
double kernel_cv_mse(const Dataset& train, const RegressorSpec& spec,
                     const std::vector<std::vector<std::size_t>>& folds, std::map<double, Eigen::MatrixXd>& grams) {
  const auto defaults = default_hyperparameters(spec.family);
  const double gamma = lookup(spec.params, defaults, "gamma");
  auto it = grams.find(gamma);
  if (it == grams.end()) it = grams.emplace(gamma, detail::gram_matrix(train, gamma)).first;
  const Eigen::MatrixXd& gram = it->second;

  double total = 0.0;
  for (const auto& held_out : folds) {
    const auto fit_idx = complement(train.size(), held_out);
    std::vector<Eigen::Index> fit_e(fit_idx.begin(), fit_idx.end());
    std::vector<Eigen::Index> val_e(held_out.begin(), held_out.end());
    std::vector<double> y(fit_idx.size());
    for (std::size_t r = 0; r < fit_idx.size(); ++r) y[r] = train.label(fit_idx[r]);
    const Eigen::MatrixXd sub = gram(fit_e, fit_e);
    const Eigen::MatrixXd cross = gram(val_e, fit_e);

    Eigen::VectorXd coef(static_cast<Eigen::Index>(fit_idx.size()));
    double offset = 0.0;
    if (spec.family == RegressorFamily::KernelRidge) {
      auto sol = detail::solve_kernel_ridge(sub, y, lookup(spec.params, defaults, "lambda"));
      for (std::size_t r = 0; r < sol.coefficients.size(); ++r) coef(static_cast<Eigen::Index>(r)) = sol.coefficients[r];
      offset = sol.label_mean;
    } else {
      SvrOptions o;
      o.c = lookup(spec.params, defaults, "c");
      o.eps_tube = lookup(spec.params, defaults, "epsilon");
      o.gamma = gamma;
      o.tolerance = lookup(spec.params, defaults, "tolerance");
      o.max_iterations = static_cast<std::size_t>(lookup(spec.params, defaults, "max_iterations"));
      auto sol = detail::solve_svr(sub, y, o);
      for (std::size_t r = 0; r < sol.alpha.size(); ++r) {
        coef(static_cast<Eigen::Index>(r)) = sol.alpha[r] - sol.alpha_star[r];
      }
      offset = sol.bias;
    }
    const Eigen::VectorXd pred = cross * coef;
    double sse = 0.0;
    for (std::size_t r = 0; r < held_out.size(); ++r) {
      const double e = train.label(held_out[r]) - (offset + pred(static_cast<Eigen::Index>(r)));
      sse += e * e;
    }
    total += sse / static_cast<double>(held_out.size());
  }
  return total / static_cast<double>(folds.size());
}

}  // namespace

std::vector<Hyperparameters> GridSearchSpec::points() const {
  if (axes.empty()) throw std::invalid_argument("grid search: grid is empty");
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw std::invalid_argument("grid search: axis '" + axis.name + "' is empty");
  }
  std::vector<Hyperparameters> out{{}};
  for (const auto& axis : axes) {
    std::vector<Hyperparameters> next;
    for (const auto& prefix : out) {
      for (double v : axis.values) {
        auto point = prefix;
        point[axis.name] = v;
        next.push_back(std::move(point));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("k-fold: need at least 2 folds");
  if (folds > n) {
    throw std::invalid_argument("k-fold: " + std::to_string(folds) + " folds exceed " + std::to_string(n) +
                                " examples");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span(order), rng);
  std::vector<std::vector<std::size_t>> out(folds);
  const std::size_t base = n / folds;
  const std::size_t extra = n % folds;
  auto it = order.begin();
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    out[f].assign(it, it + static_cast<std::ptrdiff_t>(size));
    it += static_cast<std::ptrdiff_t>(size);
  }
  return out;
}

double cross_validated_mse(const Dataset& train, const RegressorSpec& spec,
                           const std::vector<std::vector<std::size_t>>& folds, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto fit_idx = complement(train.size(), folds[f]);
    auto model = fit_regressor(train.subset(fit_idx), spec, derive_seed(seed, {f}));
    double sse = 0.0;
    for (auto i : folds[f]) {
      const double e = train.label(i) - model->predict(train.row(i));
      sse += e * e;
    }
    total += sse / static_cast<double>(folds[f].size());
  }
  return total / static_cast<double>(folds.size());
}

GridSearchResult grid_search(const Dataset& train, const RegressorSpec& base, const GridSearchSpec& spec) {
  const auto points = spec.points();
  if (spec.folds < 2) throw std::invalid_argument("grid search: folds must be >= 2");
  if (train.size() < spec.folds) {
    throw std::invalid_argument("grid search: " + std::to_string(spec.folds) + " folds exceed " +
                                std::to_string(train.size()) + " examples");
  }
  const auto folds = kfold_indices(train.size(), spec.folds, spec.seed);

  RegressorSpec inner = base;
  const Dataset* data = &train;
  Dataset scaled;
  const bool kernel = base.family == RegressorFamily::KernelRidge || base.family == RegressorFamily::Svr;
  if (base.standardize && kernel) {
    scaled = FeatureScaler(train).transform(train);
    data = &scaled;
    inner.standardize = false;
  }

  GridSearchResult result;
  result.best_score = std::numeric_limits<double>::infinity();
  std::map<double, Eigen::MatrixXd> grams;
  bool found = false;
  for (const auto& point : points) {
    RegressorSpec candidate = inner;
    for (const auto& [k, v] : point) candidate.params[k] = v;
    double score = std::numeric_limits<double>::infinity();
    try {
      score = kernel ? kernel_cv_mse(*data, candidate, folds, grams)
                     : cross_validated_mse(*data, candidate, folds, derive_seed(spec.seed, {1}));
    } catch (const FitError&) {
      // Unfit candidates stay at +inf.
    }
    if (!std::isfinite(score)) score = std::numeric_limits<double>::infinity();
    result.scores.push_back(score);
    if (!found || score < result.best_score) {
      result.best_score = score;
      result.best = candidate.params;
      found = true;
    }
  }
  if (!std::isfinite(result.best_score)) throw FitError("grid search: no grid point could be fitted");
  return result;
}

}  // namespace ndcp
