#include <cmath>
#include <limits>

#include "kernel_solvers.hpp"
#include "regressors.hpp"

namespace ndcp {

namespace detail {

// The epsilon-SVR dual is written over 2n variables: t < n are the alpha_i
// (sign +1), t >= n the alpha*_i (sign -1), both indexing training row t mod n.
//   min 1/2 a'Qa + p'a   s.t.  sum_t s_t a_t = 0,  0 <= a_t <= C
// with Q_tu = s_t s_u K(t mod n, u mod n) and p_t = eps - s_t y_(t mod n).
SvrSolution solve_svr(const Eigen::MatrixXd& gram, std::span<const double> labels, const SvrOptions& options) {
  if (!(options.c > 0.0)) throw std::invalid_argument("svr: C must be > 0");
  if (!(options.eps_tube >= 0.0)) throw std::invalid_argument("svr: epsilon tube must be >= 0");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("svr: tolerance must be > 0");

  const std::size_t n = labels.size();
  const std::size_t m = 2 * n;
  const double c = options.c;
  constexpr double kTau = 1e-12;

  std::vector<double> a(m, 0.0);
  std::vector<double> grad(m);
  std::vector<double> lin(m);
  auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
  auto base = [n](std::size_t t) { return t < n ? t : t - n; };
  for (std::size_t i = 0; i < n; ++i) {
    lin[i] = options.eps_tube - labels[i];
    lin[i + n] = options.eps_tube + labels[i];
  }
  grad = lin;

  auto in_up = [&](std::size_t t) { return sign(t) > 0 ? a[t] < c : a[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return sign(t) > 0 ? a[t] > 0.0 : a[t] < c; };

  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  while (true) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = m;
    std::size_t j = m;
    for (std::size_t t = 0; t < m; ++t) {
      const double v = -sign(t) * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    gap = g_max - g_min;
    if (i == m || j == m || gap < options.tolerance) break;
    if (iter >= options.max_iterations) throw ConvergenceError(iter, gap);
    ++iter;

    const std::size_t bi = base(i);
    const std::size_t bj = base(j);
    const double si = sign(i);
    const double sj = sign(j);
    const double qii = gram(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(bi));
    const double qjj = gram(static_cast<Eigen::Index>(bj), static_cast<Eigen::Index>(bj));
    const double qij = si * sj * gram(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(bj));
    const double old_ai = a[i];
    const double old_aj = a[j];

    if (si != sj) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = c - diff;
        }
      } else if (a[j] > c) {
        a[j] = c;
        a[i] = c + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) {
          a[i] = c;
          a[j] = sum - c;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > c) {
        if (a[j] > c) {
          a[j] = c;
          a[i] = sum - c;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    const double dai = a[i] - old_ai;
    const double daj = a[j] - old_aj;
    if (dai == 0.0 && daj == 0.0) continue;
    const auto col_i = gram.col(static_cast<Eigen::Index>(bi));
    const auto col_j = gram.col(static_cast<Eigen::Index>(bj));
    for (std::size_t k = 0; k < n; ++k) {
      const double delta = si * dai * col_i(static_cast<Eigen::Index>(k)) +
                           sj * daj * col_j(static_cast<Eigen::Index>(k));
      grad[k] += delta;      // s_k = +1
      grad[k + n] -= delta;  // s_k = -1
    }
  }

  // rho from free variables, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = sign(t) * grad[t];
    const bool at_upper = a[t] >= c;
    const bool at_lower = a[t] <= 0.0;
    if (at_upper) {
      if (sign(t) < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (at_lower) {
      if (sign(t) > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  if (!std::isfinite(rho)) rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);

  SvrSolution out;
  out.alpha.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n));
  out.alpha_star.assign(a.begin() + static_cast<std::ptrdiff_t>(n), a.end());
  out.bias = -rho;
  out.iterations = iter;
  out.kkt_gap = gap;
  double objective = 0.0;
  for (std::size_t t = 0; t < m; ++t) objective += a[t] * (grad[t] + lin[t]);
  out.objective = objective / 2.0;
  return out;
}

}  // namespace detail

SvrModel::SvrModel(Dataset train, std::vector<double> alpha, std::vector<double> alpha_star, double bias,
                   double gamma, std::size_t iterations, double kkt_gap, double objective)
    : train_(std::move(train)),
      alpha_(std::move(alpha)),
      alpha_star_(std::move(alpha_star)),
      bias_(bias),
      gamma_(gamma),
      iterations_(iterations),
      kkt_gap_(kkt_gap),
      objective_(objective) {
  coef_.resize(alpha_.size());
  for (std::size_t i = 0; i < alpha_.size(); ++i) coef_[i] = alpha_[i] - alpha_star_[i];
}

double SvrModel::predict(std::span<const double> x) const {
  if (x.size() != train_.feature_count()) throw std::invalid_argument("svr: feature length mismatch");
  double s = bias_;
  for (std::size_t i = 0; i < coef_.size(); ++i) {
    if (coef_[i] != 0.0) s += coef_[i] * rbf_kernel(train_.row(i), x, gamma_);
  }
  return s;
}

std::shared_ptr<const SvrModel> fit_svr(const Dataset& train, const SvrOptions& options) {
  if (train.empty()) throw std::invalid_argument("svr: empty training set");
  if (!(options.gamma > 0.0)) throw std::invalid_argument("svr: gamma must be > 0");
  auto sol = detail::solve_svr(detail::gram_matrix(train, options.gamma), train.labels(), options);
  return std::make_shared<const SvrModel>(train, std::move(sol.alpha), std::move(sol.alpha_star), sol.bias,
                                          options.gamma, sol.iterations, sol.kkt_gap, sol.objective);
}

}  // namespace ndcp
