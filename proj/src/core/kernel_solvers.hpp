#pragma once

// Gram-matrix level solvers shared by the public fit functions and by the
// cross-validation fast path, which slices one precomputed Gram matrix per
// gamma instead of recomputing kernels per fold.

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "data.hpp"
#include "regressors.hpp"

namespace ndcp::detail {

Eigen::MatrixXd gram_matrix(const Dataset& d, double gamma);

struct KernelRidgeSolution {
  std::vector<double> coefficients;
  double label_mean = 0.0;
};

KernelRidgeSolution solve_kernel_ridge(const Eigen::MatrixXd& gram, std::span<const double> labels, double lambda);

struct SvrSolution {
  std::vector<double> alpha;
  std::vector<double> alpha_star;
  double bias = 0.0;
  std::size_t iterations = 0;
  double kkt_gap = 0.0;
  double objective = 0.0;
};

/// Throws ConvergenceError if the gap is still above tolerance after
/// `max_iterations` pair updates.
SvrSolution solve_svr(const Eigen::MatrixXd& gram, std::span<const double> labels, const SvrOptions& options);

}  // namespace ndcp::detail
