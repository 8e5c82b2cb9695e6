#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "data.hpp"
#include "random.hpp"

namespace ndcp::test {

inline Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<double>& labels) {
  const std::size_t p = rows.empty() ? 1 : rows.front().size();
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Dataset(p, std::move(flat), labels);
}

inline double normal(Rng& rng) {
  // Box-Muller on the portable uniform.
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// y = sin(freq * x) + N(0, noise), x ~ U[0, 1).
inline Dataset sine_data(std::size_t n, double noise, std::uint64_t seed, double freq = 6.0) {
  Rng rng(seed);
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = uniform_unit(rng);
    y[i] = std::sin(freq * x[i]) + noise * normal(rng);
  }
  return Dataset(1, std::move(x), std::move(y));
}

/// p uniform features, y = sum_j w_j x_j + noise with w_j = j + 1.
inline Dataset linear_data(std::size_t n, std::size_t p, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n * p);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      x[i * p + j] = uniform_unit(rng) * 2.0 - 1.0;
      s += static_cast<double>(j + 1) * x[i * p + j];
    }
    y[i] = s + noise * normal(rng);
  }
  return Dataset(p, std::move(x), std::move(y));
}

inline std::string concrete_path() { return std::string(NDCP_DATA_DIR) + "/concrete.csv"; }

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("ndcp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace ndcp::test
