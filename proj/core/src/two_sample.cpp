#include "ikl/two_sample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ikl {

namespace {

double row_distance(const double* x, const double* y, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return std::sqrt(s);
}

std::size_t rows_of(std::span<const double> a, std::size_t dim, const char* what) {
  if (dim == 0) throw DimensionError("energy distance needs dim >= 1");
  if (a.size() % dim != 0) {
    throw DimensionError(std::string(what) + " size " + std::to_string(a.size()) +
                         " is not a multiple of dim " + std::to_string(dim));
  }
  const std::size_t n = a.size() / dim;
  if (n == 0) throw DimensionError(std::string(what) + " is empty");
  return n;
}

double cross_sum(std::span<const double> a, std::size_t na, std::span<const double> b,
                 std::size_t nb, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) s += row_distance(&a[i * dim], &b[j * dim], dim);
  }
  return s;
}

// Sum over unordered distinct pairs.
double within_sum(std::span<const double> a, std::size_t n, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) s += row_distance(&a[i * dim], &a[j * dim], dim);
  }
  return s;
}

double expected_abs_normal(double mean, double var) {
  const double s = std::sqrt(var);
  if (s == 0.0) return std::abs(mean);
  return mean * std::erf(mean / (s * std::numbers::sqrt2)) +
         s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mean * mean / (2.0 * var));
}

}  // namespace

double energy_distance(std::span<const double> a, std::span<const double> b, std::size_t dim) {
  const std::size_t na = rows_of(a, dim, "first sample");
  const std::size_t nb = rows_of(b, dim, "second sample");
  const double cross = cross_sum(a, na, b, nb, dim) / static_cast<double>(na * nb);
  const double wa = na > 1 ? 2.0 * within_sum(a, na, dim) / static_cast<double>(na * (na - 1)) : 0.0;
  const double wb = nb > 1 ? 2.0 * within_sum(b, nb, dim) / static_cast<double>(nb * (nb - 1)) : 0.0;
  return 2.0 * cross - wa - wb;
}

double energy_distance_v(std::span<const double> a, std::span<const double> b, std::size_t dim) {
  const std::size_t na = rows_of(a, dim, "first sample");
  const std::size_t nb = rows_of(b, dim, "second sample");
  const double cross = cross_sum(a, na, b, nb, dim) / static_cast<double>(na * nb);
  const double wa = 2.0 * within_sum(a, na, dim) / static_cast<double>(na * na);
  const double wb = 2.0 * within_sum(b, nb, dim) / static_cast<double>(nb * nb);
  return std::max(0.0, 2.0 * cross - wa - wb);
}

double energy_distance_paired(std::span<const double> a, std::span<const double> b,
                              std::size_t dim) {
  const std::size_t n = rows_of(a, dim, "first sample");
  if (rows_of(b, dim, "second sample") != n) {
    throw DimensionError("paired energy distance needs equal sample sizes");
  }
  if (n < 2) throw DimensionError("paired energy distance needs at least two rows");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = &a[i * dim];
    const double* bi = &b[i * dim];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* aj = &a[j * dim];
      const double* bj = &b[j * dim];
      s += row_distance(ai, bj, dim) + row_distance(aj, bi, dim) - row_distance(ai, aj, dim) -
           row_distance(bi, bj, dim);
    }
  }
  return 2.0 * s / static_cast<double>(n * (n - 1));
}

double gaussian_energy_distance_1d(double mu_a, double s_a, double mu_b, double s_b) {
  return 2.0 * expected_abs_normal(mu_a - mu_b, s_a * s_a + s_b * s_b) -
         expected_abs_normal(0.0, 2.0 * s_a * s_a) - expected_abs_normal(0.0, 2.0 * s_b * s_b);
}

}  // namespace ikl
