// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "coral/error.hpp"
#include "coral/rng.hpp"

namespace coral {

// Dense row-major matrix. float is the stored/served width everywhere;
// Mat<double> exists for verification paths (gradient checks, merge oracles).
template <typename T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;  // rows * cols, row-major

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{}) {}

  T* row(std::size_t i) noexcept { return data.data() + i * cols; }
  const T* row(std::size_t i) const noexcept { return data.data() + i * cols; }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }

  std::string shape_str() const { return fmt::format("{}x{}", rows, cols); }
};

using Matrix = Mat<float>;
using Matrix64 = Mat<double>;

template <typename T>
bool same_shape(const Mat<T>& a, const Mat<T>& b) noexcept {
  return a.rows == b.rows && a.cols == b.cols;
}

template <typename T>
bool bytes_equal(const Mat<T>& a, const Mat<T>& b) noexcept {
  return same_shape(a, b) &&
         (a.data.empty() ||
          std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(T)) == 0);
}

template <typename T>
void check_finite(const Mat<T>& m, const char* what) {
  for (const T v : m.data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::numeric, fmt::format("{}: non-finite entry in {} result",
                                                  what, m.shape_str()));
    }
  }
}

// Work threshold below which the parallel kernels stay on one thread; the
// serving-path matrices are small enough that fork/join would dominate.
inline constexpr std::size_t kParallelGrainOps = std::size_t{1} << 18;

// Serial reference product. Kept alongside the OpenMP kernel so tests can
// assert the two produce byte-identical results: both accumulate each output
// element over k in ascending order, so the parallel split over rows cannot
// change any rounding.
template <typename T>
Mat<T> matmul_serial(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols != b.rows) {
    throw Error(ErrorKind::shape,
                fmt::format("matmul: incompatible shapes {} * {}", a.shape_str(), b.shape_str()));
  }
  Mat<T> c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* arow = a.row(i);
    T* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T av = arow[k];
      const T* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
  check_finite(c, "matmul");
  return c;
}

// OpenMP product, parallel over output rows.
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols != b.rows) {
    throw Error(ErrorKind::shape,
                fmt::format("matmul: incompatible shapes {} * {}", a.shape_str(), b.shape_str()));
  }
  Mat<T> c(a.rows, b.cols);
  const std::size_t ops = a.rows * a.cols * b.cols;
  const long n = static_cast<long>(a.rows);
#pragma omp parallel for schedule(static) if (ops >= kParallelGrainOps)
  for (long ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const T* arow = a.row(i);
    T* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T av = arow[k];
      const T* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
  check_finite(c, "matmul");
  return c;
}

// w + scale * delta, elementwise.
template <typename T>
Mat<T> add_scaled(const Mat<T>& w, const Mat<T>& delta, T scale) {
  if (!same_shape(w, delta)) {
    throw Error(ErrorKind::shape, fmt::format("add_scaled: shape mismatch {} vs {}",
                                              w.shape_str(), delta.shape_str()));
  }
  Mat<T> out(w.rows, w.cols);
  const long n = static_cast<long>(w.size());
#pragma omp parallel for schedule(static) if (w.size() >= kParallelGrainOps)
  for (long i = 0; i < n; ++i) {
    out.data[i] = w.data[i] + scale * delta.data[i];
  }
  check_finite(out, "add_scaled");
  return out;
}

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
  Mat<T> t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      t(j, i) = a(i, j);
    }
  }
  return t;
}

// i.i.d. Normal(0, std^2) fill. Element e consumes the addressed draws
// (2e, 2e+1), so the parallel fill is byte-identical to a sequential one.
template <typename T>
Mat<T> gaussian(Rng& rng, std::size_t rows, std::size_t cols, T stddev) {
  if (!(stddev >= T{0})) {
    throw Error(ErrorKind::config, fmt::format("gaussian: stddev must be >= 0, got {}", stddev));
  }
  Mat<T> m(rows, cols);
  const long n = static_cast<long>(m.size());
#pragma omp parallel for schedule(static) if (m.size() >= kParallelGrainOps)
  for (long i = 0; i < n; ++i) {
    const auto e = static_cast<std::uint64_t>(i);
    const double z = Rng::gaussian_from(rng.peek(2 * e), rng.peek(2 * e + 1));
    m.data[i] = static_cast<T>(static_cast<double>(stddev) * z);
  }
  rng.skip(2 * m.size());
  check_finite(m, "gaussian");
  return m;
}

template <typename T>
Mat<double> widen(const Mat<T>& a) {
  Mat<double> out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data[i] = static_cast<double>(a.data[i]);
  }
  return out;
}

}  // namespace coral
