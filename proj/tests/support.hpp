#pragma once

#include <random>

#include "splitmpc/dynamics.hpp"

namespace splitmpc::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  Vector vector(int n, double lo, double hi) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Matrix matrix(int r, int c, double lo, double hi) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
    }
    return m;
  }

  // Random symmetric PSD matrix of the given rank.
  Matrix psd(int n, int rank) {
    const Matrix F = matrix(n, rank, -1.0, 1.0);
    return F * F.transpose();
  }

 private:
  std::mt19937_64 gen_;
};

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace splitmpc::testing
