// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace loran {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // rejection sampling keeps the result unbiased
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

Tensor Rng::normal_matrix(std::size_t rows, std::size_t cols, double stddev) {
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.data()) v = stddev * normal();
  return t;
}

Tensor Rng::uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.data()) v = uniform(lo, hi);
  return t;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace loran
