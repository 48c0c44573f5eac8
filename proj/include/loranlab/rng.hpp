// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "loranlab/tensor.hpp"

namespace loran {

/// Seeded generator with fixed integer semantics on every platform.
///
/// The integer stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The standard distributions are not portable, so uniforms are
/// taken from the top 53 bits and normals use the Box-Muller transform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Tensor normal_matrix(std::size_t rows, std::size_t cols, double stddev);
  Tensor uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace loran
