// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "loranlab/adapters.hpp"
#include "loranlab/autodiff.hpp"
#include "loranlab/tensor.hpp"

namespace loran {

/// Gaussian clusters around seeded unit-norm centers scaled by `spread`.
struct BlobsTask {
  std::size_t classes = 4;
  std::size_t per_class = 50;
  std::size_t dim = 16;
  double spread = 6.0;
  double noise = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Samples are columns: features is dim x n, labels has n entries.
struct Dataset {
  Tensor features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.rows(); }
  std::uint64_t fingerprint() const;
  /// Columns `indices` of features and their labels.
  Dataset subset(std::span<const std::size_t> indices) const;
};

Dataset gen_blobs(const BlobsTask& task);
/// One row per sample: label,x0,x1,...
void write_csv(const Dataset& data, std::ostream& os);

/// Two-layer frozen network; the adapter rides on the hidden layer.
///
/// logits = head(tanh(hidden(x) + delta x)). Every base weight is seeded and frozen.
struct ToyClassifier {
  FrozenLinear hidden;  // width x n_in
  FrozenLinear head;    // classes x width

  static ToyClassifier make(std::size_t n_in, std::size_t width, std::size_t classes, std::uint64_t seed);

  /// Returns n x C logits for columns of `x`.
  Var logits(Tape& tape, const Adapter& adapter, std::span<const Var> params, const Var& x) const;
  std::vector<int> predict(const Adapter& adapter, const Tensor& x) const;
  double accuracy(const Adapter& adapter, const Dataset& data) const;
  std::uint64_t fingerprint() const;
};

/// Target matrix of exact rank t built from seeded Gaussian factors.
struct TeacherTask {
  std::size_t d = 32;
  std::size_t k = 32;
  std::size_t target_rank = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

/// (d x t) N(0,1) times (t x k) N(0,1/t): entries have unit variance.
Tensor make_teacher_target(const TeacherTask& task);

/// ||delta - target||_F^2 / (d k), differentiable in delta.
Var teacher_loss(const Var& delta, const Tensor& target);
double teacher_loss(const Adapter& adapter, const Tensor& target);

}  // namespace loran
