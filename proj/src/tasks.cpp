// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/tasks.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "loranlab/rng.hpp"

namespace loran {

void BlobsTask::validate() const {
  if (classes < 2) throw std::invalid_argument("blobs task needs at least 2 classes");
  if (per_class == 0 || dim == 0) throw std::invalid_argument("blobs task needs per_class > 0 and dim > 0");
  if (!(spread >= 0.0) || !(noise >= 0.0)) throw std::invalid_argument("blobs spread and noise must be >= 0");
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = loran::fingerprint(features.data());
  for (int y : labels) {
    const double v = y;
    h = loran::fingerprint(std::span<const double>(&v, 1), h);
  }
  return h;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = Tensor::zeros(dim(), indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t src = indices[j];
    for (std::size_t i = 0; i < dim(); ++i) out.features(i, j) = features(i, src);
    out.labels.push_back(labels[src]);
  }
  return out;
}

Dataset gen_blobs(const BlobsTask& task) {
  task.validate();
  Rng rng(task.seed);
  std::vector<std::vector<double>> centers(task.classes, std::vector<double>(task.dim));
  for (auto& c : centers) {
    double norm2 = 0.0;
    for (auto& v : c) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : c) v *= inv * task.spread;
  }
  const std::size_t n = task.classes * task.per_class;
  Dataset data;
  data.features = Tensor::zeros(task.dim, n);
  data.labels.reserve(n);
  std::size_t col = 0;
  for (std::size_t i = 0; i < task.per_class; ++i) {
    for (std::size_t c = 0; c < task.classes; ++c, ++col) {
      for (std::size_t j = 0; j < task.dim; ++j) data.features(j, col) = centers[c][j] + task.noise * rng.normal();
      data.labels.push_back(static_cast<int>(c));
    }
  }
  return data;
}

void write_csv(const Dataset& data, std::ostream& os) {
  os << "label";
  for (std::size_t j = 0; j < data.dim(); ++j) os << ",x" << j;
  os << '\n';
  os.precision(17);
  for (std::size_t s = 0; s < data.size(); ++s) {
    os << data.labels[s];
    for (std::size_t j = 0; j < data.dim(); ++j) os << ',' << data.features(j, s);
    os << '\n';
  }
}

ToyClassifier ToyClassifier::make(std::size_t n_in, std::size_t width, std::size_t classes, std::uint64_t seed) {
  if (n_in == 0 || width == 0 || classes < 2) throw std::invalid_argument("invalid classifier dimensions");
  Rng rng(seed);
  ToyClassifier model;
  model.hidden.weight = rng.normal_matrix(width, n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
  model.hidden.bias = Tensor({width});
  for (auto& v : model.hidden.bias->data()) v = 0.1 * rng.normal();
  model.head.weight = rng.normal_matrix(classes, width, 1.0 / std::sqrt(static_cast<double>(width)));
  model.head.bias = Tensor({classes});
  for (auto& v : model.head.bias->data()) v = 0.1 * rng.normal();
  return model;
}

Var ToyClassifier::logits(Tape& tape, const Adapter& adapter, std::span<const Var> params, const Var& x) const {
  Var h = map_unary(adapter_forward(tape, hidden, adapter, params, x), ActivationSpec::tanh());
  return transpose(head.forward(tape, h));
}

std::vector<int> ToyClassifier::predict(const Adapter& adapter, const Tensor& x) const {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor* t : trainable_parameters(adapter)) leaves.push_back(tape.leaf(*t));
  const Tensor z = logits(tape, adapter, leaves, tape.leaf(x)).value();
  std::vector<int> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.cols(); ++c)
      if (z(i, c) > z(i, best)) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double ToyClassifier::accuracy(const Adapter& adapter, const Dataset& data) const {
  const auto pred = predict(adapter, data.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::uint64_t ToyClassifier::fingerprint() const {
  std::uint64_t h = loran::fingerprint(hidden.weight.data());
  if (hidden.bias) h = loran::fingerprint(hidden.bias->data(), h);
  h = loran::fingerprint(head.weight.data(), h);
  if (head.bias) h = loran::fingerprint(head.bias->data(), h);
  return h;
}

void TeacherTask::validate() const {
  if (d == 0 || k == 0) throw std::invalid_argument("teacher task needs d, k > 0");
  if (target_rank == 0 || target_rank > std::min(d, k)) {
    throw std::invalid_argument("teacher target rank must lie in [1, min(d, k)]");
  }
}

Tensor make_teacher_target(const TeacherTask& task) {
  task.validate();
  Rng rng(task.seed);
  const Tensor left = rng.normal_matrix(task.d, task.target_rank, 1.0);
  const Tensor right =
      rng.normal_matrix(task.target_rank, task.k, 1.0 / std::sqrt(static_cast<double>(task.target_rank)));
  return matmul(left, right);
}

Var teacher_loss(const Var& delta, const Tensor& target) {
  if (delta.value().shape() != target.shape()) {
    throw DimensionError("teacher_loss shape mismatch: " + delta.value().shape_string() + " vs target " +
                         target.shape_string());
  }
  Var diff = sub(delta, delta.tape().leaf(target));
  return scale(sum(hadamard(diff, diff)), 1.0 / static_cast<double>(target.size()));
}

double teacher_loss(const Adapter& adapter, const Tensor& target) {
  Tape tape;
  return teacher_loss(tape.leaf(delta_weight(adapter)), target).value()[0];
}

}  // namespace loran
