// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "loranlab/activations.hpp"
#include "loranlab/tensor.hpp"

namespace loran {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  /// Gradient buffer after backward(); zeros when nothing flowed into this node.
  const Tensor& grad() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the output gradient and accumulates into input gradients.
/// Entries of `input_grads` are null for inputs that do not require gradients.
using BackwardRule = std::function<void(const Tensor& out_grad, std::span<Tensor* const> input_grads)>;

/// Define-by-run record of primitive operations.
///
/// Nodes are appended in evaluation order, so inputs always precede their
/// consumers and backward() is a single reverse sweep. A tape is single-threaded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardRule rule);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Populates gradients of every node reachable from `loss` (which must be scalar).
  /// A second call without zero_grad() throws unless accumulation is enabled.
  void backward(const Var& loss);
  void zero_grad();
  void set_accumulate(bool on) { accumulate_ = on; }
  bool accumulate() const { return accumulate_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
  };

  Tensor& grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  bool accumulate_ = false;
};

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var transpose(const Var& a);
/// Adds column vector `bias` (length rows(x)) to every column of x.
Var add_column(const Var& x, const Var& bias);
/// Sum of all elements, as a scalar.
Var sum(const Var& a);
/// Elementwise activation. The tape keeps the input so backward can apply f'(x).
Var map_unary(const Var& x, const ActivationSpec& f);
/// Same as map_unary but with an explicit derivative; used to inject faults into checks.
Var map_unary(const Var& x, const ActivationSpec& f, const std::function<double(double)>& derivative);
/// Mean negative log-likelihood over rows of `logits` (n x C) with stable log-sum-exp.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);

/// Builds a loss on a fresh tape for the given input leaf.
using ScalarFunction = std::function<Var(Tape&, const Var&)>;

/// Compares the tape gradient of `f` at `x` with central differences of step `h`.
/// Returns max over coordinates of |a - n| / max(1e-12, |a| + |n|).
double finite_difference_check(const ScalarFunction& f, const Tensor& x, double h);

}  // namespace loran
