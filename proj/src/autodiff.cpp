// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace loran {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardRule rule) {
  bool needs = false;
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw std::out_of_range("tape input refers to a future node");
    needs = needs || nodes_[id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, std::move(inputs), std::move(rule)});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.size() == 0) {
    throw std::logic_error("no gradient for node " + std::to_string(id) +
                           (n.requires_grad ? " (call backward first)" : " (does not require grad)"));
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const Tensor& root = nodes_.at(loss.id()).value;
  if (!root.is_scalar()) {
    throw DimensionError("backward requires a scalar loss, got shape " + root.shape_string());
  }
  if (backward_done_ && !accumulate_) {
    throw std::logic_error("backward called twice without zero_grad (enable accumulation to sum)");
  }
  backward_done_ = true;

  // Seed into a scratch adjoint set so repeated passes add, not compound.
  std::vector<Tensor> adjoint(loss.id() + 1);
  adjoint[loss.id()] = Tensor(root.shape(), 1.0);
  std::vector<Tensor*> input_grads;
  for (std::size_t idx = loss.id() + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.requires_grad || adjoint[idx].size() == 0) continue;
    Tensor& acc = grad_buffer(idx);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += adjoint[idx][i];
    if (!n.rule) continue;
    input_grads.clear();
    for (auto in : n.inputs) {
      if (!nodes_[in].requires_grad) {
        input_grads.push_back(nullptr);
        continue;
      }
      if (adjoint[in].size() == 0) adjoint[in] = Tensor(nodes_[in].value.shape(), 0.0);
      input_grads.push_back(&adjoint[in]);
    }
    n.rule(adjoint[idx], input_grads);
    adjoint[idx] = Tensor{};
  }
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx)
    if (nodes_[idx].requires_grad) grad_buffer(idx);
}

void Tape::zero_grad() {
  for (auto& n : nodes_)
    if (n.requires_grad) n.grad = Tensor(n.value.shape(), 0.0);
  backward_done_ = false;
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
  return a.tape();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void accumulate(Tensor* dst, const Tensor& src, double factor = 1.0) {
  if (!dst) return;
  for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += factor * src[i];
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  Tensor out = matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [&tape, ia, ib](const Tensor& g, std::span<Tensor* const> grads) {
                       const Tensor& av = tape.value(ia);
                       const Tensor& bv = tape.value(ib);
                       const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
                       if (Tensor* ga = grads[0]) {
                         // dA = G * B^T
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += g(i, j) * bv(p, j);
                             (*ga)(i, p) += s;
                           }
                       }
                       if (Tensor* gb = grads[1]) {
                         // dB = A^T * G
                         for (std::size_t p = 0; p < k; ++p)
                           for (std::size_t j = 0; j < n; ++j) {
                             double s = 0.0;
                             for (std::size_t i = 0; i < m; ++i) s += av(i, p) * g(i, j);
                             (*gb)(p, j) += s;
                           }
                       }
                     });
}

Var add(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return tape.record(std::move(out), {a.id(), b.id()},
                     [](const Tensor& g, std::span<Tensor* const> grads) {
                       accumulate(grads[0], g);
                       accumulate(grads[1], g);
                     });
}

Var sub(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return tape.record(std::move(out), {a.id(), b.id()},
                     [](const Tensor& g, std::span<Tensor* const> grads) {
                       accumulate(grads[0], g);
                       accumulate(grads[1], g, -1.0);
                     });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& tape = same_tape(a, b);
  require_same_shape("hadamard", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [&tape, ia, ib](const Tensor& g, std::span<Tensor* const> grads) {
                       const Tensor& av = tape.value(ia);
                       const Tensor& bv = tape.value(ib);
                       if (Tensor* ga = grads[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
                       if (Tensor* gb = grads[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
                     });
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return a.tape().record(std::move(out), {a.id()},
                         [c](const Tensor& g, std::span<Tensor* const> grads) {
                           accumulate(grads[0], g, c);
                         });
}

Var transpose(const Var& a) {
  return a.tape().record(a.value().transposed(), {a.id()},
                         [](const Tensor& g, std::span<Tensor* const> grads) {
                           if (grads[0]) accumulate(grads[0], g.transposed());
                         });
}

Var add_column(const Var& x, const Var& bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || bv.size() != xv.rows()) {
    throw DimensionError("add_column shape mismatch: " + xv.shape_string() + " vs bias " +
                         bv.shape_string());
  }
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += bv[i];
  return tape.record(std::move(out), {x.id(), bias.id()},
                     [r, c](const Tensor& g, std::span<Tensor* const> grads) {
                       accumulate(grads[0], g);
                       if (Tensor* gb = grads[1])
                         for (std::size_t i = 0; i < r; ++i) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < c; ++j) s += g(i, j);
                           (*gb)[i] += s;
                         }
                     });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a.id()},
                         [](const Tensor& g, std::span<Tensor* const> grads) {
                           if (Tensor* ga = grads[0])
                             for (auto& v : ga->data()) v += g[0];
                         });
}

Var map_unary(const Var& x, const ActivationSpec& f) {
  f.validate();
  return map_unary(x, f, [f](double v) { return activation_deriv(f, v); });
}

Var map_unary(const Var& x, const ActivationSpec& f, const std::function<double(double)>& derivative) {
  f.validate();
  Tensor out = x.value();
  for (auto& v : out.data()) v = activation_eval(f, v);
  Tape& tape = x.tape();
  const std::size_t ix = x.id();
  return tape.record(std::move(out), {ix},
                     [&tape, ix, derivative](const Tensor& g, std::span<Tensor* const> grads) {
                       Tensor* gx = grads[0];
                       if (!gx) return;
                       const Tensor& xv = tape.value(ix);
                       for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * derivative(xv[i]);
                     });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.rows() != labels.size()) {
    throw DimensionError("softmax_cross_entropy expects logits [n x C] with n labels, got " +
                         z.shape_string() + " and " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = z.rows(), classes = z.cols();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
  }
  Tensor probs = Tensor::zeros(n, classes);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t top = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (z(i, c) > z(i, top)) top = c;
    const double mx = z(i, top);
    // the max term contributes exactly 1; log1p keeps the tail when it is tiny
    double rest = 0.0;
    for (std::size_t c = 0; c < classes; ++c)
      if (c != top) rest += std::exp(z(i, c) - mx);
    const double log_denom = std::log1p(rest);
    for (std::size_t c = 0; c < classes; ++c) probs(i, c) = std::exp(z(i, c) - mx - log_denom);
    total += log_denom - (z(i, static_cast<std::size_t>(labels[i])) - mx);
  }
  std::vector<int> y(labels.begin(), labels.end());
  return logits.tape().record(
      Tensor::scalar(total / static_cast<double>(n)), {logits.id()},
      [probs = std::move(probs), y = std::move(y)](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor* gz = grads[0];
        if (!gz) return;
        const std::size_t rows = probs.rows(), cols = probs.cols();
        const double w = g[0] / static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t c = 0; c < cols; ++c) {
            const double target = static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0;
            (*gz)(i, c) += w * (probs(i, c) - target);
          }
      });
}

double finite_difference_check(const ScalarFunction& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check requires h > 0");
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.leaf(x, true);
    Var loss = f(tape, xv);
    tape.backward(loss);
    analytic = xv.grad();
  }
  auto eval_at = [&f](const Tensor& point) {
    Tape tape;
    Var xv = tape.leaf(point, false);
    return f(tape, xv).value()[0];
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = eval_at(probe);
    probe[i] = x[i] - h;
    const double fm = eval_at(probe);
    probe[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
    if (std::isnan(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace loran
