// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace loran {

enum class ActivationKind { Identity, Sigmoid, ReLU, Tanh, Swish, Sinter };

/// Elementwise map applied to the low-rank product.
///
/// `beta` is only read for Swish; `amplitude` and `omega` only for Sinter.
/// Sinter(x) = x * (1 + amplitude * sin(omega * x)).
struct ActivationSpec {
  ActivationKind kind = ActivationKind::Identity;
  double beta = 1.0;
  double amplitude = 5e-5;
  double omega = 1e4;

  static ActivationSpec identity() { return {}; }
  static ActivationSpec sigmoid() { return {ActivationKind::Sigmoid}; }
  static ActivationSpec relu() { return {ActivationKind::ReLU}; }
  static ActivationSpec tanh() { return {ActivationKind::Tanh}; }
  static ActivationSpec swish(double beta) { return {ActivationKind::Swish, beta}; }
  static ActivationSpec sinter(double amplitude, double omega) {
    return {ActivationKind::Sinter, 1.0, amplitude, omega};
  }

  /// Throws std::invalid_argument for non-positive beta/omega or non-finite parameters.
  void validate() const;

  /// Short label, e.g. "sinter(A=5e-05,w=10000)" or "swish-25".
  std::string label() const;

  bool operator==(const ActivationSpec&) const = default;
};

std::string_view to_string(ActivationKind kind);
/// Accepts identity, sigmoid, relu, tanh, swish, sinter (case-insensitive).
ActivationKind parse_activation_kind(std::string_view name);

double activation_eval(const ActivationSpec& spec, double x);

/// First derivative. ReLU'(0) is 0.
double activation_deriv(const ActivationSpec& spec, double x);

/// True when eval(spec, 0) == 0, i.e. a zero-initialized adapter perturbs nothing.
bool is_zero_fixing(const ActivationSpec& spec);

double sigmoid(double x);

}  // namespace loran
