// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/activations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace loran {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void ActivationSpec::validate() const {
  switch (kind) {
    case ActivationKind::Swish:
      if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("swish requires a finite beta > 0");
      }
      break;
    case ActivationKind::Sinter:
      if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw std::invalid_argument("sinter requires a finite omega > 0");
      }
      if (!std::isfinite(amplitude)) throw std::invalid_argument("sinter amplitude must be finite");
      break;
    default:
      break;
  }
}

std::string ActivationSpec::label() const {
  std::ostringstream os;
  switch (kind) {
    case ActivationKind::Swish:
      os << "swish-" << beta;
      break;
    case ActivationKind::Sinter:
      os << "sinter(A=" << amplitude << ",w=" << omega << ")";
      break;
    default:
      os << to_string(kind);
  }
  return os.str();
}

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Swish: return "swish";
    case ActivationKind::Sinter: return "sinter";
  }
  return "unknown";
}

ActivationKind parse_activation_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto k : {ActivationKind::Identity, ActivationKind::Sigmoid, ActivationKind::ReLU,
                 ActivationKind::Tanh, ActivationKind::Swish, ActivationKind::Sinter}) {
    if (lower == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown activation kind '" + std::string(name) + "'");
}

double activation_eval(const ActivationSpec& spec, double x) {
  switch (spec.kind) {
    case ActivationKind::Identity: return x;
    case ActivationKind::Sigmoid: return sigmoid(x);
    case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::Swish: return x * sigmoid(spec.beta * x);
    case ActivationKind::Sinter: return x * (1.0 + spec.amplitude * std::sin(spec.omega * x));
  }
  return x;
}

double activation_deriv(const ActivationSpec& spec, double x) {
  switch (spec.kind) {
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationKind::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::Swish: {
      const double s = sigmoid(spec.beta * x);
      return s + spec.beta * x * s * (1.0 - s);
    }
    case ActivationKind::Sinter: {
      const double wx = spec.omega * x;
      return 1.0 + spec.amplitude * std::sin(wx) + spec.amplitude * wx * std::cos(wx);
    }
  }
  return 1.0;
}

bool is_zero_fixing(const ActivationSpec& spec) { return activation_eval(spec, 0.0) == 0.0; }

}  // namespace loran
