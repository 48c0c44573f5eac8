// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "loranlab/activations.hpp"
#include "loranlab/autodiff.hpp"
#include "loranlab/tensor.hpp"

namespace loran {

/// Base linear map h = W0 x + b. Never receives gradients.
struct FrozenLinear {
  Tensor weight;               // d x k
  std::optional<Tensor> bias;  // length d

  std::size_t out_features() const { return weight.rows(); }
  std::size_t in_features() const { return weight.cols(); }
  std::uint64_t fingerprint() const;

  Tensor forward(const Tensor& x) const;
  Var forward(Tape& tape, const Var& x) const;
};

/// Delta = s * B A with s = alpha / rank.
struct LoRAAdapter {
  Tensor b;  // d x r
  Tensor a;  // r x k
  std::size_t rank = 0;
  double alpha = 1.0;

  double scale() const { return alpha / static_cast<double>(rank); }
};

/// Delta = f(s * B A) when scale_inside, else s * f(B A).
struct LoRANAdapter {
  LoRAAdapter inner;
  ActivationSpec activation;
  bool scale_inside = true;
};

/// Unconstrained dense update; the full fine-tuning reference for spectrum comparisons.
struct FullAdapter {
  Tensor delta;
};

using Adapter = std::variant<LoRAAdapter, LoRANAdapter, FullAdapter>;

enum class AdapterKind { LoRA, LoRAN, Full };

std::string_view to_string(AdapterKind kind);
AdapterKind parse_adapter_kind(std::string_view name);

struct AdapterConfig {
  AdapterKind kind = AdapterKind::LoRAN;
  std::size_t rank = 8;
  double alpha = 16.0;
  ActivationSpec activation = ActivationSpec::sinter(5e-5, 1e4);
  bool scale_inside = true;

  /// Throws std::invalid_argument when rank is 0 or exceeds min(d, k).
  void validate(std::size_t d, std::size_t k) const;
};

/// B = 0 exactly, A ~ Normal(0, 1/r) from the seeded generator.
LoRAAdapter init_adapter(std::size_t d, std::size_t k, std::size_t r, double alpha, std::uint64_t seed);

Adapter make_adapter(const AdapterConfig& cfg, std::size_t d, std::size_t k, std::uint64_t seed);

std::vector<Tensor*> trainable_parameters(Adapter& adapter);
std::vector<const Tensor*> trainable_parameters(const Adapter& adapter);
std::size_t parameter_count(const Adapter& adapter);

/// Records the update on `tape`. `params` are leaves holding trainable_parameters() in order.
Var delta_weight(Tape& tape, const Adapter& adapter, std::span<const Var> params);
Tensor delta_weight(const Adapter& adapter);

/// W0 x + b + delta x, fully recorded so backward reaches the adapter factors.
Var adapter_forward(Tape& tape, const FrozenLinear& layer, const Adapter& adapter,
                    std::span<const Var> params, const Var& x);
Tensor adapter_forward(const FrozenLinear& layer, const Adapter& adapter, const Tensor& x);

/// Places every trainable parameter of `adapter` on `tape` as a gradient-requiring leaf.
std::vector<Var> parameter_leaves(Tape& tape, const Adapter& adapter);

}  // namespace loran
