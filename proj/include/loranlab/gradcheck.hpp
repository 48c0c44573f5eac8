// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "loranlab/activations.hpp"

namespace loran {

enum class GradcheckScope { All, Ops, Activations, Adapters, SinterOnly };

GradcheckScope parse_gradcheck_scope(std::string_view name);
std::string_view to_string(GradcheckScope scope);

struct GradcheckOptions {
  GradcheckScope scope = GradcheckScope::All;
  double threshold = 1e-4;
  std::size_t seeds = 20;
  /// Test hook: scales every activation derivative by 1.01 so the suite must fail.
  bool inject_wrong_derivative = false;
};

struct GradcheckEntry {
  std::string name;
  double step = 0.0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Finite-difference step for a check involving `spec`. Sinter needs h well below 1/omega:
/// h = 5e-4 / omega roughly balances the omega^3 truncation term against rounding.
double gradcheck_step(const ActivationSpec& spec);

/// Activations covered by the suite: the ablation family plus the two Sinter settings
/// (A=5e-5, w=1e4 and A=0.5, w=5e3).
std::vector<ActivationSpec> gradcheck_activations();

std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckOptions& options);

}  // namespace loran
