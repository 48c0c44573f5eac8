// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "loranlab/activations.hpp"

using namespace loran;

namespace {

std::vector<ActivationSpec> family() {
  return {ActivationSpec::identity(),      ActivationSpec::sigmoid(),        ActivationSpec::relu(),
          ActivationSpec::tanh(),          ActivationSpec::swish(1.0),       ActivationSpec::swish(25.0),
          ActivationSpec::sinter(5e-5, 1e4), ActivationSpec::sinter(0.5, 5e3), ActivationSpec::sinter(0.5, 1.0)};
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(lo + (hi - lo) * i / n);
  return g;
}

}  // namespace

TEST_CASE("activation parameter validation") {
  CHECK_THROWS_AS(ActivationSpec::swish(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::swish(-1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::sinter(0.1, 0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::sinter(NAN, 1.0).validate(), std::invalid_argument);
  CHECK_NOTHROW(ActivationSpec::sinter(0.0, 1.0).validate());
  CHECK_NOTHROW(ActivationSpec::sinter(-3.0, 1.0).validate());
}

TEST_CASE("parse by name") {
  CHECK(parse_activation_kind("Sinter") == ActivationKind::Sinter);
  CHECK(parse_activation_kind("relu") == ActivationKind::ReLU);
  CHECK_THROWS_AS(parse_activation_kind("gelu"), std::invalid_argument);
  for (const auto& s : family()) CHECK(parse_activation_kind(to_string(s.kind)) == s.kind);
}

TEST_CASE("sinter values") {
  CHECK(activation_eval(ActivationSpec::sinter(0.7, 123.0), 0.0) == 0.0);
  for (double x : grid(-3, 3, 37)) CHECK(activation_eval(ActivationSpec::sinter(0.0, 1e4), x) == x);
  // 1e-4 * (1 + 5e-5 sin(1)), evaluated at 50 digits
  const double v = activation_eval(ActivationSpec::sinter(5e-5, 1e4), 1e-4);
  CHECK(std::abs(v - 1.00004207354924039e-4) <= 1e-19);
}

TEST_CASE("the two parameterizations plotted for sinter") {
  // omega = 5e3 with A = 0.5: the interference term has period 2 pi / 5e3 and peak relative size 0.5
  const ActivationSpec s = ActivationSpec::sinter(0.5, 5e3);
  const double x = (M_PI / 2.0) / 5e3;
  CHECK(activation_eval(s, x) == doctest::Approx(1.5 * x).epsilon(1e-14));
  CHECK(activation_eval(s, 3.0 * x) == doctest::Approx(0.5 * 3.0 * x).epsilon(1e-12));
}

TEST_CASE("sigmoid collapse value and zero fixing") {
  CHECK(activation_eval(ActivationSpec::sigmoid(), 0.0) == 0.5);
  CHECK_FALSE(is_zero_fixing(ActivationSpec::sigmoid()));
  for (const auto& s : family()) {
    if (s.kind == ActivationKind::Sigmoid) continue;
    CHECK(activation_eval(s, 0.0) == 0.0);
    CHECK(is_zero_fixing(s));
  }
}

TEST_CASE("derivatives at zero") {
  CHECK(activation_deriv(ActivationSpec::relu(), 0.0) == 0.0);
  CHECK(activation_deriv(ActivationSpec::tanh(), 0.0) == 1.0);
  CHECK(activation_deriv(ActivationSpec::sinter(0.3, 77.0), 0.0) == 1.0);
  CHECK(activation_deriv(ActivationSpec::sigmoid(), 0.0) == 0.25);
}

TEST_CASE("derivatives match central differences on [-3, 3]") {
  for (const auto& s : family()) {
    // a step well below the oscillation period for sinter, 1e-5 otherwise
    const double h = s.kind == ActivationKind::Sinter ? 1e-3 / s.omega : 1e-5;
    for (double x : grid(-3, 3, 120)) {
      if (s.kind == ActivationKind::ReLU && std::abs(x) < 1e-9) continue;
      const double num = (activation_eval(s, x + h) - activation_eval(s, x - h)) / (2 * h);
      const double an = activation_deriv(s, x);
      // sinter's derivative crosses zero, where only an absolute comparison is meaningful
      const double err = std::abs(an - num) / std::max(1.0, std::abs(an) + std::abs(num));
      INFO(s.label() << " at x=" << x);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("sinter relative perturbation bound") {
  for (const auto& s : {ActivationSpec::sinter(5e-5, 1e4), ActivationSpec::sinter(0.5, 5e3),
                        ActivationSpec::sinter(-0.9, 3.0)}) {
    for (double x : grid(-10, 10, 401)) {
      CHECK(std::abs(activation_eval(s, x) - x) <= std::abs(s.amplitude) * std::abs(x) * (1 + 1e-15));
    }
  }
}

TEST_CASE("sinter is unbounded") {
  for (const auto& s : {ActivationSpec::sinter(5e-5, 1e4), ActivationSpec::sinter(0.5, 5e3)}) {
    for (double m : {1.0, 1e3, 1e8}) {
      const double x = (m + 1) / (1 - std::abs(s.amplitude));
      CHECK(std::abs(activation_eval(s, x)) > m);
    }
  }
}

TEST_CASE("sinter interference term is even") {
  for (const auto& s : {ActivationSpec::sinter(5e-5, 1e4), ActivationSpec::sinter(0.5, 5e3)}) {
    for (double x : grid(0, 3, 90)) {
      const double g_pos = s.amplitude * x * std::sin(s.omega * x);
      const double g_neg = s.amplitude * -x * std::sin(s.omega * -x);
      CHECK(std::abs(g_pos - g_neg) <= 1e-12);
      CHECK(std::abs((activation_eval(s, x) - x) - (activation_eval(s, -x) + x)) <= 1e-12);
    }
  }
}

TEST_CASE("swish approaches relu as beta grows") {
  const ActivationSpec s = ActivationSpec::swish(25.0);
  for (double x : grid(-3, 3, 120)) {
    const double relu = x > 0 ? x : 0.0;
    const double bound = std::abs(x) * (1.0 / (1.0 + std::exp(25.0 * std::abs(x))));
    // the gap is exact in reals; x * sigmoid(25x) - x also carries ~eps |x| of rounding
    CHECK(std::abs(activation_eval(s, x) - relu) <= bound * (1 + 1e-12) + 4e-16 * std::abs(x));
  }
}

TEST_CASE("stable sigmoid at extremes") {
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(activation_eval(ActivationSpec::swish(25.0), -100.0)));
}
