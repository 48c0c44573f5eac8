// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "loranlab/adapters.hpp"
#include "loranlab/analysis.hpp"
#include "loranlab/rng.hpp"
#include "loranlab/tasks.hpp"
#include "oracles.hpp"

using namespace loran;

namespace {

double reconstruction_error(const Tensor& m, const Svd& s) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double v = 0.0;
      for (std::size_t p = 0; p < s.values.size(); ++p) v += s.u(i, p) * s.values[p] * s.v(j, p);
      worst = std::max(worst, std::abs(v - m(i, j)));
    }
  return worst;
}

}  // namespace

TEST_CASE("svd of simple matrices") {
  for (double v : svd_values(Tensor::identity(5))) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  const Tensor d = Tensor::from_rows({{1, 0, 0}, {0, 3, 0}, {0, 0, 2}});
  const auto s = svd_values(d);
  CHECK(s[0] == doctest::Approx(3.0));
  CHECK(s[1] == doctest::Approx(2.0));
  CHECK(s[2] == doctest::Approx(1.0));
}

TEST_CASE("svd of random 8x6 against the Gram eigen oracle") {
  Rng rng(8);
  const Tensor m = rng.normal_matrix(8, 6, 1.0);
  const Svd s = svd(m);
  CHECK(reconstruction_error(m, s) < 1e-10 * s.values[0]);
  const auto ref = oracle::singular_values_via_gram(oracle::to_matrix(m));
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(s.values[i] - ref[i]) < 1e-9);
}

TEST_CASE("svd property over random shapes up to 32x32") {
  Rng shapes(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t r = 1 + shapes.below(32), c = 1 + shapes.below(32);
    Rng rng(100 + trial);
    const Tensor m = rng.normal_matrix(r, c, rng.uniform(0.1, 10.0));
    const Svd s = svd(m);
    INFO("shape " << r << "x" << c);
    REQUIRE(s.values.size() == std::min(r, c));
    for (std::size_t i = 1; i < s.values.size(); ++i) CHECK(s.values[i] <= s.values[i - 1]);
    for (double v : s.values) CHECK(v >= 0.0);
    CHECK(reconstruction_error(m, s) < 1e-10 * s.values[0]);
    const auto ref = oracle::singular_values_via_gram(oracle::to_matrix(m));
    // the Gram route squares the condition number, so compare relative to sigma_max
    for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(std::abs(s.values[i] - ref[i]) < 1e-9 * s.values[0]);
  }
}

TEST_CASE("svd refuses non-finite input and reports non-convergence") {
  Tensor m = Tensor::identity(3);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(svd(m));
  Rng rng(1);
  try {
    svd(rng.normal_matrix(10, 10, 1.0), 1e-12, 1);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 1e-12);
  }
}

TEST_CASE("numerical rank") {
  const std::vector<double> z{0, 0, 0};
  CHECK(numerical_rank(z, 1e-8) == 0);
  CHECK(numerical_rank(svd_values(Tensor::zeros(4, 4)), 1e-8) == 0);
  const std::vector<double> v{1, 1e-3, 1e-9, 0};
  CHECK(numerical_rank(v, 1e-8) == 2);
}

TEST_CASE("effective rank") {
  const std::vector<double> four(4, 2.5);
  CHECK(effective_rank(four) == doctest::Approx(4.0).epsilon(1e-14));
  const std::vector<double> one{3, 0, 0};
  CHECK(effective_rank(one) == doctest::Approx(1.0).epsilon(1e-15));
  // exp(-(0.8 ln 0.8 + 0.2 ln 0.2)), evaluated at 50 digits
  const std::vector<double> two{2, 1};
  CHECK(std::abs(effective_rank(two) - 1.6493848884661177) < 1e-14);
  CHECK_THROWS(effective_rank(std::vector<double>{0, 0}));

  Rng rng(4);
  const Tensor m = rng.normal_matrix(12, 9, 1.0);
  Tensor scaled = m;
  for (double& x : scaled.data()) x *= 37.5;
  CHECK(effective_rank(svd_values(scaled)) == doctest::Approx(effective_rank(svd_values(m))).epsilon(1e-12));
}

TEST_CASE("spectrum histogram binning") {
  const std::vector<double> edges{1e-2, 1e-1, 1};
  const std::vector<double> values{5, 1, 0.5, 0.1, 0.05, 1e-3, 0};
  const auto counts = spectrum_histogram(values, edges);
  REQUIRE(counts.size() == 4);
  CHECK(counts[0] == 2);  // below 1e-2
  CHECK(counts[1] == 1);  // [1e-2, 1e-1)
  CHECK(counts[2] == 2);  // [1e-1, 1)
  CHECK(counts[3] == 2);  // >= 1
  const std::vector<double> bad{1, 1};
  CHECK_THROWS(spectrum_histogram(values, bad));

  Rng rng(3);
  const auto rep = make_spectrum_report("m", rng.normal_matrix(10, 7, 1.0), 1e-8);
  std::size_t total = 0;
  for (auto c : rep.counts) total += c;
  CHECK(total == 7);
  CHECK(rep.numerical_rank <= 7);
}

TEST_CASE("sinter expands the rank of a rank-8 product") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    LoRAAdapter inner = init_adapter(64, 64, 8, 8.0, seed);
    inner.b = rng.normal_matrix(64, 8, 1.0);
    const Tensor lora = delta_weight(Adapter{inner});
    const Tensor loran = delta_weight(Adapter{LoRANAdapter{inner, ActivationSpec::sinter(0.5, 5e3), true}});
    const auto r_lora = numerical_rank(svd_values(lora), 1e-8);
    const auto r_loran = numerical_rank(svd_values(loran), 1e-8);
    CHECK(numerical_rank(svd_values(lora), 1e-10) <= 8);
    CHECK(r_loran > 8);
    CHECK(r_loran >= r_lora);
  }
}

TEST_CASE("Eckart-Young floor matches the discarded spectrum") {
  TeacherTask task;
  const Tensor t = make_teacher_target(task);
  const auto s = svd_values(t);
  double tail = 0.0;
  for (std::size_t i = 4; i < s.size(); ++i) tail += s[i] * s[i];
  CHECK(eckart_young_floor(t, 4) == doctest::Approx(tail / (32.0 * 32.0)).epsilon(1e-12));
  CHECK(eckart_young_floor(t, 16) < 1e-20);

  // the truncated SVD itself attains the floor
  const Svd full = svd(t);
  Tensor best = Tensor::zeros(32, 32);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j)
      for (std::size_t p = 0; p < 4; ++p) best(i, j) += full.u(i, p) * full.values[p] * full.v(j, p);
  double err = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) err += std::pow(best.data()[i] - t.data()[i], 2);
  CHECK(err / 1024.0 == doctest::Approx(eckart_young_floor(t, 4)).epsilon(1e-9));
}

TEST_CASE("spectrum comparison summary") {
  Rng rng(5);
  LoRAAdapter inner = init_adapter(32, 32, 4, 4.0, 5);
  inner.b = rng.normal_matrix(32, 4, 1.0);
  const Tensor lora = delta_weight(Adapter{inner});
  const Tensor loran = delta_weight(Adapter{LoRANAdapter{inner, ActivationSpec::sinter(0.5, 5e3), true}});
  const Tensor full = rng.normal_matrix(32, 32, 1.0);
  const auto cmp = compare_spectra(lora, loran, full, 4, 1e-8);
  CHECK(cmp.lora.numerical_rank <= 4);
  CHECK(cmp.full.numerical_rank == 32);
  CHECK(cmp.loran.numerical_rank > cmp.lora.numerical_rank);
  CHECK(cmp.summary.size() >= 3);
  CHECK_THROWS(compare_spectra(lora, Tensor::zeros(4, 4), full, 4, 1e-8));
}
