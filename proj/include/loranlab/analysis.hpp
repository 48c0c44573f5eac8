// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "loranlab/tensor.hpp"
#include "json.hpp"

namespace loran {

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Thin SVD M = U diag(s) V^T with s descending. U is d x p, V is k x p, p = min(d, k).
struct Svd {
  Tensor u;
  std::vector<double> values;
  Tensor v;
  int sweeps = 0;
};

/// One-sided (Hestenes) Jacobi. Stops when every column pair satisfies
/// |<ci, cj>| <= tol * |ci| |cj|; throws ConvergenceError after `max_sweeps`.
Svd svd(const Tensor& m, double tol = 1e-12, int max_sweeps = 60);
std::vector<double> svd_values(const Tensor& m);

/// Count of values above rel_tol * values[0]. Zero for an all-zero spectrum.
std::size_t numerical_rank(std::span<const double> values, double rel_tol);

/// exp(Shannon entropy) of s_i^2 / sum s^2. Throws for an all-zero spectrum.
double effective_rank(std::span<const double> values);

/// counts[0] holds values below edges[0]; counts[i] holds [edges[i-1], edges[i]);
/// counts.back() holds values >= edges.back().
std::vector<std::size_t> spectrum_histogram(std::span<const double> values, std::span<const double> edges);

/// Logarithmic decades from 1e-8 * sigma_max up to sigma_max.
std::vector<double> default_spectrum_edges(double sigma_max);

/// Mean-squared Frobenius error of the best rank-r approximation of `target`.
double eckart_young_floor(const Tensor& target, std::size_t r);

struct SpectrumReport {
  std::string label;
  std::vector<double> values;
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  double rank_tol = 1e-8;
  std::size_t numerical_rank = 0;
  std::optional<double> effective_rank;
};

/// `edges` empty means default_spectrum_edges(sigma_max).
SpectrumReport make_spectrum_report(std::string label, const Tensor& m, double rank_tol,
                                    std::vector<double> edges = {});

struct SpectrumComparison {
  SpectrumReport lora;
  SpectrumReport loran;
  SpectrumReport full;
  std::vector<std::string> summary;
};

/// Spectra of three trained updates on the same objective, plus one summary line per observation.
SpectrumComparison compare_spectra(const Tensor& lora_delta, const Tensor& loran_delta, const Tensor& full_delta,
                                   std::size_t adapter_rank, double rank_tol, std::vector<double> edges = {});

nlohmann::json to_json(const SpectrumReport& report);

}  // namespace loran
