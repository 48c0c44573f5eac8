// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace loran {

Svd svd(const Tensor& m, double tol, int max_sweeps) {
  if (m.rank() != 2) throw DimensionError("svd expects a matrix, got " + m.shape_string());
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("svd input has non-finite entries");
  }
  const bool wide = m.rows() < m.cols();
  // Work on columns of a tall matrix; a wide input is handled through its transpose.
  Tensor w = wide ? m.transposed() : m;
  const std::size_t rows = w.rows(), cols = w.cols();
  Tensor v = Tensor::identity(cols);

  int sweep = 0;
  double residual = 0.0;
  for (; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    residual = 0.0;
    for (std::size_t i = 0; i + 1 < cols; ++i) {
      for (std::size_t j = i + 1; j < cols; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          alpha += w(r, i) * w(r, i);
          beta += w(r, j) * w(r, j);
          gamma += w(r, i) * w(r, j);
        }
        const double norm = std::sqrt(alpha) * std::sqrt(beta);
        if (gamma == 0.0 || norm == 0.0) continue;
        const double off = std::abs(gamma) / norm;
        residual = std::max(residual, off);
        if (off <= tol) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const double wi = w(r, i), wj = w(r, j);
          w(r, i) = c * wi - s * wj;
          w(r, j) = s * wi + c * wj;
        }
        for (std::size_t r = 0; r < cols; ++r) {
          const double vi = v(r, i), vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }
  if (sweep == max_sweeps) {
    std::ostringstream os;
    os << "one-sided Jacobi SVD did not converge in " << max_sweeps << " sweeps (residual " << residual << ")";
    throw ConvergenceError(os.str(), residual);
  }

  std::vector<double> norms(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += w(r, j) * w(r, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  Svd out;
  out.sweeps = sweep + 1;
  out.values.resize(cols);
  Tensor u = Tensor::zeros(rows, cols);
  Tensor vs = Tensor::zeros(cols, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t src = order[c];
    const double sigma = norms[src];
    out.values[c] = sigma;
    for (std::size_t r = 0; r < rows; ++r) u(r, c) = sigma > 0.0 ? w(r, src) / sigma : 0.0;
    for (std::size_t r = 0; r < cols; ++r) vs(r, c) = v(r, src);
  }
  if (wide) {
    out.u = std::move(vs);
    out.v = std::move(u);
  } else {
    out.u = std::move(u);
    out.v = std::move(vs);
  }
  return out;
}

std::vector<double> svd_values(const Tensor& m) { return svd(m).values; }

std::size_t numerical_rank(std::span<const double> values, double rel_tol) {
  if (values.empty() || values.front() <= 0.0) return 0;
  const double cutoff = rel_tol * values.front();
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double s) { return s > cutoff; }));
}

double effective_rank(std::span<const double> values) {
  double total = 0.0;
  for (double s : values) total += s * s;
  if (!(total > 0.0)) throw std::invalid_argument("effective rank of an all-zero spectrum is undefined");
  double entropy = 0.0;
  for (double s : values) {
    const double p = s * s / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

std::vector<std::size_t> spectrum_histogram(std::span<const double> values, std::span<const double> edges) {
  if (edges.empty()) throw std::invalid_argument("histogram needs at least one edge");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("histogram edges must be strictly increasing");
  }
  std::vector<std::size_t> counts(edges.size() + 1, 0);
  for (double v : values) {
    const auto pos = std::upper_bound(edges.begin(), edges.end(), v) - edges.begin();
    counts[static_cast<std::size_t>(pos)] += 1;
  }
  return counts;
}

std::vector<double> default_spectrum_edges(double sigma_max) {
  if (!(sigma_max > 0.0)) sigma_max = 1.0;
  std::vector<double> edges;
  for (int e = -8; e <= 0; ++e) edges.push_back(sigma_max * std::pow(10.0, e));
  return edges;
}

double eckart_young_floor(const Tensor& target, std::size_t r) {
  const auto values = svd_values(target);
  double tail = 0.0;
  for (std::size_t i = r; i < values.size(); ++i) tail += values[i] * values[i];
  return tail / static_cast<double>(target.size());
}

SpectrumReport make_spectrum_report(std::string label, const Tensor& m, double rank_tol, std::vector<double> edges) {
  SpectrumReport rep;
  rep.label = std::move(label);
  rep.values = svd_values(m);
  rep.edges = edges.empty() ? default_spectrum_edges(rep.values.front()) : std::move(edges);
  rep.counts = spectrum_histogram(rep.values, rep.edges);
  rep.rank_tol = rank_tol;
  rep.numerical_rank = numerical_rank(rep.values, rank_tol);
  if (rep.values.front() > 0.0) rep.effective_rank = effective_rank(rep.values);
  return rep;
}

SpectrumComparison compare_spectra(const Tensor& lora_delta, const Tensor& loran_delta, const Tensor& full_delta,
                                   std::size_t adapter_rank, double rank_tol, std::vector<double> edges) {
  if (lora_delta.shape() != loran_delta.shape() || lora_delta.shape() != full_delta.shape()) {
    throw DimensionError("compare_spectra shape mismatch: " + lora_delta.shape_string() + ", " +
                         loran_delta.shape_string() + ", " + full_delta.shape_string());
  }
  SpectrumComparison cmp{make_spectrum_report("lora", lora_delta, rank_tol, edges),
                         make_spectrum_report("loran", loran_delta, rank_tol, edges),
                         make_spectrum_report("full", full_delta, rank_tol, edges),
                         {}};
  auto eff = [](const SpectrumReport& r) { return r.effective_rank.value_or(0.0); };
  std::ostringstream os;
  os << "full: numerical rank " << cmp.full.numerical_rank << ", effective rank " << eff(cmp.full);
  cmp.summary.push_back(os.str());
  os.str("");
  os << "lora: numerical rank " << cmp.lora.numerical_rank << (cmp.lora.numerical_rank <= adapter_rank ? " <= " : " > ")
     << "r=" << adapter_rank << ", effective rank " << eff(cmp.lora);
  cmp.summary.push_back(os.str());
  os.str("");
  os << "loran: numerical rank " << cmp.loran.numerical_rank << ", effective rank " << eff(cmp.loran);
  const bool between = cmp.loran.numerical_rank >= cmp.lora.numerical_rank &&
                       cmp.loran.numerical_rank <= cmp.full.numerical_rank;
  os << (between ? " (between lora and full)" : " (outside the lora..full range)");
  cmp.summary.push_back(os.str());
  return cmp;
}

nlohmann::json to_json(const SpectrumReport& r) {
  return {{"label", r.label},
          {"singular_values", r.values},
          {"edges", r.edges},
          {"counts", r.counts},
          {"rank_tol", r.rank_tol},
          {"numerical_rank", r.numerical_rank},
          {"effective_rank", r.effective_rank ? nlohmann::json(*r.effective_rank) : nlohmann::json(nullptr)}};
}

}  // namespace loran
