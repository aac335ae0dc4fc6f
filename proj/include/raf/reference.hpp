#pragma once

// Straight-line nested-loop forward pass, written independently of the
// Tensor primitives and templated on the scalar type. Used as the oracle for
// the model's forward and, instantiated with long double, as the loss
// evaluator behind finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "raf/raf_model.hpp"

namespace raf::reference {

template <class T>
std::vector<T> fuse_and_project(const TuckerFusionParams& p, const std::vector<T>& q, const std::vector<T>& v) {
  const auto& d = p.dims;
  std::vector<T> qt(d.t_q), vt(d.t_v), tau(d.t_rho, T(0)), rho(d.n_out, T(0));
  for (std::size_t i = 0; i < d.t_q; ++i) {
    T acc = 0;
    for (std::size_t a = 0; a < d.n_q; ++a) acc += q[a] * static_cast<T>(p.question_proj(a, i));
    qt[i] = std::tanh(acc);
  }
  for (std::size_t j = 0; j < d.t_v; ++j) {
    T acc = 0;
    for (std::size_t b = 0; b < d.n_v; ++b) acc += v[b] * static_cast<T>(p.visual_proj(b, j));
    vt[j] = std::tanh(acc);
  }
  for (std::size_t k = 0; k < d.t_rho; ++k) {
    T acc = 0;
    for (std::size_t i = 0; i < d.t_q; ++i)
      for (std::size_t j = 0; j < d.t_v; ++j) acc += static_cast<T>(p.core(i, j, k)) * qt[i] * vt[j];
    tau[k] = acc;
  }
  for (std::size_t c = 0; c < d.n_out; ++c) {
    T acc = 0;
    for (std::size_t k = 0; k < d.t_rho; ++k) acc += tau[k] * static_cast<T>(p.output_proj(k, c));
    rho[c] = acc;
  }
  return rho;
}

/// Pooled glimpses of one attention branch (glimpse-major).
template <class T>
std::vector<T> attend_branch(const AttentionBranch& b, const std::vector<T>& q, const Tensor& features) {
  const std::size_t L = features.extent(0), width = features.extent(1), g = b.glimpses();
  std::vector<std::vector<T>> logits(g, std::vector<T>(L));
  for (std::size_t i = 0; i < L; ++i) {
    std::vector<T> row(width);
    for (std::size_t c = 0; c < width; ++c) row[c] = static_cast<T>(features(i, c));
    const std::vector<T> rho = fuse_and_project(b.fusion, q, row);
    for (std::size_t r = 0; r < g; ++r) logits[r][i] = rho[r];
  }
  std::vector<T> pooled(g * width, T(0));
  for (std::size_t r = 0; r < g; ++r) {
    const T mx = *std::max_element(logits[r].begin(), logits[r].end());
    T total = 0;
    for (T& z : logits[r]) total += (z = std::exp(z - mx));
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t c = 0; c < width; ++c) pooled[r * width + c] += logits[r][i] / total * static_cast<T>(features(i, c));
  }
  return pooled;
}

template <class T>
std::vector<T> logits(const RafModel& m, const Example& ex) {
  std::vector<T> q(ex.q.begin(), ex.q.end());
  std::vector<T> phi;
  if (m.image_branch) {
    const auto pooled = attend_branch<T>(*m.image_branch, q, ex.grid);
    phi.insert(phi.end(), pooled.begin(), pooled.end());
  }
  if (m.object_branch) {
    const auto pooled = attend_branch<T>(*m.object_branch, q, ex.objects);
    phi.insert(phi.end(), pooled.begin(), pooled.end());
  }
  return fuse_and_project(m.final_fusion, q, phi);
}

template <class T>
T loss(const RafModel& m, const Example& ex) {
  const std::vector<T> z = logits<T>(m, ex);
  const T mx = *std::max_element(z.begin(), z.end());
  T total = 0;
  for (T x : z) total += std::exp(x - mx);
  return mx + std::log(total) - z.at(ex.answer);
}

}  // namespace raf::reference
