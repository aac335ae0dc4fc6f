#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "raf/tensor.hpp"
#include "raf/tucker_fusion.hpp"

namespace raf {

/// A question-conditioned attention head over L locations. The fusion's
/// output width is the glimpse count: each location's fused vector is mapped
/// to one logit per glimpse by the shared output projection.
struct AttentionBranch {
  TuckerFusionParams fusion;

  std::size_t glimpses() const noexcept { return fusion.dims.n_out; }
  std::size_t feature_dim() const noexcept { return fusion.dims.n_v; }
  bool operator==(const AttentionBranch&) const = default;
};

struct AttentionResult {
  Tensor weights;  ///< [g x L], each row a distribution over locations
  Vector pooled;   ///< length g * n_v, glimpses concatenated in order
};

/// Logits [g x L]; column i is project_out(fuse(q, features[i])).
Tensor score_locations(const AttentionBranch& branch, std::span<const double> q, const Tensor& features);

/// Row-wise softmax over locations.
Tensor normalize_attention(const Tensor& logits);

/// Per glimpse r: sum_i weights[r][i] * features[i], concatenated over r.
Vector attend(const Tensor& weights, const Tensor& features);

AttentionResult run_attention(const AttentionBranch& branch, std::span<const double> q, const Tensor& features);

/// Intermediates kept for the backward pass.
struct AttentionTrace {
  QuestionEncoding question;
  std::vector<VisualTrace> locations;
  Tensor weights;
  Vector pooled;
};

AttentionTrace attention_forward(const AttentionBranch& branch, std::span<const double> q, const Tensor& features);

/// Accumulates dL/dparams of the branch into `grads` given dL/dpooled.
void attention_backward(const AttentionBranch& branch, std::span<const double> q, const Tensor& features,
                        const AttentionTrace& trace, std::span<const double> d_pooled, TuckerFusionParams& grads);

}  // namespace raf
