#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "raf/tensor.hpp"

namespace raf {

/// Sizes of one fusion unit: inputs (question, visual), projected sizes, core
/// output size and the width of the output projection.
struct FusionDims {
  std::size_t n_q = 1;
  std::size_t n_v = 1;
  std::size_t t_q = 1;
  std::size_t t_v = 1;
  std::size_t t_rho = 1;
  std::size_t n_out = 1;

  void validate() const;
  bool operator==(const FusionDims&) const = default;
};

/// Tucker factors of the bilinear map W[n_q x n_v x n_out]:
/// W[a,b,c] = sum_{i,j,k} question_proj[a,i] visual_proj[b,j] core[i,j,k] output_proj[k,c].
struct TuckerFusionParams {
  FusionDims dims;
  Tensor question_proj;  ///< [n_q x t_q]
  Tensor visual_proj;    ///< [n_v x t_v]
  Tensor core;           ///< [t_q x t_v x t_rho]
  Tensor output_proj;    ///< [t_rho x n_out]

  static TuckerFusionParams zeros(const FusionDims& dims);
  /// Throws ShapeError / NumericError if a tensor disagrees with `dims` or holds a non-finite entry.
  void validate() const;
  bool operator==(const TuckerFusionParams&) const = default;
};

/// Uniform(-s, s) fill with s = sqrt(6 / (fan_in + fan_out)) per matrix and
/// s = sqrt(6 / (t_q + t_v + t_rho)) for the core. Filled in member order from one generator.
TuckerFusionParams init_params(const FusionDims& dims, std::uint64_t seed);

/// tau = core x1 tanh(q question_proj) x2 tanh(v visual_proj).
Vector fuse(const TuckerFusionParams& p, std::span<const double> q, std::span<const double> v);
/// Same contraction without the tanh on either projection.
Vector fuse_linear(const TuckerFusionParams& p, std::span<const double> q, std::span<const double> v);
/// rho = tau^T output_proj.
Vector project_out(const TuckerFusionParams& p, std::span<const double> tau);

inline constexpr std::size_t kDefaultReconstructCap = 10'000'000;

/// Materializes W; throws std::length_error when n_q * n_v * n_out exceeds `cap`.
Tensor reconstruct_full_tensor(const TuckerFusionParams& p, std::size_t cap = kDefaultReconstructCap);

/// rho_c = sum_{a,b} W[a,b,c] q_a v_b for W stored [n_q x n_v x n_out].
Vector full_bilinear_oracle(const Tensor& W, std::span<const double> q, std::span<const double> v);

struct ParameterCount {
  std::uint64_t full = 0;
  std::uint64_t tucker = 0;
};
ParameterCount parameter_count(const FusionDims& dims);

// --- pieces used by the model's forward/backward -------------------------

/// Question side of a fusion, shared by every visual input fused with it.
struct QuestionEncoding {
  Vector q_tilde;  ///< tanh(q question_proj), length t_q
  Tensor q_core;   ///< core x1 q_tilde, [t_v x t_rho]
};

/// Per-visual-input intermediates.
struct VisualTrace {
  Vector v_tilde;  ///< tanh(v visual_proj), length t_v
  Vector tau;      ///< length t_rho
  Vector rho;      ///< length n_out
};

QuestionEncoding encode_question(const TuckerFusionParams& p, std::span<const double> q);
VisualTrace fuse_visual(const TuckerFusionParams& p, const QuestionEncoding& enc, std::span<const double> v);

/// Backpropagates d_rho through one visual input. Accumulates into
/// grads.visual_proj, grads.output_proj and `d_q_core`; adds dL/dv into `dv` if non-empty.
void fuse_visual_backward(const TuckerFusionParams& p, const QuestionEncoding& enc, std::span<const double> v,
                          const VisualTrace& trace, std::span<const double> d_rho, TuckerFusionParams& grads,
                          Tensor& d_q_core, std::span<double> dv);

/// Finishes the question side once all visual inputs have contributed to `d_q_core`.
void encode_question_backward(const TuckerFusionParams& p, const QuestionEncoding& enc, std::span<const double> q,
                              const Tensor& d_q_core, TuckerFusionParams& grads);

}  // namespace raf
