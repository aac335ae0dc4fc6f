#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "raf/attention.hpp"
#include "raf/autodiff.hpp"
#include "raf/example.hpp"
#include "raf/tucker_fusion.hpp"

namespace raf {

/// Which visual feature levels feed the classifier.
enum class Variant : std::uint8_t { IO = 0, I = 1, O = 2 };

std::string_view variant_name(Variant v) noexcept;
/// Accepts "io", "i", "o" (case-insensitive).
Variant parse_variant(std::string_view text);

struct ModelConfig {
  std::size_t n_q = 1;
  std::size_t n_v = 1;
  std::size_t grid = 1;     ///< G
  std::size_t objects = 1;  ///< N
  std::size_t t_q = 1;
  std::size_t t_v = 1;
  std::size_t t_rho = 1;
  std::size_t glimpses = 1;
  std::size_t n_answers = 1;
  Variant variant = Variant::IO;
  std::uint64_t seed = 0;

  void validate() const;
  bool uses_grid() const noexcept { return variant != Variant::O; }
  bool uses_objects() const noexcept { return variant != Variant::I; }
  std::size_t branches() const noexcept { return variant == Variant::IO ? 2 : 1; }

  FusionDims branch_fusion_dims() const;
  /// n_v = branches * g * n_v, t_v = branches * g * t_v, n_out = n_answers.
  FusionDims final_fusion_dims() const;

  /// Equal architecture (everything except the seed).
  bool same_architecture(const ModelConfig& other) const noexcept;
  bool operator==(const ModelConfig&) const = default;
};

/// Two attention branches, the co-attention fusion and the classifier head.
/// Absent branches (single-level variants) are empty optionals.
struct RafModel {
  ModelConfig config;
  std::optional<AttentionBranch> image_branch;
  std::optional<AttentionBranch> object_branch;
  TuckerFusionParams final_fusion;

  /// All-zero parameters with the architecture of `cfg`.
  static RafModel zeros(const ModelConfig& cfg);

  void validate() const;

  /// Parameter tensors in the fixed order: image branch, object branch, final
  /// fusion; each as question_proj, visual_proj, core, output_proj.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;

  /// Named copies in the same fixed order.
  ad::ParamSet parameters() const;
  void assign(const ad::ParamSet& params);

  std::uint64_t parameter_count() const;

  bool operator==(const RafModel&) const = default;
};

/// Seeds: image branch cfg.seed, object branch cfg.seed + 1, final fusion cfg.seed + 2.
RafModel init_model(const ModelConfig& cfg);

struct ForwardOutput {
  Vector logits;
  std::optional<Tensor> image_attention;   ///< [g x G]
  std::optional<Tensor> object_attention;  ///< [g x N]
  Vector embedding;                        ///< pooled visual-question embedding fed to the final fusion
};

/// Pass nullptr for a feature level the variant does not use; supplying
/// features for an absent branch is an error.
ForwardOutput forward(const RafModel& model, std::span<const double> q, const Tensor* grid, const Tensor* objects);
/// Uses whichever of the example's feature levels the variant needs.
ForwardOutput forward(const RafModel& model, const Example& example);

Vector variant_forward(const RafModel& model, std::span<const double> q, const Tensor* grid, const Tensor* objects);

/// Index of the largest logit, lowest index on ties.
std::size_t argmax(std::span<const double> logits);
std::size_t predict(const RafModel& model, const Example& example);

double example_loss(const RafModel& model, const Example& example);
/// Cross-entropy loss for one example; accumulates its gradient into `grads`,
/// which must have the architecture of `model` (see RafModel::zeros).
double example_loss_and_gradient(const RafModel& model, const Example& example, RafModel& grads);

/// Precision of the loss evaluations behind finite differences. With
/// doubles, central differences at h = 1e-5 carry ~1e-11 of rounding noise,
/// which already exceeds 1e-4 relative error on gradient entries near 1e-7.
enum class OraclePrecision { Double, Extended };

/// Cross-entropy of one example as a function of the model's named
/// parameters. The finite-difference loss comes from the nested-loop
/// reference forward (raf/reference.hpp), not from the code being checked.
class ExampleObjective : public ad::Objective {
 public:
  ExampleObjective(ModelConfig config, Example example, OraclePrecision precision = OraclePrecision::Extended);
  double loss(const ad::ParamSet& params) const override;
  double loss_and_gradient(const ad::ParamSet& params, ad::ParamSet& grads) const override;
  long double reference_loss(const ad::ParamSet& params) const override;

 private:
  ModelConfig config_;
  Example example_;
  OraclePrecision precision_;
};

ad::GradientReport gradient_check(const RafModel& model, const Example& example, double h = 1e-5, double tol = 1e-4,
                                  OraclePrecision precision = OraclePrecision::Extended);

}  // namespace raf
