#pragma once

// Hand-written vector-Jacobian products for the primitives the model is built
// from, plus the finite-difference oracle used to audit them.
//
// Convention for every *_vjp: gradient outputs are accumulated (+=) into
// caller-owned buffers; a null pointer or empty span skips that input.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "raf/tensor.hpp"

namespace raf {
class Rng;
}

namespace raf::ad {

void linear_map_vjp(const Tensor& m, std::span<const double> x, std::span<const double> dy, Tensor* dm,
                    std::span<double> dx);

void mode_n_vector_product_vjp(const Tensor& t, std::span<const double> v, int mode, const Tensor& dy, Tensor* dt,
                               std::span<double> dv);

/// Takes the softmax *output* y.
Vector softmax_vjp(std::span<const double> y, std::span<const double> dy);

/// Takes the tanh *output* y.
Vector tanh_vjp(std::span<const double> y, std::span<const double> dy);

void concat_vjp(std::span<const double> dy, std::span<double> da, std::span<double> db);

/// pooled = sum_i weights_i * features[i]; features is [L x n].
Vector weighted_sum(std::span<const double> weights, const Tensor& features);
void weighted_sum_vjp(std::span<const double> weights, const Tensor& features, std::span<const double> dy,
                      std::span<double> dweights, Tensor* dfeatures);

/// -log softmax(logits)[target], evaluated in log-space.
double softmax_cross_entropy(std::span<const double> logits, std::size_t target);
/// Gradient w.r.t. the logits: softmax(logits) - onehot(target).
Vector softmax_cross_entropy_vjp(std::span<const double> logits, std::size_t target, double dloss = 1.0);

/// A primitive viewed as a function of flat input vectors, for isolated checks.
struct DifferentiablePrimitive {
  std::string name;
  std::vector<std::size_t> input_sizes;
  std::size_t output_size = 0;
  std::function<Vector(const std::vector<Vector>&)> forward;
  std::function<std::vector<Vector>(const std::vector<Vector>&, std::span<const double>)> backward;
};

DifferentiablePrimitive linear_map_primitive(std::size_t d_in, std::size_t d_out);
DifferentiablePrimitive mode_n_product_primitive(std::size_t d0, std::size_t d1, std::size_t d2, int mode);
DifferentiablePrimitive softmax_primitive(std::size_t n);
DifferentiablePrimitive tanh_primitive(std::size_t n);
DifferentiablePrimitive concat_primitive(std::size_t n_a, std::size_t n_b);
DifferentiablePrimitive weighted_sum_primitive(std::size_t locations, std::size_t width);
DifferentiablePrimitive cross_entropy_primitive(std::size_t classes, std::size_t target);

/// Maximum relative error between the primitive's backward and central
/// differences of <u, forward(x)> for a random cotangent u and random inputs.
double check_primitive(const DifferentiablePrimitive& prim, Rng& rng, double h = 1e-6);

struct NamedTensor {
  std::string name;
  Tensor value;
};
using ParamSet = std::vector<NamedTensor>;

ParamSet zeros_like(const ParamSet& params);

/// A scalar loss over named parameters with an analytic gradient.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double loss(const ParamSet& params) const = 0;
  /// Writes the gradient into `grads`, which arrives zeroed with the shapes of `params`.
  virtual double loss_and_gradient(const ParamSet& params, ParamSet& grads) const = 0;
  /// Loss evaluated for the finite-difference side of gradient_check. The
  /// default is loss(); override to evaluate in extended precision.
  virtual long double reference_loss(const ParamSet& params) const { return loss(params); }
};

struct LossAndGradient {
  double loss = 0.0;
  ParamSet gradients;
};

/// Evaluates the objective and validates the result: gradient names and
/// shapes must match the parameters and the loss must be finite.
LossAndGradient forward_backward(const Objective& objective, const ParamSet& params);

using LossFunction = std::function<double(const ParamSet&)>;

/// Central differences (f(p + h e) - f(p - h e)) / 2h for every scalar entry.
ParamSet finite_difference_gradient(const LossFunction& loss, const ParamSet& params, double h);

double relative_error(double analytic, double numeric) noexcept;

struct GradientCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t full_check_limit = 4096;  ///< check every entry up to this size
  std::size_t sample_size = 256;        ///< otherwise this many seeded samples
  std::uint64_t sample_seed = 0;
};

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradientReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  double h = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::string diagnostic;  ///< set when the check could not run to completion
};

GradientReport gradient_check(const Objective& objective, const ParamSet& params,
                              const GradientCheckOptions& options = {});

}  // namespace raf::ad
