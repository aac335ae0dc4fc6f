#include "raf/tucker_fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "raf/autodiff.hpp"
#include "raf/rng.hpp"

namespace raf {

void FusionDims::validate() const {
  if (n_q == 0 || n_v == 0 || t_q == 0 || t_v == 0 || t_rho == 0 || n_out == 0) {
    throw ShapeError("fusion dims must all be >= 1");
  }
}

TuckerFusionParams TuckerFusionParams::zeros(const FusionDims& d) {
  d.validate();
  return {d, Tensor::zeros({d.n_q, d.t_q}), Tensor::zeros({d.n_v, d.t_v}), Tensor::zeros({d.t_q, d.t_v, d.t_rho}),
          Tensor::zeros({d.t_rho, d.n_out})};
}

void TuckerFusionParams::validate() const {
  dims.validate();
  auto expect = [](const Tensor& t, std::vector<std::size_t> shape, const char* what) {
    if (t.shape() != shape) {
      throw ShapeError(std::string(what) + " has shape " + shape_string(t.shape()) + ", expected " +
                       shape_string(shape));
    }
    if (!all_finite(t.data())) throw NumericError(std::string(what) + " holds a non-finite entry");
  };
  expect(question_proj, {dims.n_q, dims.t_q}, "question projection");
  expect(visual_proj, {dims.n_v, dims.t_v}, "visual projection");
  expect(core, {dims.t_q, dims.t_v, dims.t_rho}, "core tensor");
  expect(output_proj, {dims.t_rho, dims.n_out}, "output projection");
}

TuckerFusionParams init_params(const FusionDims& dims, std::uint64_t seed) {
  TuckerFusionParams p = TuckerFusionParams::zeros(dims);
  Rng rng(seed);
  auto fill = [&](Tensor& t, double scale) {
    for (double& x : t.data()) x = rng.uniform(-scale, scale);
  };
  auto glorot = [](std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  };
  fill(p.question_proj, glorot(dims.n_q, dims.t_q));
  fill(p.visual_proj, glorot(dims.n_v, dims.t_v));
  fill(p.core, std::sqrt(6.0 / static_cast<double>(dims.t_q + dims.t_v + dims.t_rho)));
  fill(p.output_proj, glorot(dims.t_rho, dims.n_out));
  return p;
}

namespace {

void check_inputs(const TuckerFusionParams& p, std::span<const double> q, std::span<const double> v) {
  if (q.size() != p.dims.n_q) {
    throw ShapeError("fusion: question length " + std::to_string(q.size()) + ", expected " + std::to_string(p.dims.n_q));
  }
  if (v.size() != p.dims.n_v) {
    throw ShapeError("fusion: visual length " + std::to_string(v.size()) + ", expected " + std::to_string(p.dims.n_v));
  }
}

}  // namespace

QuestionEncoding encode_question(const TuckerFusionParams& p, std::span<const double> q) {
  if (q.size() != p.dims.n_q) {
    throw ShapeError("fusion: question length " + std::to_string(q.size()) + ", expected " + std::to_string(p.dims.n_q));
  }
  QuestionEncoding enc;
  enc.q_tilde = tanh_map(linear_map(p.question_proj, q));
  enc.q_core = mode_n_vector_product(p.core, enc.q_tilde, 1);
  return enc;
}

VisualTrace fuse_visual(const TuckerFusionParams& p, const QuestionEncoding& enc, std::span<const double> v) {
  if (v.size() != p.dims.n_v) {
    throw ShapeError("fusion: visual length " + std::to_string(v.size()) + ", expected " + std::to_string(p.dims.n_v));
  }
  VisualTrace tr;
  tr.v_tilde = tanh_map(linear_map(p.visual_proj, v));
  tr.tau = linear_map(enc.q_core, tr.v_tilde);
  tr.rho = linear_map(p.output_proj, tr.tau);
  return tr;
}

void fuse_visual_backward(const TuckerFusionParams& p, const QuestionEncoding& enc, std::span<const double> v,
                          const VisualTrace& tr, std::span<const double> d_rho, TuckerFusionParams& grads,
                          Tensor& d_q_core, std::span<double> dv) {
  Vector d_tau(p.dims.t_rho, 0.0);
  ad::linear_map_vjp(p.output_proj, tr.tau, d_rho, &grads.output_proj, d_tau);
  Vector d_v_tilde(p.dims.t_v, 0.0);
  ad::linear_map_vjp(enc.q_core, tr.v_tilde, d_tau, &d_q_core, d_v_tilde);
  const Vector d_v_pre = ad::tanh_vjp(tr.v_tilde, d_v_tilde);
  ad::linear_map_vjp(p.visual_proj, v, d_v_pre, &grads.visual_proj, dv);
}

void encode_question_backward(const TuckerFusionParams& p, const QuestionEncoding& enc, std::span<const double> q,
                              const Tensor& d_q_core, TuckerFusionParams& grads) {
  Vector d_q_tilde(p.dims.t_q, 0.0);
  ad::mode_n_vector_product_vjp(p.core, enc.q_tilde, 1, d_q_core, &grads.core, d_q_tilde);
  const Vector d_q_pre = ad::tanh_vjp(enc.q_tilde, d_q_tilde);
  ad::linear_map_vjp(p.question_proj, q, d_q_pre, &grads.question_proj, {});
}

Vector fuse(const TuckerFusionParams& p, std::span<const double> q, std::span<const double> v) {
  check_inputs(p, q, v);
  const QuestionEncoding enc = encode_question(p, q);
  return linear_map(enc.q_core, tanh_map(linear_map(p.visual_proj, v)));
}

Vector fuse_linear(const TuckerFusionParams& p, std::span<const double> q, std::span<const double> v) {
  check_inputs(p, q, v);
  const Vector q_proj = linear_map(p.question_proj, q);
  const Vector v_proj = linear_map(p.visual_proj, v);
  return linear_map(mode_n_vector_product(p.core, q_proj, 1), v_proj);
}

Vector project_out(const TuckerFusionParams& p, std::span<const double> tau) {
  if (tau.size() != p.dims.t_rho) {
    throw ShapeError("project_out: length " + std::to_string(tau.size()) + ", expected " + std::to_string(p.dims.t_rho));
  }
  return linear_map(p.output_proj, tau);
}

Tensor reconstruct_full_tensor(const TuckerFusionParams& p, std::size_t cap) {
  const auto& d = p.dims;
  const std::uint64_t entries = static_cast<std::uint64_t>(d.n_q) * d.n_v * d.n_out;
  if (entries > cap) {
    throw std::length_error("full tensor would hold " + std::to_string(entries) + " entries (" +
                            std::to_string(d.n_q) + "x" + std::to_string(d.n_v) + "x" + std::to_string(d.n_out) +
                            "), cap is " + std::to_string(cap));
  }
  // core[i,j,k] -> A[i,j,c] -> B[i,b,c] -> W[a,b,c]
  Tensor a = Tensor::zeros({d.t_q, d.t_v, d.n_out});
  for (std::size_t i = 0; i < d.t_q; ++i)
    for (std::size_t j = 0; j < d.t_v; ++j)
      for (std::size_t k = 0; k < d.t_rho; ++k) {
        const double c = p.core(i, j, k);
        for (std::size_t o = 0; o < d.n_out; ++o) a(i, j, o) += c * p.output_proj(k, o);
      }
  Tensor b = Tensor::zeros({d.t_q, d.n_v, d.n_out});
  for (std::size_t i = 0; i < d.t_q; ++i)
    for (std::size_t j = 0; j < d.t_v; ++j)
      for (std::size_t vb = 0; vb < d.n_v; ++vb) {
        const double f = p.visual_proj(vb, j);
        for (std::size_t o = 0; o < d.n_out; ++o) b(i, vb, o) += f * a(i, j, o);
      }
  Tensor w = Tensor::zeros({d.n_q, d.n_v, d.n_out});
  for (std::size_t qa = 0; qa < d.n_q; ++qa)
    for (std::size_t i = 0; i < d.t_q; ++i) {
      const double f = p.question_proj(qa, i);
      for (std::size_t vb = 0; vb < d.n_v; ++vb)
        for (std::size_t o = 0; o < d.n_out; ++o) w(qa, vb, o) += f * b(i, vb, o);
    }
  return w;
}

Vector full_bilinear_oracle(const Tensor& W, std::span<const double> q, std::span<const double> v) {
  if (W.rank() != 3 || W.extent(0) != q.size() || W.extent(1) != v.size()) {
    throw ShapeError("bilinear oracle: W " + shape_string(W.shape()) + " vs q " + std::to_string(q.size()) + ", v " +
                     std::to_string(v.size()));
  }
  // W x1 q yields [n_v x n_out]; contracting that with v is a linear map.
  return linear_map(mode_n_vector_product(W, q, 1), v);
}

ParameterCount parameter_count(const FusionDims& d) {
  d.validate();
  using u64 = std::uint64_t;
  ParameterCount c;
  c.full = u64{d.n_q} * d.n_v * d.n_out;
  c.tucker = u64{d.n_q} * d.t_q + u64{d.n_v} * d.t_v + u64{d.t_q} * d.t_v * d.t_rho + u64{d.t_rho} * d.n_out;
  return c;
}

}  // namespace raf
