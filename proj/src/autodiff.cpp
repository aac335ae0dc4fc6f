#include "raf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "raf/rng.hpp"

namespace raf::ad {

void linear_map_vjp(const Tensor& m, std::span<const double> x, std::span<const double> dy, Tensor* dm,
                    std::span<double> dx) {
  const std::size_t d_in = m.extent(0), d_out = m.extent(1);
  if (x.size() != d_in || dy.size() != d_out) throw ShapeError("linear_map_vjp: operand mismatch");
  const auto w = m.data();
  if (dm) {
    auto g = dm->data();
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xi = x[i];
      double* row = g.data() + i * d_out;
      for (std::size_t j = 0; j < d_out; ++j) row[j] += xi * dy[j];
    }
  }
  if (!dx.empty()) {
    for (std::size_t i = 0; i < d_in; ++i) {
      const double* row = w.data() + i * d_out;
      double acc = 0.0;
      for (std::size_t j = 0; j < d_out; ++j) acc += row[j] * dy[j];
      dx[i] += acc;
    }
  }
}

void mode_n_vector_product_vjp(const Tensor& t, std::span<const double> v, int mode, const Tensor& dy, Tensor* dt,
                               std::span<double> dv) {
  if (t.rank() != 3 || mode < 1 || mode > 3) throw ShapeError("mode_n_vector_product_vjp: bad operands");
  const std::size_t d0 = t.extent(0), d1 = t.extent(1), d2 = t.extent(2);
  const auto src = t.data();
  const auto g = dy.data();
  double* out = dt ? dt->data().data() : nullptr;
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d1; ++j)
      for (std::size_t k = 0; k < d2; ++k) {
        const std::size_t at = (i * d1 + j) * d2 + k;
        std::size_t vi = 0, yi = 0;
        switch (mode) {
          case 1: vi = i; yi = j * d2 + k; break;
          case 2: vi = j; yi = i * d2 + k; break;
          default: vi = k; yi = i * d1 + j; break;
        }
        if (out) out[at] += v[vi] * g[yi];
        if (!dv.empty()) dv[vi] += src[at] * g[yi];
      }
}

Vector softmax_vjp(std::span<const double> y, std::span<const double> dy) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  Vector dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
  return dx;
}

Vector tanh_vjp(std::span<const double> y, std::span<const double> dy) {
  Vector dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
  return dx;
}

void concat_vjp(std::span<const double> dy, std::span<double> da, std::span<double> db) {
  if (dy.size() != da.size() + db.size()) throw ShapeError("concat_vjp: operand mismatch");
  for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
  for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[da.size() + i];
}

Vector weighted_sum(std::span<const double> weights, const Tensor& features) {
  if (features.rank() != 2 || weights.size() != features.extent(0)) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for features " +
                     shape_string(features.shape()));
  }
  const std::size_t width = features.extent(1);
  Vector out(width, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto row = features.row(i);
    for (std::size_t c = 0; c < width; ++c) out[c] += weights[i] * row[c];
  }
  return out;
}

void weighted_sum_vjp(std::span<const double> weights, const Tensor& features, std::span<const double> dy,
                      std::span<double> dweights, Tensor* dfeatures) {
  const std::size_t width = features.extent(1);
  if (dy.size() != width) throw ShapeError("weighted_sum_vjp: cotangent mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto row = features.row(i);
    if (!dweights.empty()) {
      double acc = 0.0;
      for (std::size_t c = 0; c < width; ++c) acc += row[c] * dy[c];
      dweights[i] += acc;
    }
    if (dfeatures) {
      auto grow = dfeatures->row(i);
      for (std::size_t c = 0; c < width; ++c) grow[c] += weights[i] * dy[c];
    }
  }
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw std::out_of_range("cross entropy: target " + std::to_string(target) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
  }
  if (!all_finite(logits)) throw NumericError("cross entropy: non-finite logit");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - mx);
  return (mx + std::log(total)) - logits[target];
}

Vector softmax_cross_entropy_vjp(std::span<const double> logits, std::size_t target, double dloss) {
  if (target >= logits.size()) throw std::out_of_range("cross entropy: target out of range");
  Vector g = softmax(logits);
  g[target] -= 1.0;
  for (double& x : g) x *= dloss;
  return g;
}

// ---------------------------------------------------------------------------

namespace {

Tensor as_matrix(const Vector& flat, std::size_t rows, std::size_t cols) { return Tensor({rows, cols}, flat); }

}  // namespace

DifferentiablePrimitive linear_map_primitive(std::size_t d_in, std::size_t d_out) {
  DifferentiablePrimitive p;
  p.name = "linear_map";
  p.input_sizes = {d_in * d_out, d_in};
  p.output_size = d_out;
  p.forward = [=](const std::vector<Vector>& in) { return linear_map(as_matrix(in[0], d_in, d_out), in[1]); };
  p.backward = [=](const std::vector<Vector>& in, std::span<const double> dy) {
    const Tensor m = as_matrix(in[0], d_in, d_out);
    Tensor dm = Tensor::zeros({d_in, d_out});
    Vector dx(d_in, 0.0);
    linear_map_vjp(m, in[1], dy, &dm, dx);
    return std::vector<Vector>{dm.values(), dx};
  };
  return p;
}

DifferentiablePrimitive mode_n_product_primitive(std::size_t d0, std::size_t d1, std::size_t d2, int mode) {
  const std::size_t dims[3] = {d0, d1, d2};
  const std::size_t vlen = dims[mode - 1];
  DifferentiablePrimitive p;
  p.name = "mode_" + std::to_string(mode) + "_product";
  p.input_sizes = {d0 * d1 * d2, vlen};
  p.output_size = d0 * d1 * d2 / vlen;
  p.forward = [=](const std::vector<Vector>& in) {
    return mode_n_vector_product(Tensor({d0, d1, d2}, in[0]), in[1], mode).values();
  };
  p.backward = [=](const std::vector<Vector>& in, std::span<const double> dy) {
    const Tensor t({d0, d1, d2}, in[0]);
    const Tensor y = mode_n_vector_product(t, in[1], mode);
    const Tensor g(y.shape(), Vector(dy.begin(), dy.end()));
    Tensor dt = Tensor::zeros({d0, d1, d2});
    Vector dv(vlen, 0.0);
    mode_n_vector_product_vjp(t, in[1], mode, g, &dt, dv);
    return std::vector<Vector>{dt.values(), dv};
  };
  return p;
}

DifferentiablePrimitive softmax_primitive(std::size_t n) {
  DifferentiablePrimitive p;
  p.name = "softmax";
  p.input_sizes = {n};
  p.output_size = n;
  p.forward = [](const std::vector<Vector>& in) { return softmax(in[0]); };
  p.backward = [](const std::vector<Vector>& in, std::span<const double> dy) {
    return std::vector<Vector>{softmax_vjp(softmax(in[0]), dy)};
  };
  return p;
}

DifferentiablePrimitive tanh_primitive(std::size_t n) {
  DifferentiablePrimitive p;
  p.name = "tanh";
  p.input_sizes = {n};
  p.output_size = n;
  p.forward = [](const std::vector<Vector>& in) { return tanh_map(in[0]); };
  p.backward = [](const std::vector<Vector>& in, std::span<const double> dy) {
    return std::vector<Vector>{tanh_vjp(tanh_map(in[0]), dy)};
  };
  return p;
}

DifferentiablePrimitive concat_primitive(std::size_t n_a, std::size_t n_b) {
  DifferentiablePrimitive p;
  p.name = "concat";
  p.input_sizes = {n_a, n_b};
  p.output_size = n_a + n_b;
  p.forward = [](const std::vector<Vector>& in) { return concat_vectors(in[0], in[1]); };
  p.backward = [=](const std::vector<Vector>&, std::span<const double> dy) {
    Vector da(n_a, 0.0), db(n_b, 0.0);
    concat_vjp(dy, da, db);
    return std::vector<Vector>{da, db};
  };
  return p;
}

DifferentiablePrimitive weighted_sum_primitive(std::size_t locations, std::size_t width) {
  DifferentiablePrimitive p;
  p.name = "weighted_sum";
  p.input_sizes = {locations, locations * width};
  p.output_size = width;
  p.forward = [=](const std::vector<Vector>& in) {
    return weighted_sum(in[0], as_matrix(in[1], locations, width));
  };
  p.backward = [=](const std::vector<Vector>& in, std::span<const double> dy) {
    const Tensor f = as_matrix(in[1], locations, width);
    Vector dw(locations, 0.0);
    Tensor df = Tensor::zeros({locations, width});
    weighted_sum_vjp(in[0], f, dy, dw, &df);
    return std::vector<Vector>{dw, df.values()};
  };
  return p;
}

DifferentiablePrimitive cross_entropy_primitive(std::size_t classes, std::size_t target) {
  DifferentiablePrimitive p;
  p.name = "cross_entropy";
  p.input_sizes = {classes};
  p.output_size = 1;
  p.forward = [=](const std::vector<Vector>& in) { return Vector{softmax_cross_entropy(in[0], target)}; };
  p.backward = [=](const std::vector<Vector>& in, std::span<const double> dy) {
    return std::vector<Vector>{softmax_cross_entropy_vjp(in[0], target, dy[0])};
  };
  return p;
}

double check_primitive(const DifferentiablePrimitive& prim, Rng& rng, double h) {
  std::vector<Vector> inputs;
  for (std::size_t n : prim.input_sizes) {
    Vector x(n);
    for (double& a : x) a = rng.normal();
    inputs.push_back(std::move(x));
  }
  Vector u(prim.output_size);
  for (double& a : u) a = rng.normal();

  auto projected = [&](const std::vector<Vector>& in) {
    const Vector y = prim.forward(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
    return s;
  };

  const std::vector<Vector> grads = prim.backward(inputs, u);
  if (grads.size() != inputs.size()) throw ShapeError(prim.name + ": backward returned wrong input count");
  double worst = 0.0;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    if (grads[a].size() != inputs[a].size()) throw ShapeError(prim.name + ": cotangent shape mismatch");
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      const double saved = inputs[a][i];
      inputs[a][i] = saved + h;
      const double fp = projected(inputs);
      inputs[a][i] = saved - h;
      const double fm = projected(inputs);
      inputs[a][i] = saved;
      worst = std::max(worst, relative_error(grads[a][i], (fp - fm) / (2.0 * h)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, Tensor::zeros_like(p.value)});
  return out;
}

LossAndGradient forward_backward(const Objective& objective, const ParamSet& params) {
  LossAndGradient result;
  result.gradients = zeros_like(params);
  result.loss = objective.loss_and_gradient(params, result.gradients);
  if (!std::isfinite(result.loss)) throw NumericError("forward_backward: non-finite loss");
  if (result.gradients.size() != params.size()) throw ShapeError("forward_backward: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = result.gradients[i];
    if (g.name != params[i].name || !g.value.same_shape(params[i].value)) {
      throw ShapeError("forward_backward: gradient for '" + params[i].name + "' has shape " +
                       shape_string(g.value.shape()) + ", parameter has " + shape_string(params[i].value.shape()));
    }
  }
  return result;
}

ParamSet finite_difference_gradient(const LossFunction& loss, const ParamSet& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  ParamSet work = params;
  ParamSet grads = zeros_like(params);
  for (std::size_t t = 0; t < work.size(); ++t) {
    auto values = work[t].value.data();
    auto out = grads[t].value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double fp = loss(work);
      values[i] = saved - h;
      const double fm = loss(work);
      values[i] = saved;
      out[i] = (fp - fm) / (2.0 * h);
    }
  }
  return grads;
}

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> entries_to_check(std::size_t n, const GradientCheckOptions& opt, Rng& rng) {
  std::vector<std::size_t> idx;
  if (n <= opt.full_check_limit || n <= opt.sample_size) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  std::set<std::size_t> picked;
  while (picked.size() < opt.sample_size) picked.insert(static_cast<std::size_t>(rng.below(n)));
  return {picked.begin(), picked.end()};
}

}  // namespace

GradientReport gradient_check(const Objective& objective, const ParamSet& params, const GradientCheckOptions& opt) {
  GradientReport report;
  report.h = opt.h;
  report.tol = opt.tol;

  LossAndGradient analytic;
  try {
    analytic = forward_backward(objective, params);
  } catch (const std::exception& e) {
    report.diagnostic = e.what();
    return report;
  }

  Rng rng(opt.sample_seed);
  ParamSet work = params;
  bool finite = true;
  try {
    for (std::size_t t = 0; t < work.size(); ++t) {
      TensorCheck check{work[t].name};
      auto values = work[t].value.data();
      const auto g = analytic.gradients[t].value.data();
      for (std::size_t i : entries_to_check(values.size(), opt, rng)) {
        const double saved = values[i];
        values[i] = saved + opt.h;
        const long double fp = objective.reference_loss(work);
        values[i] = saved - opt.h;
        const long double fm = objective.reference_loss(work);
        values[i] = saved;
        const double numeric = static_cast<double>((fp - fm) / (2.0L * opt.h));
        if (!std::isfinite(g[i]) || !std::isfinite(numeric)) {
          finite = false;
          check.max_rel_error = std::numeric_limits<double>::infinity();
          check.worst_index = i;
          if (report.diagnostic.empty()) report.diagnostic = "non-finite gradient in '" + check.name + "'";
        } else {
          const double err = relative_error(g[i], numeric);
          if (err > check.max_rel_error) {
            check.max_rel_error = err;
            check.worst_index = i;
            check.worst_analytic = g[i];
            check.worst_numeric = numeric;
          }
        }
        ++check.entries_checked;
      }
      report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
      report.tensors.push_back(std::move(check));
    }
  } catch (const std::exception& e) {
    report.diagnostic = e.what();
    return report;
  }
  report.pass = finite && report.max_rel_error < opt.tol;
  return report;
}

}  // namespace raf::ad
