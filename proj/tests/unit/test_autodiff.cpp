#include <cmath>
#include <vector>

#include "doctest.h"
#include "raf/autodiff.hpp"
#include "raf/presets.hpp"
#include "raf/raf_model.hpp"
#include "raf/rng.hpp"

using namespace raf;
using ad::ParamSet;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);
  return t;
}

// loss = 0.5 * |p|^2 over a single parameter vector.
class Quadratic : public ad::Objective {
 public:
  double loss(const ParamSet& p) const override {
    double s = 0.0;
    for (double x : p[0].value.data()) s += 0.5 * x * x;
    return s;
  }
  double loss_and_gradient(const ParamSet& p, ParamSet& g) const override {
    for (std::size_t i = 0; i < p[0].value.size(); ++i) g[0].value.data()[i] = p[0].value.data()[i];
    return loss(p);
  }
};

// Two-layer tanh classifier built from the primitives. `corrupt` swaps the
// tanh derivative 1 - y^2 for 1 - y.
class TinyNet : public ad::Objective {
 public:
  TinyNet(Vector x, std::size_t target, bool corrupt) : x_(std::move(x)), target_(target), corrupt_(corrupt) {}

  double loss(const ParamSet& p) const override {
    const Vector h = tanh_map(linear_map(p[0].value, x_));
    return ad::softmax_cross_entropy(linear_map(p[1].value, h), target_);
  }

  double loss_and_gradient(const ParamSet& p, ParamSet& g) const override {
    const Vector h = tanh_map(linear_map(p[0].value, x_));
    const Vector logits = linear_map(p[1].value, h);
    const Vector dlogits = ad::softmax_cross_entropy_vjp(logits, target_);
    Vector dh(h.size(), 0.0);
    ad::linear_map_vjp(p[1].value, h, dlogits, &g[1].value, dh);
    Vector dpre;
    if (corrupt_) {
      dpre.resize(h.size());
      for (std::size_t i = 0; i < h.size(); ++i) dpre[i] = (1.0 - h[i]) * dh[i];
    } else {
      dpre = ad::tanh_vjp(h, dh);
    }
    ad::linear_map_vjp(p[0].value, x_, dpre, &g[0].value, {});
    return ad::softmax_cross_entropy(logits, target_);
  }

 private:
  Vector x_;
  std::size_t target_;
  bool corrupt_;
};

ParamSet tiny_params(Rng& rng) {
  return {{"w1", random_tensor({5, 4}, rng)}, {"w2", random_tensor({4, 3}, rng)}};
}

}  // namespace

TEST_CASE("every primitive matches finite differences in isolation") {
  Rng rng(2024);
  const std::vector<ad::DifferentiablePrimitive> prims{
      ad::linear_map_primitive(5, 3),     ad::mode_n_product_primitive(3, 4, 5, 1),
      ad::mode_n_product_primitive(3, 4, 5, 2), ad::mode_n_product_primitive(3, 4, 5, 3),
      ad::softmax_primitive(6),           ad::tanh_primitive(7),
      ad::concat_primitive(3, 4),         ad::weighted_sum_primitive(5, 3),
      ad::cross_entropy_primitive(5, 2)};
  for (const auto& prim : prims) {
    for (int trial = 0; trial < 5; ++trial) {
      const double err = ad::check_primitive(prim, rng, 1e-6);
      INFO(prim.name);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("primitive backward is linear in the cotangent and shaped like the inputs") {
  Rng rng(77);
  const std::vector<ad::DifferentiablePrimitive> prims{
      ad::linear_map_primitive(4, 3), ad::mode_n_product_primitive(2, 3, 4, 2), ad::softmax_primitive(5),
      ad::tanh_primitive(4), ad::weighted_sum_primitive(3, 2)};
  for (const auto& prim : prims) {
    std::vector<Vector> x;
    for (std::size_t n : prim.input_sizes) {
      Vector v(n);
      for (double& e : v) e = rng.uniform(-1.0, 1.0);
      x.push_back(v);
    }
    Vector u1(prim.output_size), u2(prim.output_size), mix(prim.output_size);
    const double a = 0.7, b = -1.3;
    for (std::size_t i = 0; i < prim.output_size; ++i) {
      u1[i] = rng.uniform(-1.0, 1.0);
      u2[i] = rng.uniform(-1.0, 1.0);
      mix[i] = a * u1[i] + b * u2[i];
    }
    const auto g1 = prim.backward(x, u1);
    const auto g2 = prim.backward(x, u2);
    const auto gm = prim.backward(x, mix);
    REQUIRE(gm.size() == x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      REQUIRE(gm[k].size() == x[k].size());
      for (std::size_t i = 0; i < x[k].size(); ++i) CHECK(std::abs(gm[k][i] - (a * g1[k][i] + b * g2[k][i])) < 1e-12);
    }
  }
}

TEST_CASE("cross entropy rejects an out-of-range target") {
  CHECK_THROWS_AS(ad::softmax_cross_entropy(std::vector<double>{0, 1}, 2), std::out_of_range);
}

TEST_CASE("forward_backward on a quadratic returns p") {
  Rng rng(1);
  ParamSet p{{"p", random_tensor({6}, rng)}};
  const auto r = ad::forward_backward(Quadratic{}, p);
  CHECK(r.gradients[0].name == "p");
  CHECK(r.gradients[0].value == p[0].value);
}

TEST_CASE("forward_backward leaves unused blocks at exactly zero") {
  Rng rng(3);
  ParamSet p{{"p", random_tensor({4}, rng)}, {"unused", random_tensor({3, 2}, rng)}};
  const auto r = ad::forward_backward(Quadratic{}, p);
  for (double g : r.gradients[1].value.data()) CHECK(g == 0.0);
}

TEST_CASE("finite differences of closed forms") {
  ParamSet p{{"p", tensor_create({1}, {0.37})}};
  const auto lin = ad::finite_difference_gradient([](const ParamSet& s) { return 3.0 * s[0].value(0); }, p, 1e-3);
  CHECK(std::abs(lin[0].value(0) - 3.0) < 1e-12);

  ParamSet two{{"p", tensor_create({1}, {2.0})}};
  const auto sq = ad::finite_difference_gradient(
      [](const ParamSet& s) { return s[0].value(0) * s[0].value(0); }, two, 1e-5);
  CHECK(std::abs(sq[0].value(0) - 4.0) < 1e-9);
}

TEST_CASE("relative error definition") {
  CHECK(ad::relative_error(1.0, 1.0) == 0.0);
  CHECK(ad::relative_error(0.0, 0.0) == 0.0);
  CHECK(ad::relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(ad::relative_error(1e-12, 0.0) == doctest::Approx(1e-4));
}

TEST_CASE("gradient check passes a correct composition and flags a corrupted backward") {
  Rng rng(8);
  const ParamSet p = tiny_params(rng);
  const Vector x{0.3, -0.8, 0.5, 1.1, -0.2};

  const auto good = ad::gradient_check(TinyNet(x, 1, false), p);
  CHECK(good.pass);
  CHECK(good.max_rel_error < 1e-6);
  CHECK(good.tensors.size() == 2);

  const auto bad = ad::gradient_check(TinyNet(x, 1, true), p);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_rel_error > 1e-2);
}

TEST_CASE("gradient check pass flag follows the tolerance") {
  Rng rng(8);
  const ParamSet p = tiny_params(rng);
  const Vector x{0.3, -0.8, 0.5, 1.1, -0.2};
  ad::GradientCheckOptions opt;
  const auto base = ad::gradient_check(TinyNet(x, 0, false), p, opt);
  opt.tol = base.max_rel_error * 0.5;
  const auto strict = ad::gradient_check(TinyNet(x, 0, false), p, opt);
  CHECK(strict.max_rel_error == base.max_rel_error);
  CHECK_FALSE(strict.pass);
}

TEST_CASE("gradient check samples large tensors") {
  Rng rng(4);
  ParamSet p{{"big", random_tensor({80, 80}, rng)}};
  const auto r = ad::gradient_check(Quadratic{}, p);
  CHECK(r.pass);
  CHECK(r.tensors[0].entries_checked == 256);
}

TEST_CASE("gradient check of the model at the small configuration") {
  ModelConfig cfg;
  cfg.n_q = 12;
  cfg.n_v = 16;
  cfg.grid = 9;
  cfg.objects = 4;
  cfg.t_q = 8;
  cfg.t_v = 8;
  cfg.t_rho = 10;
  cfg.glimpses = 1;
  cfg.n_answers = 5;
  for (Variant v : {Variant::IO, Variant::I, Variant::O}) {
    cfg.variant = v;
    cfg.seed = 31;
    const RafModel m = init_model(cfg);
    const auto r = gradient_check(m, random_example(cfg, 32));
    INFO(variant_name(v));
    CHECK(r.diagnostic.empty());
    CHECK(r.pass);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient check with a zero final classifier") {
  const ModelConfig cfg = model_config(preset_by_name("desk"), Variant::IO, 5);
  RafModel m = init_model(cfg);
  for (double& x : m.final_fusion.output_proj.data()) x = 0.0;
  const auto r = gradient_check(m, random_example(cfg, 6));
  CHECK(r.pass);
}

TEST_CASE("gradient check reports a failing objective instead of throwing") {
  class Throws : public ad::Objective {
   public:
    double loss(const ParamSet&) const override { throw NumericError("boom"); }
    double loss_and_gradient(const ParamSet&, ParamSet&) const override { throw NumericError("boom"); }
  };
  ParamSet p{{"p", Tensor::zeros({2})}};
  const auto r = ad::gradient_check(Throws{}, p);
  CHECK_FALSE(r.pass);
  CHECK(r.diagnostic.find("boom") != std::string::npos);
}
