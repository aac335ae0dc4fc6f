#include "raf/raf_model.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "raf/reference.hpp"

namespace raf {

namespace {

template <class F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(stage) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + ": " + e.what());
  }
}

void append_fusion(std::vector<Tensor*>& out, TuckerFusionParams& p) {
  out.insert(out.end(), {&p.question_proj, &p.visual_proj, &p.core, &p.output_proj});
}

void append_fusion(std::vector<const Tensor*>& out, const TuckerFusionParams& p) {
  out.insert(out.end(), {&p.question_proj, &p.visual_proj, &p.core, &p.output_proj});
}

std::vector<std::string> parameter_names(const RafModel& m) {
  std::vector<std::string> names;
  auto add = [&](const std::string& prefix) {
    for (const char* leaf : {"question_proj", "visual_proj", "core", "output_proj"}) names.push_back(prefix + leaf);
  };
  if (m.image_branch) add("image.");
  if (m.object_branch) add("object.");
  add("final.");
  return names;
}

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::IO: return "io";
    case Variant::I: return "i";
    case Variant::O: return "o";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "io") return Variant::IO;
  if (s == "i") return Variant::I;
  if (s == "o") return Variant::O;
  throw std::invalid_argument("unknown variant '" + std::string(text) + "' (expected io, i or o)");
}

void ModelConfig::validate() const {
  if (n_q == 0 || n_v == 0 || grid == 0 || objects == 0 || t_q == 0 || t_v == 0 || t_rho == 0 || glimpses == 0 ||
      n_answers == 0) {
    throw ShapeError("model config: every dimension must be >= 1");
  }
  if (static_cast<std::uint8_t>(variant) > 2) throw ShapeError("model config: unknown variant");
}

FusionDims ModelConfig::branch_fusion_dims() const { return {n_q, n_v, t_q, t_v, t_rho, glimpses}; }

FusionDims ModelConfig::final_fusion_dims() const {
  const std::size_t slots = branches() * glimpses;
  return {n_q, slots * n_v, t_q, slots * t_v, t_rho, n_answers};
}

bool ModelConfig::same_architecture(const ModelConfig& o) const noexcept {
  return n_q == o.n_q && n_v == o.n_v && grid == o.grid && objects == o.objects && t_q == o.t_q && t_v == o.t_v &&
         t_rho == o.t_rho && glimpses == o.glimpses && n_answers == o.n_answers && variant == o.variant;
}

RafModel RafModel::zeros(const ModelConfig& cfg) {
  cfg.validate();
  RafModel m;
  m.config = cfg;
  if (cfg.uses_grid()) m.image_branch = AttentionBranch{TuckerFusionParams::zeros(cfg.branch_fusion_dims())};
  if (cfg.uses_objects()) m.object_branch = AttentionBranch{TuckerFusionParams::zeros(cfg.branch_fusion_dims())};
  m.final_fusion = TuckerFusionParams::zeros(cfg.final_fusion_dims());
  return m;
}

void RafModel::validate() const {
  config.validate();
  if (image_branch.has_value() != config.uses_grid() || object_branch.has_value() != config.uses_objects()) {
    throw ShapeError("model branches do not match variant " + std::string(variant_name(config.variant)));
  }
  auto check = [](const TuckerFusionParams& p, const FusionDims& want, const char* what) {
    if (!(p.dims == want)) throw ShapeError(std::string(what) + ": dims do not match the model config");
    in_stage(what, [&] {
      p.validate();
      return 0;
    });
  };
  if (image_branch) check(image_branch->fusion, config.branch_fusion_dims(), "image branch");
  if (object_branch) check(object_branch->fusion, config.branch_fusion_dims(), "object branch");
  check(final_fusion, config.final_fusion_dims(), "final fusion");
}

std::vector<Tensor*> RafModel::tensors() {
  std::vector<Tensor*> out;
  if (image_branch) append_fusion(out, image_branch->fusion);
  if (object_branch) append_fusion(out, object_branch->fusion);
  append_fusion(out, final_fusion);
  return out;
}

std::vector<const Tensor*> RafModel::tensors() const {
  std::vector<const Tensor*> out;
  if (image_branch) append_fusion(out, image_branch->fusion);
  if (object_branch) append_fusion(out, object_branch->fusion);
  append_fusion(out, final_fusion);
  return out;
}

ad::ParamSet RafModel::parameters() const {
  const auto names = parameter_names(*this);
  const auto ts = tensors();
  ad::ParamSet out;
  out.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out.push_back({names[i], *ts[i]});
  return out;
}

void RafModel::assign(const ad::ParamSet& params) {
  const auto names = parameter_names(*this);
  auto ts = tensors();
  if (params.size() != ts.size()) throw ShapeError("assign: parameter count mismatch");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (params[i].name != names[i] || !params[i].value.same_shape(*ts[i])) {
      throw ShapeError("assign: parameter '" + params[i].name + "' does not match '" + names[i] + "'");
    }
    *ts[i] = params[i].value;
  }
}

std::uint64_t RafModel::parameter_count() const {
  std::uint64_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

RafModel init_model(const ModelConfig& cfg) {
  cfg.validate();
  RafModel m;
  m.config = cfg;
  if (cfg.uses_grid()) m.image_branch = AttentionBranch{init_params(cfg.branch_fusion_dims(), cfg.seed)};
  if (cfg.uses_objects()) m.object_branch = AttentionBranch{init_params(cfg.branch_fusion_dims(), cfg.seed + 1)};
  m.final_fusion = init_params(cfg.final_fusion_dims(), cfg.seed + 2);
  return m;
}

// ---------------------------------------------------------------------------

namespace {

struct ModelTrace {
  std::optional<AttentionTrace> image;
  std::optional<AttentionTrace> object;
  Vector embedding;
  QuestionEncoding question;
  VisualTrace head;
};

void check_visual(const RafModel& m, const Tensor* grid, const Tensor* objects) {
  const auto& c = m.config;
  if (c.uses_grid()) {
    if (!grid) throw ShapeError("image branch: grid features required by variant " + std::string(variant_name(c.variant)));
    if (grid->shape() != std::vector<std::size_t>{c.grid, c.n_v}) {
      throw ShapeError("image branch: grid features " + shape_string(grid->shape()) + ", expected " +
                       shape_string({c.grid, c.n_v}));
    }
  } else if (grid) {
    throw std::invalid_argument("grid features supplied but variant o has no image branch");
  }
  if (c.uses_objects()) {
    if (!objects) {
      throw ShapeError("object branch: object features required by variant " + std::string(variant_name(c.variant)));
    }
    if (objects->shape() != std::vector<std::size_t>{c.objects, c.n_v}) {
      throw ShapeError("object branch: object features " + shape_string(objects->shape()) + ", expected " +
                       shape_string({c.objects, c.n_v}));
    }
  } else if (objects) {
    throw std::invalid_argument("object features supplied but variant i has no object branch");
  }
}

ModelTrace trace_forward(const RafModel& m, std::span<const double> q, const Tensor* grid, const Tensor* objects) {
  if (q.size() != m.config.n_q) {
    throw ShapeError("question: length " + std::to_string(q.size()) + ", expected " + std::to_string(m.config.n_q));
  }
  check_visual(m, grid, objects);
  ModelTrace tr;
  if (m.image_branch) {
    tr.image = in_stage("image branch", [&] { return attention_forward(*m.image_branch, q, *grid); });
    tr.embedding.insert(tr.embedding.end(), tr.image->pooled.begin(), tr.image->pooled.end());
  }
  if (m.object_branch) {
    tr.object = in_stage("object branch", [&] { return attention_forward(*m.object_branch, q, *objects); });
    tr.embedding = concat_vectors(tr.embedding, tr.object->pooled);
  }
  in_stage("final fusion", [&] {
    tr.question = encode_question(m.final_fusion, q);
    tr.head = fuse_visual(m.final_fusion, tr.question, tr.embedding);
    return 0;
  });
  return tr;
}

const Tensor* grid_of(const RafModel& m, const Example& ex) { return m.config.uses_grid() ? &ex.grid : nullptr; }
const Tensor* objects_of(const RafModel& m, const Example& ex) {
  return m.config.uses_objects() ? &ex.objects : nullptr;
}

}  // namespace

ForwardOutput forward(const RafModel& model, std::span<const double> q, const Tensor* grid, const Tensor* objects) {
  ModelTrace tr = trace_forward(model, q, grid, objects);
  ForwardOutput out;
  out.logits = std::move(tr.head.rho);
  if (tr.image) out.image_attention = std::move(tr.image->weights);
  if (tr.object) out.object_attention = std::move(tr.object->weights);
  out.embedding = std::move(tr.embedding);
  return out;
}

ForwardOutput forward(const RafModel& model, const Example& ex) {
  return forward(model, ex.q, grid_of(model, ex), objects_of(model, ex));
}

Vector variant_forward(const RafModel& model, std::span<const double> q, const Tensor* grid, const Tensor* objects) {
  return forward(model, q, grid, objects).logits;
}

std::size_t argmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

std::size_t predict(const RafModel& model, const Example& example) { return argmax(forward(model, example).logits); }

double example_loss(const RafModel& model, const Example& ex) {
  const ForwardOutput out = forward(model, ex);
  return in_stage("loss", [&] { return ad::softmax_cross_entropy(out.logits, ex.answer); });
}

double example_loss_and_gradient(const RafModel& model, const Example& ex, RafModel& grads) {
  const ModelTrace tr = trace_forward(model, ex.q, grid_of(model, ex), objects_of(model, ex));
  const double loss = in_stage("loss", [&] { return ad::softmax_cross_entropy(tr.head.rho, ex.answer); });
  const Vector d_logits = ad::softmax_cross_entropy_vjp(tr.head.rho, ex.answer);

  Vector d_embedding(tr.embedding.size(), 0.0);
  Tensor d_q_core = Tensor::zeros_like(tr.question.q_core);
  fuse_visual_backward(model.final_fusion, tr.question, tr.embedding, tr.head, d_logits, grads.final_fusion, d_q_core,
                       d_embedding);
  encode_question_backward(model.final_fusion, tr.question, ex.q, d_q_core, grads.final_fusion);

  const std::size_t image_len = tr.image ? tr.image->pooled.size() : 0;
  const std::span<const double> d_emb(d_embedding);
  if (tr.image) {
    attention_backward(*model.image_branch, ex.q, ex.grid, *tr.image, d_emb.subspan(0, image_len),
                       grads.image_branch->fusion);
  }
  if (tr.object) {
    attention_backward(*model.object_branch, ex.q, ex.objects, *tr.object, d_emb.subspan(image_len),
                       grads.object_branch->fusion);
  }
  return loss;
}

ExampleObjective::ExampleObjective(ModelConfig config, Example example, OraclePrecision precision)
    : config_(config), example_(std::move(example)), precision_(precision) {}

double ExampleObjective::loss(const ad::ParamSet& params) const {
  RafModel m = RafModel::zeros(config_);
  m.assign(params);
  return example_loss(m, example_);
}

double ExampleObjective::loss_and_gradient(const ad::ParamSet& params, ad::ParamSet& grads) const {
  RafModel m = RafModel::zeros(config_);
  m.assign(params);
  RafModel g = RafModel::zeros(config_);
  const double loss = example_loss_and_gradient(m, example_, g);
  grads = g.parameters();
  return loss;
}

long double ExampleObjective::reference_loss(const ad::ParamSet& params) const {
  RafModel m = RafModel::zeros(config_);
  m.assign(params);
  if (precision_ == OraclePrecision::Double) return reference::loss<double>(m, example_);
  return reference::loss<long double>(m, example_);
}

ad::GradientReport gradient_check(const RafModel& model, const Example& example, double h, double tol,
                                  OraclePrecision precision) {
  ad::GradientCheckOptions opt;
  opt.h = h;
  opt.tol = tol;
  opt.sample_seed = model.config.seed;
  return ad::gradient_check(ExampleObjective(model.config, example, precision), model.parameters(), opt);
}

}  // namespace raf
