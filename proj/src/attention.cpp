#include "raf/attention.hpp"

#include "raf/autodiff.hpp"

namespace raf {

namespace {

void check_features(const AttentionBranch& branch, const Tensor& features) {
  if (features.rank() != 2 || features.extent(1) != branch.feature_dim()) {
    throw ShapeError("attention: features " + shape_string(features.shape()) + " vs branch feature dim " +
                     std::to_string(branch.feature_dim()));
  }
}

Tensor logits_from(const std::vector<VisualTrace>& locations, std::size_t glimpses) {
  Tensor logits = Tensor::zeros({glimpses, locations.size()});
  for (std::size_t i = 0; i < locations.size(); ++i)
    for (std::size_t r = 0; r < glimpses; ++r) logits(r, i) = locations[i].rho[r];
  return logits;
}

}  // namespace

Tensor score_locations(const AttentionBranch& branch, std::span<const double> q, const Tensor& features) {
  check_features(branch, features);
  const QuestionEncoding enc = encode_question(branch.fusion, q);
  std::vector<VisualTrace> locs;
  locs.reserve(features.extent(0));
  for (std::size_t i = 0; i < features.extent(0); ++i) locs.push_back(fuse_visual(branch.fusion, enc, features.row(i)));
  return logits_from(locs, branch.glimpses());
}

Tensor normalize_attention(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("normalize_attention: expected [g x L], got " + shape_string(logits.shape()));
  Tensor out = Tensor::zeros(logits.shape());
  for (std::size_t r = 0; r < logits.extent(0); ++r) {
    const Vector w = softmax(logits.row(r));
    std::copy(w.begin(), w.end(), out.row(r).begin());
  }
  return out;
}

Vector attend(const Tensor& weights, const Tensor& features) {
  if (weights.rank() != 2 || features.rank() != 2 || weights.extent(1) != features.extent(0)) {
    throw ShapeError("attend: weights " + shape_string(weights.shape()) + " vs features " +
                     shape_string(features.shape()));
  }
  Vector pooled;
  pooled.reserve(weights.extent(0) * features.extent(1));
  for (std::size_t r = 0; r < weights.extent(0); ++r) {
    const Vector glimpse = ad::weighted_sum(weights.row(r), features);
    pooled.insert(pooled.end(), glimpse.begin(), glimpse.end());
  }
  return pooled;
}

AttentionResult run_attention(const AttentionBranch& branch, std::span<const double> q, const Tensor& features) {
  AttentionTrace tr = attention_forward(branch, q, features);
  return {std::move(tr.weights), std::move(tr.pooled)};
}

AttentionTrace attention_forward(const AttentionBranch& branch, std::span<const double> q, const Tensor& features) {
  check_features(branch, features);
  AttentionTrace tr;
  tr.question = encode_question(branch.fusion, q);
  tr.locations.reserve(features.extent(0));
  for (std::size_t i = 0; i < features.extent(0); ++i) {
    tr.locations.push_back(fuse_visual(branch.fusion, tr.question, features.row(i)));
  }
  tr.weights = normalize_attention(logits_from(tr.locations, branch.glimpses()));
  tr.pooled = attend(tr.weights, features);
  return tr;
}

void attention_backward(const AttentionBranch& branch, std::span<const double> q, const Tensor& features,
                        const AttentionTrace& tr, std::span<const double> d_pooled, TuckerFusionParams& grads) {
  const std::size_t g = branch.glimpses();
  const std::size_t L = features.extent(0);
  const std::size_t width = features.extent(1);
  if (d_pooled.size() != g * width) throw ShapeError("attention_backward: cotangent length mismatch");

  // d_logits[r][i], transposed into per-location d_rho below
  Tensor d_logits = Tensor::zeros({g, L});
  for (std::size_t r = 0; r < g; ++r) {
    Vector d_weights(L, 0.0);
    ad::weighted_sum_vjp(tr.weights.row(r), features, d_pooled.subspan(r * width, width), d_weights, nullptr);
    const Vector dl = ad::softmax_vjp(tr.weights.row(r), d_weights);
    std::copy(dl.begin(), dl.end(), d_logits.row(r).begin());
  }

  Tensor d_q_core = Tensor::zeros_like(tr.question.q_core);
  Vector d_rho(g);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t r = 0; r < g; ++r) d_rho[r] = d_logits(r, i);
    fuse_visual_backward(branch.fusion, tr.question, features.row(i), tr.locations[i], d_rho, grads, d_q_core, {});
  }
  encode_question_backward(branch.fusion, tr.question, q, d_q_core, grads);
}

}  // namespace raf
