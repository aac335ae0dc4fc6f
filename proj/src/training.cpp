#include "raf/training.hpp"

#include <cmath>
#include <numeric>
#include <thread>
#include <utility>

#include "raf/rng.hpp"

namespace raf {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (batch == 0) throw std::invalid_argument("batch size must be >= 1");
  if (threads == 0) throw std::invalid_argument("thread count must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw std::invalid_argument("Adam hyperparameters out of range");
  }
}

AdamState make_adam_state(std::span<const Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.first_moment.push_back(Tensor::zeros_like(*p));
    s.second_moment.push_back(Tensor::zeros_like(*p));
  }
  return s;
}

AdamState make_adam_state(const RafModel& model) {
  const auto ts = model.tensors();
  return make_adam_state(ts);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t]->same_shape(*grads[t]) || !params[t]->same_shape(state.first_moment[t]) ||
        !params[t]->same_shape(state.second_moment[t])) {
      throw ShapeError("adam_step: shape mismatch at tensor " + std::to_string(t));
    }
    if (!all_finite(grads[t]->data())) {
      throw NumericError("adam_step: non-finite gradient in tensor " + std::to_string(t) + ", step skipped");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    const auto g = grads[k]->data();
    auto m = state.first_moment[k].data();
    auto v = state.second_moment[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double cross_entropy_loss(std::span<const double> logits, std::size_t target) {
  return ad::softmax_cross_entropy(logits, target);
}

void check_dataset_matches(const ModelConfig& cfg, const Dataset& data) {
  if (data.n_q != cfg.n_q || data.n_v != cfg.n_v || data.grid != cfg.grid || data.objects != cfg.objects) {
    throw ShapeError("dataset dims (n_q=" + std::to_string(data.n_q) + ", n_v=" + std::to_string(data.n_v) +
                     ", G=" + std::to_string(data.grid) + ", N=" + std::to_string(data.objects) +
                     ") do not match the model config");
  }
  if (data.vocab.size() != cfg.n_answers) {
    throw ShapeError("dataset vocabulary has " + std::to_string(data.vocab.size()) + " answers, model expects " +
                     std::to_string(cfg.n_answers));
  }
}

namespace {

class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed, bool shuffle) : order_(n), rng_(seed), shuffle_(shuffle) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  void skip(std::uint64_t count) {
    for (std::uint64_t i = 0; i < count; ++i) {
      if (pos_ == order_.size()) {
        reshuffle();
        pos_ = 0;
      }
      ++pos_;
    }
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (pos_ == order_.size()) {
        reshuffle();
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    if (shuffle_) rng_.shuffle(std::span<std::size_t>(order_));
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  bool shuffle_;
  std::size_t pos_ = 0;
};

void add_into(RafModel& acc, const RafModel& part) {
  auto dst = acc.tensors();
  const auto src = part.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t) {
    auto d = dst[t]->data();
    const auto s = src[t]->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }
}

/// Sums losses and gradients over `batch`, split across `threads` contiguous slices.
double batch_gradient(const RafModel& model, const Dataset& data, const std::vector<std::size_t>& batch,
                      std::size_t threads, RafModel& grads) {
  const std::size_t workers = std::min(threads, batch.size());
  if (workers <= 1) {
    double total = 0.0;
    for (std::size_t idx : batch) total += example_loss_and_gradient(model, data.examples[idx], grads);
    return total;
  }
  std::vector<RafModel> partial(workers, RafModel::zeros(model.config));
  std::vector<double> losses(workers, 0.0);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t per = (batch.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          const std::size_t lo = w * per, hi = std::min(batch.size(), lo + per);
          for (std::size_t b = lo; b < hi; ++b)
            losses[w] += example_loss_and_gradient(model, data.examples[batch[b]], partial[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  double total = 0.0;
  for (std::size_t w = 0; w < workers; ++w) {
    add_into(grads, partial[w]);
    total += losses[w];
  }
  return total;
}

}  // namespace

TrainResult train(RafModel model, const Dataset& data, const TrainConfig& cfg, std::optional<AdamState> resume,
                  const TrainLogger& logger) {
  cfg.validate();
  model.validate();
  check_dataset_matches(model.config, data);
  if (cfg.steps > 0 && data.size() == 0) throw std::invalid_argument("cannot train on an empty dataset");

  TrainResult result;
  result.adam = resume ? std::move(*resume) : make_adam_state(model);
  BatchSampler sampler(data.size(), cfg.seed, cfg.shuffle);
  // A resumed run continues the batch sequence where the saved one stopped.
  if (data.size() > 0) sampler.skip(result.adam.step * cfg.batch);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
  double interval_sum = 0.0;
  std::size_t interval_n = 0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto batch = sampler.next(cfg.batch);
    RafModel grads = RafModel::zeros(model.config);
    double loss = 0.0;
    try {
      loss = batch_gradient(model, data, batch, cfg.threads, grads) * inv_batch;
      if (!std::isfinite(loss)) throw NumericError("non-finite batch loss");
      for (Tensor* g : grads.tensors())
        for (double& x : g->data()) x *= inv_batch;
      auto params = model.tensors();
      const auto gs = std::as_const(grads).tensors();
      adam_step(params, gs, result.adam, cfg);
    } catch (const NumericError& e) {
      result.stopped_early = true;
      result.diagnostic = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    result.step_losses.push_back(loss);
    interval_sum += loss;
    ++interval_n;
    if (cfg.log_every > 0 && interval_n == cfg.log_every) {
      result.interval_losses.push_back(interval_sum / static_cast<double>(interval_n));
      if (logger) logger(step + 1, result.interval_losses.back());
      interval_sum = 0.0;
      interval_n = 0;
    }
  }
  if (interval_n > 0) {
    result.interval_losses.push_back(interval_sum / static_cast<double>(interval_n));
    if (logger) logger(result.step_losses.size(), result.interval_losses.back());
  }
  result.model = std::move(model);
  return result;
}

}  // namespace raf
