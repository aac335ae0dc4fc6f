#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raf/data_io.hpp"
#include "raf/raf_model.hpp"

namespace raf {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 32;
  std::size_t steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t log_every = 100;
  /// Worker threads per batch. Each worker sums a contiguous slice of the
  /// batch in example order and the slices are reduced in slice order, so a
  /// run is reproducible for a fixed thread count.
  std::size_t threads = 1;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

AdamState make_adam_state(std::span<const Tensor* const> params);
AdamState make_adam_state(const RafModel& model);

/// Bias-corrected Adam update in place. Validates every gradient first and
/// throws NumericError (leaving params and state untouched) on a non-finite entry.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state,
               const TrainConfig& cfg);

double cross_entropy_loss(std::span<const double> logits, std::size_t target);

struct TrainResult {
  RafModel model;
  AdamState adam;
  std::vector<double> step_losses;      ///< mean batch loss of every completed step
  std::vector<double> interval_losses;  ///< mean of step_losses over each log interval
  bool stopped_early = false;           ///< a non-finite loss or gradient ended the run
  std::string diagnostic;
};

using TrainLogger = std::function<void(std::size_t step, double interval_mean_loss)>;

/// Mini-batch training. Batches are drawn from a seeded permutation of the
/// dataset that is reshuffled each time it is exhausted. On a non-finite
/// loss or gradient the run stops and the model from the last good step is returned.
/// Resuming from the AdamState of an earlier run with the same data, seed and
/// batch size reproduces the uninterrupted run exactly.
TrainResult train(RafModel model, const Dataset& data, const TrainConfig& cfg,
                  std::optional<AdamState> resume = std::nullopt, const TrainLogger& logger = {});

/// Fails unless the dataset dims and vocabulary size match the model config.
void check_dataset_matches(const ModelConfig& cfg, const Dataset& data);

// --- checkpoints ---------------------------------------------------------

struct Checkpoint {
  RafModel model;
  std::optional<AdamState> adam;
};

/// Layout: "RAFC", u32 version = 1, nine u32 dims (n_q, n_v, G, N, t_q, t_v,
/// t_rho, g, n_answers), variant byte (0 = io, 1 = i, 2 = o), u64 init seed, parameter
/// tensors in RafModel::tensors() order as f64, then a flag byte. When the
/// flag is 1 it is followed by the u64 step counter, all first moments and
/// then all second moments in the same tensor order. Little-endian throughout.
void save_checkpoint(const RafModel& model, const AdamState* adam, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above but refuses a checkpoint whose architecture (anything but the seed) differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace raf
