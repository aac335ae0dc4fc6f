#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "raf/data_io.hpp"
#include "raf/raf_model.hpp"

namespace raf {

/// A named bundle of model and synthetic-data dimensions.
struct Preset {
  std::string name;
  std::size_t n_q, n_v, grid, objects;
  std::size_t t_q, t_v, t_rho, glimpses;
  std::size_t k;  ///< answer count
};

/// "desk": n_q=24, n_v=20, G=16, N=8, t_q=t_v=8, t_rho=10, g=1, K=4.
/// "paper": n_q=2400, n_v=2048, G=196, N=36, t_q=t_v=310, t_rho=510, g=1, K=2000.
const Preset& preset_by_name(std::string_view name);

ModelConfig model_config(const Preset& p, Variant variant, std::uint64_t seed);
SynthSpec synth_spec(const Preset& p, SynthTask task, std::size_t count, double sigma, std::uint64_t seed);

/// Standard-normal question and features with a random label, for gradient checks.
Example random_example(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace raf
