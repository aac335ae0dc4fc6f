#include "raf/presets.hpp"

#include <array>
#include <stdexcept>

#include "raf/rng.hpp"

namespace raf {

const Preset& preset_by_name(std::string_view name) {
  static const std::array<Preset, 2> presets{{
      {"desk", 24, 20, 16, 8, 8, 8, 10, 1, 4},
      {"paper", 2400, 2048, 196, 36, 310, 310, 510, 1, 2000},
  }};
  for (const auto& p : presets)
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

ModelConfig model_config(const Preset& p, Variant variant, std::uint64_t seed) {
  ModelConfig c;
  c.n_q = p.n_q;
  c.n_v = p.n_v;
  c.grid = p.grid;
  c.objects = p.objects;
  c.t_q = p.t_q;
  c.t_v = p.t_v;
  c.t_rho = p.t_rho;
  c.glimpses = p.glimpses;
  c.n_answers = p.k;
  c.variant = variant;
  c.seed = seed;
  return c;
}

SynthSpec synth_spec(const Preset& p, SynthTask task, std::size_t count, double sigma, std::uint64_t seed) {
  SynthSpec s;
  s.task = task;
  s.count = count;
  s.k = p.k;
  s.n_q = p.n_q;
  s.n_v = p.n_v;
  s.grid = p.grid;
  s.objects = p.objects;
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

Example random_example(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Example ex;
  ex.qid = "gradcheck";
  ex.q.resize(cfg.n_q);
  for (double& x : ex.q) x = rng.normal();
  ex.grid = Tensor::zeros({cfg.grid, cfg.n_v});
  for (double& x : ex.grid.data()) x = rng.normal();
  ex.objects = Tensor::zeros({cfg.objects, cfg.n_v});
  for (double& x : ex.objects.data()) x = rng.normal();
  ex.answer = rng.below(cfg.n_answers);
  return ex;
}

}  // namespace raf
