#include "raf/data_io.hpp"

#include <algorithm>
#include <cstdio>

#include "raf/rng.hpp"

namespace raf {

SynthTask parse_task(std::string_view text) {
  if (text == "grid") return SynthTask::Grid;
  if (text == "object") return SynthTask::Object;
  if (text == "joint") return SynthTask::Joint;
  throw std::invalid_argument("unknown task '" + std::string(text) + "' (expected grid, object or joint)");
}

std::string_view task_name(SynthTask t) noexcept {
  switch (t) {
    case SynthTask::Grid: return "grid";
    case SynthTask::Object: return "object";
    case SynthTask::Joint: return "joint";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (k == 0 || grid == 0 || objects == 0) throw ShapeError("synthetic spec: K, G and N must be >= 1");
  if (n_q < grid + objects) {
    throw ShapeError("synthetic spec: n_q (" + std::to_string(n_q) + ") must be >= G + N (" +
                     std::to_string(grid + objects) + ")");
  }
  if (n_v < k + std::max(grid, objects)) {
    throw ShapeError("synthetic spec: n_v (" + std::to_string(n_v) + ") must be >= K + max(G, N) (" +
                     std::to_string(k + std::max(grid, objects)) + ")");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("synthetic spec: sigma must be >= 0");
}

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Dataset data;
  data.n_q = spec.n_q;
  data.n_v = spec.n_v;
  data.grid = spec.grid;
  data.objects = spec.objects;
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < spec.k; ++c) labels.push_back("class" + std::to_string(c));
  data.vocab = AnswerVocab::from_list(std::move(labels));

  const int width = static_cast<int>(std::to_string(spec.count > 0 ? spec.count - 1 : 0).size());
  Rng rng(spec.seed);
  std::vector<std::size_t> cell_codes(spec.grid), object_codes(spec.objects);
  data.examples.reserve(spec.count);
  for (std::size_t n = 0; n < spec.count; ++n) {
    const std::size_t cell = rng.below(spec.grid);
    const std::size_t object = rng.below(spec.objects);
    for (auto& c : cell_codes) c = rng.below(spec.k);
    for (auto& d : object_codes) d = rng.below(spec.k);

    Example ex;
    char qid[32];
    std::snprintf(qid, sizeof qid, "%0*zu", width, n);
    ex.qid = qid;
    ex.q.assign(spec.n_q, 0.0);
    ex.q[cell] = 1.0;
    ex.q[spec.grid + object] = 1.0;
    for (double& x : ex.q) x += spec.sigma * rng.normal();

    ex.grid = Tensor::zeros({spec.grid, spec.n_v});
    for (std::size_t i = 0; i < spec.grid; ++i) {
      ex.grid(i, cell_codes[i]) = 1.0;
      ex.grid(i, spec.k + i) = 1.0;
    }
    for (double& x : ex.grid.data()) x += spec.sigma * rng.normal();

    ex.objects = Tensor::zeros({spec.objects, spec.n_v});
    for (std::size_t j = 0; j < spec.objects; ++j) {
      ex.objects(j, object_codes[j]) = 1.0;
      ex.objects(j, spec.k + j) = 1.0;
    }
    for (double& x : ex.objects.data()) x += spec.sigma * rng.normal();

    switch (spec.task) {
      case SynthTask::Grid: ex.answer = cell_codes[cell]; break;
      case SynthTask::Object: ex.answer = object_codes[object]; break;
      case SynthTask::Joint: ex.answer = (cell_codes[cell] + object_codes[object]) % spec.k; break;
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

std::size_t planted_cell(const Example& ex, std::size_t grid) {
  const auto first = ex.q.begin();
  return static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(grid)) - first);
}

std::size_t planted_object(const Example& ex, std::size_t grid, std::size_t objects) {
  const auto first = ex.q.begin() + static_cast<std::ptrdiff_t>(grid);
  return static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(objects)) - first);
}

}  // namespace raf
