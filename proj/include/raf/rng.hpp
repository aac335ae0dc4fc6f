#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace raf {

/// Seeded generator with a fixed output mapping.
///
/// The engine is std::mt19937_64, whose sequence the standard pins down. The
/// uniform/normal/integer mappings are implemented here rather than via the
/// <random> distributions, whose algorithms differ between standard libraries.
///   uniform01: top 53 bits of one draw, scaled by 2^-53.
///   normal:    Box-Muller on two uniforms, second value cached.
///   below(n):  rejection sampling on the largest multiple of n.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates over the whole span using below().
  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace raf
