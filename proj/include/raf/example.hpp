#pragma once

#include <cstddef>
#include <string>

#include "raf/tensor.hpp"

namespace raf {

/// One question with its precomputed visual features.
struct Example {
  std::string qid;
  Vector q;             ///< question embedding, length n_q
  Tensor grid;          ///< image-grid features [G x n_v], location-major
  Tensor objects;       ///< object-proposal features [N x n_v]
  std::size_t answer = 0;

  bool operator==(const Example&) const = default;
};

}  // namespace raf
