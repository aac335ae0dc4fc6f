#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "raf/error.hpp"

namespace raf {

using Vector = std::vector<double>;

/// Dense row-major (last index fastest) tensor of doubles.
///
/// Every extent is at least 1 and the rank is at least 1, so a default
/// constructed tensor is the scalar-like shape [1] holding zero.
class Tensor {
 public:
  Tensor();
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor zeros_like(const Tensor& other) { return zeros(other.shape_); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  /// Row `r` of a rank-2 tensor.
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  template <class... I>
  double operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... I>
  double& operator()(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline Tensor tensor_create(std::vector<std::size_t> shape, std::vector<double> data) {
  return Tensor(std::move(shape), std::move(data));
}

std::string shape_string(const std::vector<std::size_t>& shape);

/// Contracts `mode` (1-based: 1, 2 or 3) of a rank-3 tensor with `v`,
/// returning the rank-2 tensor over the two remaining modes in order.
Tensor mode_n_vector_product(const Tensor& t, std::span<const double> v, int mode);

/// out_j = sum_i x_i m_ij for m of shape [d_in x d_out].
Vector linear_map(const Tensor& m, std::span<const double> x);

/// Stable softmax; throws NumericError on non-finite input.
Vector softmax(std::span<const double> logits);

Vector tanh_map(std::span<const double> x);

Vector concat_vectors(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> x) noexcept;

}  // namespace raf
