#include "raf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace raf {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor rank must be at least 1");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    n *= e;
  }
  return n;
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = checked_product(shape_);
  if (n != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " needs " + std::to_string(n) +
                     " entries, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = checked_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for tensor " + shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw ShapeError("index arity " + std::to_string(idx.size()) + " for tensor " + shape_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for tensor " + shape_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

std::span<const double> Tensor::row(std::size_t r) const {
  if (rank() != 2 || r >= shape_[0]) throw ShapeError("row access on tensor " + shape_string(shape_));
  return std::span<const double>(data_).subspan(r * shape_[1], shape_[1]);
}

std::span<double> Tensor::row(std::size_t r) {
  if (rank() != 2 || r >= shape_[0]) throw ShapeError("row access on tensor " + shape_string(shape_));
  return std::span<double>(data_).subspan(r * shape_[1], shape_[1]);
}

Tensor mode_n_vector_product(const Tensor& t, std::span<const double> v, int mode) {
  if (t.rank() != 3) throw ShapeError("mode-n vector product needs a rank-3 tensor, got " + shape_string(t.shape()));
  if (mode < 1 || mode > 3) throw ShapeError("mode must be 1, 2 or 3");
  const std::size_t axis = static_cast<std::size_t>(mode - 1);
  if (v.size() != t.extent(axis)) {
    throw ShapeError("mode-" + std::to_string(mode) + " product: vector length " + std::to_string(v.size()) +
                     " vs extent " + std::to_string(t.extent(axis)));
  }
  const std::size_t d0 = t.extent(0), d1 = t.extent(1), d2 = t.extent(2);
  const auto src = t.data();
  std::vector<double> out;
  std::vector<std::size_t> shape;
  switch (mode) {
    case 1:
      shape = {d1, d2};
      out.assign(d1 * d2, 0.0);
      for (std::size_t i = 0; i < d0; ++i) {
        const double w = v[i];
        const double* slab = src.data() + i * d1 * d2;
        for (std::size_t jk = 0; jk < d1 * d2; ++jk) out[jk] += w * slab[jk];
      }
      break;
    case 2:
      shape = {d0, d2};
      out.assign(d0 * d2, 0.0);
      for (std::size_t i = 0; i < d0; ++i)
        for (std::size_t j = 0; j < d1; ++j) {
          const double w = v[j];
          const double* fiber = src.data() + (i * d1 + j) * d2;
          for (std::size_t k = 0; k < d2; ++k) out[i * d2 + k] += w * fiber[k];
        }
      break;
    default:
      shape = {d0, d1};
      out.assign(d0 * d1, 0.0);
      for (std::size_t ij = 0; ij < d0 * d1; ++ij) {
        const double* fiber = src.data() + ij * d2;
        double acc = 0.0;
        for (std::size_t k = 0; k < d2; ++k) acc += v[k] * fiber[k];
        out[ij] = acc;
      }
      break;
  }
  return Tensor(std::move(shape), std::move(out));
}

Vector linear_map(const Tensor& m, std::span<const double> x) {
  if (m.rank() != 2) throw ShapeError("linear_map needs a matrix, got " + shape_string(m.shape()));
  const std::size_t d_in = m.extent(0), d_out = m.extent(1);
  if (x.size() != d_in) {
    throw ShapeError("linear_map: input length " + std::to_string(x.size()) + " vs matrix " +
                     shape_string(m.shape()));
  }
  Vector out(d_out, 0.0);
  const auto w = m.data();
  for (std::size_t i = 0; i < d_in; ++i) {
    const double xi = x[i];
    const double* row = w.data() + i * d_out;
    for (std::size_t j = 0; j < d_out; ++j) out[j] += xi * row[j];
  }
  return out;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  if (!all_finite(logits)) throw NumericError("softmax: non-finite logit");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

Vector tanh_map(std::span<const double> x) {
  if (!all_finite(x)) throw NumericError("tanh_map: non-finite input");
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double a) { return std::tanh(a); });
  return out;
}

Vector concat_vectors(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool all_finite(std::span<const double> x) noexcept {
  return std::all_of(x.begin(), x.end(), [](double a) { return std::isfinite(a); });
}

}  // namespace raf
