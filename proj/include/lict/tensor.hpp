#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace lict {

// Dense row-major tensor of doubles. Value semantics; shapes are small
// vectors of extents. A tensor with empty shape is a scalar (numel == 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}
  Tensor(std::vector<long> shape, double fill)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}
  Tensor(std::vector<long> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if ((long)data_.size() != checked_numel(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<long> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }

  long ndim() const { return (long)shape_.size(); }
  long numel() const { return (long)data_.size(); }
  const std::vector<long>& shape() const { return shape_; }
  long extent(long d) const { return shape_.at(d); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](long i) { return data_[i]; }
  double operator[](long i) const { return data_[i]; }

  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return data_[0];
  }

  double& at(long i, long j) { return data_[i * shape_[1] + j]; }
  double at(long i, long j) const { return data_[i * shape_[1] + j]; }
  double& at(long i, long j, long k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  double at(long i, long j, long k) const { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  double& at(long i, long j, long k, long l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(long i, long j, long k, long l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // Same data, new shape (must preserve numel).
  Tensor reshaped(std::vector<long> shape) const {
    Tensor t(std::move(shape), data_);
    return t;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static long checked_numel(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative extent");
      n *= d;
    }
    return n;
  }

  std::vector<long> shape_;
  std::vector<double> data_;
};

inline long numel_of(const std::vector<long>& shape) {
  long n = 1;
  for (long d : shape) n *= d;
  return n;
}

}  // namespace lict
