#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mnmt {

using Vec = std::vector<double>;

/// Dense row-major float64 array. Rank 1 and 2 are all the models need, but
/// shape is kept general for checkpoints.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

using TensorMap = std::map<std::string, Tensor>;

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const std::string& what);

/// Named parameters plus Adam moments. Iteration order is by name.
class ParamSet {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  const TensorMap& values() const { return values_; }
  TensorMap& values() { return values_; }

  /// Zero tensors matching every parameter's shape.
  TensorMap zeros_like() const;

  std::uint64_t step() const { return step_; }

  struct Moments {
    Tensor first;
    Tensor second;
  };
  Moments& moments(const std::string& name);
  void advance_step() { ++step_; }

 private:
  TensorMap values_;
  std::map<std::string, Moments> moments_;
  std::uint64_t step_ = 0;
};

/// FNV-1a over names, shapes and raw float64 bytes of the parameter values.
std::uint64_t param_checksum(const ParamSet& params);

}  // namespace mnmt
