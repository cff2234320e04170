#include "mnmt/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "mnmt/error.hpp"

namespace mnmt {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw DimensionError("tensor of shape " + shape_string(shape_) + " given " +
                         std::to_string(data_.size()) + " values");
  }
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite value in " + what + " at index " + std::to_string(i));
    }
  }
}

void ParamSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  Tensor zeros(value.shape());
  moments_[name] = {zeros, zeros};
  values_.emplace(name, std::move(value));
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

TensorMap ParamSet::zeros_like() const {
  TensorMap out;
  for (const auto& [name, value] : values_) out.emplace(name, Tensor(value.shape()));
  return out;
}

ParamSet::Moments& ParamSet::moments(const std::string& name) {
  auto it = moments_.find(name);
  if (it == moments_.end()) throw Error("unknown parameter '" + name + "'");
  auto& value = get(name);
  if (!it->second.first.same_shape(value)) {
    it->second = {Tensor(value.shape()), Tensor(value.shape())};
  }
  return it->second;
}

std::uint64_t param_checksum(const ParamSet& params) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, value] : params.values()) {
    mix(name.data(), name.size());
    for (auto d : value.shape()) {
      const auto d64 = static_cast<std::uint64_t>(d);
      mix(&d64, sizeof d64);
    }
    mix(value.data(), value.size() * sizeof(double));
  }
  return hash;
}

}  // namespace mnmt
