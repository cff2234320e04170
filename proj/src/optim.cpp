#include "mnmt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mnmt/error.hpp"
#include "mnmt/rng.hpp"

namespace mnmt {

void adam_step(ParamSet& params, const TensorMap& grads, const AdamOptions& options) {
  for (const auto& [name, grad] : grads) {
    if (!params.contains(name)) throw Error("gradient for unknown parameter '" + name + "'");
    if (!grad.same_shape(params.get(name))) {
      throw DimensionError("gradient for '" + name + "' has shape " + shape_string(grad.shape()) +
                           ", parameter has " + shape_string(params.get(name).shape()));
    }
    for (double g : grad.values()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient for parameter '" + name + "'");
    }
  }
  params.advance_step();
  const double t = static_cast<double>(params.step());
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (const auto& [name, grad] : grads) {
    Tensor& value = params.get(name);
    auto& moments = params.moments(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      double& m = moments.first[i];
      double& v = moments.second[i];
      m = options.beta1 * m + (1.0 - options.beta1) * g;
      v = options.beta2 * v + (1.0 - options.beta2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      value[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

double global_norm(const TensorMap& grads) {
  double sum = 0.0;
  for (const auto& [name, grad] : grads) {
    for (double g : grad.values()) sum += g * g;
  }
  return std::sqrt(sum);
}

double clip_global_norm(TensorMap& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, grad] : grads) {
      for (double& g : grad.values()) g *= scale;
    }
  }
  return norm;
}

void init_uniform(ParamSet& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& [name, value] : params.values()) {
    for (double& x : value.values()) x = rng.uniform(-scale, scale);
  }
}

GradCheckResult grad_check(const LossFn& loss_fn, ParamSet params,
                           const GradCheckOptions& options) {
  TensorMap analytic = params.zeros_like();
  const double base = loss_fn(params, &analytic);
  const double again = loss_fn(params, nullptr);
  if (base != again) {
    throw NumericError("loss function is not deterministic (" + std::to_string(base) + " vs " +
                       std::to_string(again) + ")");
  }

  GradCheckResult result;
  Rng rng(options.seed);
  for (auto& [name, value] : params.values()) {
    std::vector<std::size_t> indices(value.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (indices.size() > options.max_entries_per_tensor) {
      rng.shuffle(indices);
      indices.resize(options.max_entries_per_tensor);
      std::sort(indices.begin(), indices.end());
    }
    const Tensor& grad = analytic.at(name);
    for (std::size_t i : indices) {
      const double original = value[i];
      value[i] = original + options.epsilon;
      const double up = loss_fn(params, nullptr);
      value[i] = original - options.epsilon;
      const double down = loss_fn(params, nullptr);
      value[i] = original;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = grad[i];
      const double err = std::abs(a - numeric) / std::max(options.denominator_floor, std::abs(a) + std::abs(numeric));
      ++result.entries_checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        if (err >= result.max_relative_error) {
          result.max_relative_error = err;
          result.worst_parameter = name;
          result.worst_index = i;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace mnmt
