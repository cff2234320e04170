#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "mnmt/tensor.hpp"

namespace mnmt {

struct AdamOptions {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update in place. `grads` may cover a subset of the
/// parameters; the others are left untouched. The shared step counter is
/// advanced once per call. Throws NumericError naming the first parameter
/// whose gradient is not finite.
void adam_step(ParamSet& params, const TensorMap& grads, const AdamOptions& options);

/// Global L2 norm of all gradients.
double global_norm(const TensorMap& grads);

/// Rescales `grads` so that their global norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(TensorMap& grads, double max_norm);

inline constexpr double kDefaultClipNorm = 5.0;
inline constexpr double kDefaultInitScale = 0.08;

/// Fills every tensor of `params` uniformly in [-scale, scale], visiting
/// tensors in name order.
void init_uniform(ParamSet& params, std::uint64_t seed, double scale);

// ---- finite-difference gradient checking ----

/// Returns the loss at `params`; when `grads` is non-null it also receives the
/// analytic gradient (pre-sized by the caller with zeros_like()).
using LossFn = std::function<double(const ParamSet& params, TensorMap* grads)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t max_entries_per_tensor = 200;
  std::uint64_t seed = 0;
  // Lower bound on |a| + |n|. Central differences carry about 1e-11 of
  // rounding noise; raise this when the loss has near-zero gradient entries.
  double denominator_floor = 1e-8;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares the analytic gradient against central differences on every entry
/// (or a seeded sample per tensor). Relative error is
/// |a - n| / max(denominator_floor, |a| + |n|). Throws NumericError when two evaluations
/// of the loss at the same point differ.
GradCheckResult grad_check(const LossFn& loss_fn, ParamSet params,
                           const GradCheckOptions& options = {});

}  // namespace mnmt
