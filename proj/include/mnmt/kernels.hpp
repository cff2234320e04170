#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mnmt/tensor.hpp"

namespace mnmt {

// ---- dense helpers; all accumulate into their output ----

/// y += W x
void gemv_acc(const Tensor& w, std::span<const double> x, std::span<double> y);
/// dx += W^T dy
void gemv_t_acc(const Tensor& w, std::span<const double> dy, std::span<double> dx);
/// dW += dy x^T
void outer_acc(Tensor& dw, std::span<const double> dy, std::span<const double> x);
/// y += a x
void axpy(double a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);

Vec concat(std::span<const double> a, std::span<const double> b);

double sigmoid(double x);

// ---- softmax ----

/// Max-subtracted softmax. Masked entries (mask == 0) come out exactly 0.
/// Throws NumericError when every entry is masked.
Vec softmax(std::span<const double> logits,
            std::optional<std::span<const std::uint8_t>> mask = std::nullopt);

/// Gradient w.r.t. logits given p = softmax(logits) and dL/dp.
Vec softmax_backward(std::span<const double> p, std::span<const double> dp);

// ---- maxout, pool size 2 ----

struct MaxoutResult {
  Vec output;
  std::vector<std::size_t> argmax;  // index into the input of each winner
};

/// output[i] = max(in[2i], in[2i+1]); ties pick the first element.
MaxoutResult maxout(std::span<const double> input);
/// Routes each output gradient to the winning input element.
Vec maxout_backward(const MaxoutResult& forward, std::span<const double> d_output,
                    std::size_t input_dim);

// ---- GRU ----
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wh x + Uh (r * h) + bh)
//   h' = (1 - z) * h + z * h~

struct GruWeights {
  const Tensor* wz;
  const Tensor* uz;
  const Tensor* bz;
  const Tensor* wr;
  const Tensor* ur;
  const Tensor* br;
  const Tensor* wh;
  const Tensor* uh;
  const Tensor* bh;

  std::size_t input_dim() const { return wz->cols(); }
  std::size_t hidden_dim() const { return wz->rows(); }

  /// Looks up `<prefix>.Wz` ... `<prefix>.bh` and checks their shapes.
  static GruWeights bind(const ParamSet& params, std::string_view prefix);
};

struct GruGrads {
  Tensor* wz;
  Tensor* uz;
  Tensor* bz;
  Tensor* wr;
  Tensor* ur;
  Tensor* br;
  Tensor* wh;
  Tensor* uh;
  Tensor* bh;

  static GruGrads bind(TensorMap& grads, std::string_view prefix);
};

/// Names of the nine GRU tensors under `prefix`.
std::vector<std::string> gru_param_names(std::string_view prefix);


struct GruCache {
  Vec x;
  Vec h_prev;
  Vec z;
  Vec r;
  Vec candidate;
  Vec h;
};

Vec gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h_prev,
                GruCache* cache = nullptr);

/// Backprop through one step given dL/dh'. Accumulates parameter gradients
/// into `g` and input gradients into `dx` and `dh_prev`.
void gru_backward(const GruWeights& w, const GruCache& cache, std::span<const double> dh,
                  GruGrads& g, std::span<double> dx, std::span<double> dh_prev);

/// One GRU step using the tensors under `prefix` in `params`.
Vec gru_step(std::span<const double> x, std::span<const double> h_prev, const ParamSet& params,
             std::string_view prefix);

}  // namespace mnmt
