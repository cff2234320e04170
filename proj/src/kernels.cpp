#include "mnmt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnmt/error.hpp"

namespace mnmt {

void gemv_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  if (x.size() != cols || y.size() != rows) {
    throw DimensionError("gemv: matrix " + shape_string(w.shape()) + " with x of " +
                         std::to_string(x.size()) + " and y of " + std::to_string(y.size()));
  }
  const double* a = w.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += row[c] * x[c];
    y[r] += sum;
  }
}

void gemv_t_acc(const Tensor& w, std::span<const double> dy, std::span<double> dx) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  if (dy.size() != rows || dx.size() != cols) {
    throw DimensionError("gemv_t: matrix " + shape_string(w.shape()) + " with dy of " +
                         std::to_string(dy.size()) + " and dx of " + std::to_string(dx.size()));
  }
  const double* a = w.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

void outer_acc(Tensor& dw, std::span<const double> dy, std::span<const double> x) {
  const std::size_t rows = dw.rows();
  const std::size_t cols = dw.cols();
  if (dy.size() != rows || x.size() != cols) {
    throw DimensionError("outer: matrix " + shape_string(dw.shape()) + " with dy of " +
                         std::to_string(dy.size()) + " and x of " + std::to_string(x.size()));
  }
  double* a = dw.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw DimensionError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(std::span<const double> logits, std::optional<std::span<const std::uint8_t>> mask) {
  if (mask && mask->size() != logits.size()) throw DimensionError("softmax: mask size mismatch");
  auto live = [&](std::size_t i) { return !mask || (*mask)[i] != 0; };
  double top = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!live(i)) continue;
    any = true;
    top = std::max(top, logits[i]);
  }
  if (!any) throw NumericError("softmax over an empty or fully masked input");
  require_finite(logits, "softmax logits");
  Vec p(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!live(i)) continue;
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

Vec softmax_backward(std::span<const double> p, std::span<const double> dp) {
  const double inner = dot(p, dp);
  Vec out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (dp[i] - inner);
  return out;
}

MaxoutResult maxout(std::span<const double> input) {
  if (input.size() % 2 != 0) {
    throw DimensionError("maxout needs an even input dimension, got " +
                         std::to_string(input.size()));
  }
  MaxoutResult out;
  const std::size_t n = input.size() / 2;
  out.output.resize(n);
  out.argmax.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = 2 * i;
    const std::size_t winner = input[a + 1] > input[a] ? a + 1 : a;
    out.argmax[i] = winner;
    out.output[i] = input[winner];
  }
  return out;
}

Vec maxout_backward(const MaxoutResult& forward, std::span<const double> d_output,
                    std::size_t input_dim) {
  Vec d_input(input_dim, 0.0);
  for (std::size_t i = 0; i < d_output.size(); ++i) d_input[forward.argmax[i]] += d_output[i];
  return d_input;
}

std::vector<std::string> gru_param_names(std::string_view prefix) {
  std::vector<std::string> names;
  for (const char* suffix : {"Wz", "Uz", "bz", "Wr", "Ur", "br", "Wh", "Uh", "bh"}) {
    names.push_back(std::string(prefix) + "." + suffix);
  }
  return names;
}

GruWeights GruWeights::bind(const ParamSet& params, std::string_view prefix) {
  const auto names = gru_param_names(prefix);
  GruWeights w{&params.get(names[0]), &params.get(names[1]), &params.get(names[2]),
               &params.get(names[3]), &params.get(names[4]), &params.get(names[5]),
               &params.get(names[6]), &params.get(names[7]), &params.get(names[8])};
  const std::size_t h = w.hidden_dim();
  const std::size_t x = w.input_dim();
  for (const Tensor* t : {w.wz, w.wr, w.wh}) {
    if (t->rows() != h || t->cols() != x) throw DimensionError(std::string(prefix) + ": input weights disagree");
  }
  for (const Tensor* t : {w.uz, w.ur, w.uh}) {
    if (t->rows() != h || t->cols() != h) throw DimensionError(std::string(prefix) + ": recurrent weights must be square");
  }
  for (const Tensor* t : {w.bz, w.br, w.bh}) {
    if (t->size() != h) throw DimensionError(std::string(prefix) + ": bias size mismatch");
  }
  return w;
}

GruGrads GruGrads::bind(TensorMap& grads, std::string_view prefix) {
  const auto names = gru_param_names(prefix);
  auto get = [&](const std::string& name) {
    auto it = grads.find(name);
    if (it == grads.end()) throw Error("missing gradient slot '" + name + "'");
    return &it->second;
  };
  return {get(names[0]), get(names[1]), get(names[2]), get(names[3]), get(names[4]),
          get(names[5]), get(names[6]), get(names[7]), get(names[8])};
}

Vec gru_forward(const GruWeights& w, std::span<const double> x, std::span<const double> h_prev,
                GruCache* cache) {
  const std::size_t h = w.hidden_dim();
  if (x.size() != w.input_dim() || h_prev.size() != h) {
    throw DimensionError("gru: expected input " + std::to_string(w.input_dim()) + " and state " +
                         std::to_string(h) + ", got " + std::to_string(x.size()) + " and " +
                         std::to_string(h_prev.size()));
  }
  Vec z(w.bz->values().begin(), w.bz->values().end());
  Vec r(w.br->values().begin(), w.br->values().end());
  Vec cand(w.bh->values().begin(), w.bh->values().end());
  gemv_acc(*w.wz, x, z);
  gemv_acc(*w.uz, h_prev, z);
  gemv_acc(*w.wr, x, r);
  gemv_acc(*w.ur, h_prev, r);
  for (std::size_t i = 0; i < h; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
  }
  Vec gated(h);
  for (std::size_t i = 0; i < h; ++i) gated[i] = r[i] * h_prev[i];
  gemv_acc(*w.wh, x, cand);
  gemv_acc(*w.uh, gated, cand);
  Vec out(h);
  for (std::size_t i = 0; i < h; ++i) {
    cand[i] = std::tanh(cand[i]);
    out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * cand[i];
  }
  require_finite(out, "gru state");
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h_prev.begin(), h_prev.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->candidate = std::move(cand);
    cache->h = out;
  }
  return out;
}

void gru_backward(const GruWeights& w, const GruCache& cache, std::span<const double> dh,
                  GruGrads& g, std::span<double> dx, std::span<double> dh_prev) {
  const std::size_t h = w.hidden_dim();
  Vec d_z(h);
  Vec d_cand_pre(h);
  for (std::size_t i = 0; i < h; ++i) {
    d_z[i] = dh[i] * (cache.candidate[i] - cache.h_prev[i]) * cache.z[i] * (1.0 - cache.z[i]);
    d_cand_pre[i] = dh[i] * cache.z[i] * (1.0 - cache.candidate[i] * cache.candidate[i]);
    dh_prev[i] += dh[i] * (1.0 - cache.z[i]);
  }
  Vec gated(h);
  for (std::size_t i = 0; i < h; ++i) gated[i] = cache.r[i] * cache.h_prev[i];

  outer_acc(*g.wh, d_cand_pre, cache.x);
  outer_acc(*g.uh, d_cand_pre, gated);
  axpy(1.0, d_cand_pre, g.bh->values());
  gemv_t_acc(*w.wh, d_cand_pre, dx);
  Vec d_gated(h, 0.0);
  gemv_t_acc(*w.uh, d_cand_pre, d_gated);

  Vec d_r(h);
  for (std::size_t i = 0; i < h; ++i) {
    d_r[i] = d_gated[i] * cache.h_prev[i] * cache.r[i] * (1.0 - cache.r[i]);
    dh_prev[i] += d_gated[i] * cache.r[i];
  }

  outer_acc(*g.wz, d_z, cache.x);
  outer_acc(*g.uz, d_z, cache.h_prev);
  axpy(1.0, d_z, g.bz->values());
  gemv_t_acc(*w.wz, d_z, dx);
  gemv_t_acc(*w.uz, d_z, dh_prev);

  outer_acc(*g.wr, d_r, cache.x);
  outer_acc(*g.ur, d_r, cache.h_prev);
  axpy(1.0, d_r, g.br->values());
  gemv_t_acc(*w.wr, d_r, dx);
  gemv_t_acc(*w.ur, d_r, dh_prev);
}

Vec gru_step(std::span<const double> x, std::span<const double> h_prev, const ParamSet& params,
             std::string_view prefix) {
  return gru_forward(GruWeights::bind(params, prefix), x, h_prev);
}

}  // namespace mnmt
