#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnmt/error.hpp"
#include "mnmt/kernels.hpp"
#include "mnmt/optim.hpp"
#include "mnmt/rng.hpp"
#include "mnmt/tensor.hpp"

using namespace mnmt;

namespace {

double sum(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

ParamSet gru_params(std::size_t in, std::size_t hid, std::uint64_t seed, double scale) {
  ParamSet p;
  for (const auto& name : gru_param_names("g")) {
    const char kind = name[2];  // "g.Wz" -> 'W'
    std::vector<std::size_t> shape;
    if (kind == 'W') shape = {hid, in};
    else if (kind == 'U') shape = {hid, hid};
    else shape = {hid};
    p.add(name, Tensor(shape));
  }
  init_uniform(p, seed, scale);
  return p;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("softmax examples") {
  const Vec zero = {0, 0, 0};
  for (double p : softmax(zero)) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const Vec two = {std::log(2.0), 0.0};
  const auto p = softmax(two);
  CHECK(p[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const Vec a = {1, 2, 3}, b = {6, 7, 8};
  const auto pa = softmax(a), pb = softmax(b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(pa[i] - pb[i]) <= 1e-12);
}

TEST_CASE("masked softmax") {
  const Vec logits = {3.0, 1.0, 2.0};
  const std::vector<std::uint8_t> mask = {1, 0, 1};
  const auto p = softmax(logits, std::span<const std::uint8_t>(mask));
  CHECK(p[1] == 0.0);
  CHECK(p[0] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::uint8_t> none = {0, 0, 0};
  CHECK_THROWS_AS(softmax(logits, std::span<const std::uint8_t>(none)), NumericError);
}

TEST_CASE("softmax sums to one and is shift invariant on random input") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Vec logits(1 + rng.below(30));
    for (double& x : logits) x = rng.uniform(-50, 50);
    const double shift = rng.uniform(-100, 100);
    Vec shifted = logits;
    for (double& x : shifted) x += shift;
    const auto p = softmax(logits);
    const auto q = softmax(shifted);
    CHECK(std::abs(sum(p) - 1.0) <= 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("gru with zero parameters halves the state") {
  ParamSet p = gru_params(3, 2, 1, 0.0);
  const Vec x = {0.3, -1.0, 2.0};
  const Vec h = {0.4, -0.2};
  const auto out = gru_step(x, h, p, "g");
  CHECK(out[0] == doctest::Approx(0.2));
  CHECK(out[1] == doctest::Approx(-0.1));
  const auto zero = gru_step(x, Vec{0.0, 0.0}, p, "g");
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("gru matches a scalar recomputation of the gates") {
  const ParamSet p = gru_params(2, 2, 7, 0.5);
  const Vec x = {0.7, -0.3};
  const Vec h = {0.1, 0.5};
  auto W = [&](const char* n, int i, int j) { return p.get(std::string("g.") + n).at(i, j); };
  auto b = [&](const char* n, int i) { return p.get(std::string("g.") + n)[i]; };
  double z[2], r[2], out[2];
  for (int i = 0; i < 2; ++i) {
    z[i] = sig(W("Wz", i, 0) * x[0] + W("Wz", i, 1) * x[1] + W("Uz", i, 0) * h[0] +
               W("Uz", i, 1) * h[1] + b("bz", i));
    r[i] = sig(W("Wr", i, 0) * x[0] + W("Wr", i, 1) * x[1] + W("Ur", i, 0) * h[0] +
               W("Ur", i, 1) * h[1] + b("br", i));
  }
  for (int i = 0; i < 2; ++i) {
    const double cand = std::tanh(W("Wh", i, 0) * x[0] + W("Wh", i, 1) * x[1] +
                                  W("Uh", i, 0) * r[0] * h[0] + W("Uh", i, 1) * r[1] * h[1] +
                                  b("bh", i));
    out[i] = (1 - z[i]) * h[i] + z[i] * cand;
  }
  const auto got = gru_step(x, h, p, "g");
  CHECK(got[0] == doctest::Approx(out[0]).epsilon(1e-14));
  CHECK(got[1] == doctest::Approx(out[1]).epsilon(1e-14));
}

TEST_CASE("gru rejects inconsistent sizes") {
  const ParamSet p = gru_params(3, 2, 1, 0.1);
  CHECK_THROWS_AS(gru_step(Vec{1.0, 2.0}, Vec{0.0, 0.0}, p, "g"), DimensionError);
  CHECK_THROWS_AS(gru_step(Vec{1.0, 2.0, 3.0}, Vec{0.0}, p, "g"), DimensionError);
}

TEST_CASE("gru backward passes the gradient check") {
  ParamSet p = gru_params(3, 4, 11, 0.5);
  p.add("x", Tensor({3}, {0.2, -0.7, 0.4}));
  p.add("h", Tensor({4}, {0.1, -0.3, 0.6, -0.2}));
  const Vec c = {0.9, -1.3, 0.4, 2.0};
  LossFn loss = [&](const ParamSet& q, TensorMap* grads) {
    const auto w = GruWeights::bind(q, "g");
    GruCache cache;
    const auto out = gru_forward(w, q.get("x").values(), q.get("h").values(), &cache);
    // Second step reuses the weights to exercise recurrent accumulation.
    GruCache cache2;
    const auto out2 = gru_forward(w, q.get("x").values(), out, &cache2);
    double l = 0.0;
    for (std::size_t i = 0; i < 4; ++i) l += c[i] * out2[i] + 0.5 * out[i] * out[i];
    if (grads) {
      auto g = GruGrads::bind(*grads, "g");
      Vec dh2 = c;
      Vec dx(3, 0.0), dh1(4, 0.0);
      gru_backward(w, cache2, dh2, g, dx, dh1);
      for (std::size_t i = 0; i < 4; ++i) dh1[i] += out[i];
      gru_backward(w, cache, dh1, g, dx, (*grads)["h"].values());
      axpy(1.0, dx, (*grads)["x"].values());
    }
    return l;
  };
  const auto r = grad_check(loss, p);
  CHECK(r.max_relative_error < 1e-6);
  CHECK(r.entries_checked == 3 * 12 + 3 * 16 + 3 * 4 + 3 + 4);
}

TEST_CASE("maxout examples") {
  const auto a = maxout(Vec{1, 3, 2, 0});
  CHECK(a.output == Vec{3, 2});
  const auto b = maxout(Vec{-1, -1, -5, -5});
  CHECK(b.output == Vec{-1, -5});
  CHECK(b.argmax == std::vector<std::size_t>{0, 2});
  CHECK_THROWS_AS(maxout(Vec{1, 2, 3}), DimensionError);
}

TEST_CASE("maxout gradient goes only to the winner") {
  const Vec in = {0.3, -0.2, 1.5, 2.0, -1.0, -3.0};
  const Vec w = {0.7, -1.1, 2.5};
  const auto fwd = maxout(in);
  const auto grad = maxout_backward(fwd, w, in.size());
  const double eps = 1e-6;
  for (std::size_t i = 0; i < in.size(); ++i) {
    Vec up = in, down = in;
    up[i] += eps;
    down[i] -= eps;
    const double numeric = (dot(maxout(up).output, w) - dot(maxout(down).output, w)) / (2 * eps);
    CHECK(grad[i] == doctest::Approx(numeric).epsilon(1e-8));
  }
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == 0.0);
  CHECK(grad[5] == 0.0);
}

TEST_CASE("adam first step moves by the learning rate") {
  ParamSet p;
  p.add("t", Tensor({1}, {1.0}));
  TensorMap g;
  g["t"] = Tensor({1}, {0.3});
  adam_step(p, g, {0.0005, 0.9, 0.999, 1e-8});
  CHECK(p.get("t")[0] == doctest::Approx(1.0 - 0.0005 * 0.3 / (0.3 + 1e-8)).epsilon(1e-15));
  CHECK(p.step() == 1);
}

TEST_CASE("adam with zero gradient leaves values and counts the step") {
  ParamSet p;
  p.add("t", Tensor({2}, {1.0, -2.0}));
  TensorMap g;
  g["t"] = Tensor({2});
  adam_step(p, g, {});
  CHECK(p.get("t")[0] == 1.0);
  CHECK(p.get("t")[1] == -2.0);
  CHECK(p.step() == 1);
}

TEST_CASE("two adam steps match the unrolled recurrences") {
  const double lr = 0.0005, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  // By hand: m2 = 0.057, v2 = 1.7991e-4, and both bias-corrected values
  // return to 0.3 and 0.09, so each step subtracts lr * 0.3 / (0.3 + eps).
  CHECK(m == doctest::Approx(0.057).epsilon(1e-14));
  CHECK(v == doctest::Approx(1.7991e-4).epsilon(1e-12));
  CHECK(theta == doctest::Approx(1.0 - 2 * lr * 0.3 / (0.3 + eps)).epsilon(1e-14));

  ParamSet p;
  p.add("t", Tensor({1}, {1.0}));
  TensorMap grads;
  grads["t"] = Tensor({1}, {g});
  adam_step(p, grads, {lr, b1, b2, eps});
  adam_step(p, grads, {lr, b1, b2, eps});
  CHECK(p.get("t")[0] == doctest::Approx(theta).epsilon(1e-15));
  CHECK(p.step() == 2);
}

TEST_CASE("adam rejects bad gradients") {
  ParamSet p;
  p.add("w", Tensor({2}, {1.0, 1.0}));
  TensorMap nan;
  nan["w"] = Tensor({2}, {0.1, std::numeric_limits<double>::quiet_NaN()});
  try {
    adam_step(p, nan, {});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'w'") != std::string::npos);
  }
  TensorMap unknown;
  unknown["nope"] = Tensor({1});
  CHECK_THROWS(adam_step(p, unknown, {}));
}

TEST_CASE("adam with zero learning rate is the identity") {
  Rng rng(5);
  ParamSet p;
  p.add("a", Tensor({3, 4}));
  p.add("b", Tensor({5}));
  init_uniform(p, 2, 1.0);
  const TensorMap before = p.values();
  for (int s = 0; s < 5; ++s) {
    TensorMap g = p.zeros_like();
    for (auto& [n, t] : g) {
      for (double& x : t.values()) x = rng.uniform(-1, 1);
    }
    adam_step(p, g, {0.0, 0.9, 0.999, 1e-8});
  }
  CHECK(p.values() == before);
  CHECK(p.step() == 5);
}

TEST_CASE("global norm clipping") {
  TensorMap g;
  g["a"] = Tensor({2}, {3.0, 4.0});
  g["b"] = Tensor({1}, {12.0});
  CHECK(clip_global_norm(g, 5.0) == doctest::Approx(13.0));
  CHECK(global_norm(g) == doctest::Approx(5.0));
  CHECK(g["a"][0] == doctest::Approx(3.0 * 5 / 13));
  TensorMap small;
  small["a"] = Tensor({1}, {0.5});
  clip_global_norm(small, 5.0);
  CHECK(small["a"][0] == 0.5);
}

TEST_CASE("grad_check on a quadratic") {
  ParamSet p;
  p.add("theta", Tensor({4}, {0.5, -1.5, 2.0, 0.25}));
  LossFn loss = [](const ParamSet& q, TensorMap* g) {
    double l = 0.0;
    const auto& t = q.get("theta");
    for (std::size_t i = 0; i < t.size(); ++i) {
      l += 0.5 * t[i] * t[i];
      if (g) (*g)["theta"][i] += t[i];
    }
    return l;
  };
  CHECK(grad_check(loss, p).max_relative_error < 1e-9);
}

TEST_CASE("grad_check on softmax cross-entropy") {
  ParamSet p;
  p.add("z", Tensor({3}, {0.2, -1.0, 0.7}));
  LossFn loss = [](const ParamSet& q, TensorMap* g) {
    const auto probs = softmax(q.get("z").values());
    if (g) {
      for (std::size_t i = 0; i < 3; ++i) (*g)["z"][i] += probs[i] - (i == 1 ? 1.0 : 0.0);
    }
    return -std::log(probs[1]);
  };
  CHECK(grad_check(loss, p).max_relative_error < 1e-7);
}

TEST_CASE("softmax backward passes the gradient check") {
  ParamSet p;
  p.add("z", Tensor({5}, {0.3, -0.4, 1.2, 0.0, -2.0}));
  const Vec w = {1.0, -2.0, 0.5, 3.0, -1.0};
  LossFn loss = [&](const ParamSet& q, TensorMap* g) {
    const auto probs = softmax(q.get("z").values());
    const double l = dot(probs, w);
    if (g) axpy(1.0, softmax_backward(probs, w), (*g)["z"].values());
    return l;
  };
  CHECK(grad_check(loss, p).max_relative_error < 1e-7);
}

TEST_CASE("grad_check samples large tensors and rejects non-determinism") {
  ParamSet p;
  p.add("big", Tensor({50, 10}));
  init_uniform(p, 1, 1.0);
  LossFn loss = [](const ParamSet& q, TensorMap* g) {
    double l = 0.0;
    for (std::size_t i = 0; i < q.get("big").size(); ++i) {
      const double x = q.get("big")[i];
      l += std::sin(x);
      if (g) (*g)["big"][i] += std::cos(x);
    }
    return l;
  };
  const auto r = grad_check(loss, p);
  CHECK(r.entries_checked == 200);
  CHECK(r.max_relative_error < 1e-8);

  int calls = 0;
  LossFn flaky = [&](const ParamSet&, TensorMap*) { return static_cast<double>(++calls); };
  CHECK_THROWS_AS(grad_check(flaky, p), NumericError);
}

TEST_CASE("require_finite and tensor shapes") {
  const Vec ok = {1.0, 2.0};
  CHECK_NOTHROW(require_finite(ok, "ok"));
  const Vec bad = {1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(require_finite(bad, "bad"), NumericError);
  CHECK_THROWS(Tensor({2, 3}, Vec{1.0, 2.0}));
  const Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
}

TEST_CASE("initialization is seeded and bounded") {
  ParamSet a, b, c;
  for (auto* p : {&a, &b, &c}) p->add("w", Tensor({40, 40}));
  init_uniform(a, 9, kDefaultInitScale);
  init_uniform(b, 9, kDefaultInitScale);
  init_uniform(c, 10, kDefaultInitScale);
  CHECK(a.values() == b.values());
  CHECK_FALSE(a.values() == c.values());
  for (double x : a.get("w").values()) CHECK(std::abs(x) <= kDefaultInitScale);
  CHECK(param_checksum(a) == param_checksum(b));
  CHECK(param_checksum(a) != param_checksum(c));
}

TEST_CASE("rng below and shuffle are reproducible and unbiased in range") {
  Rng a(42), b(42);
  std::vector<int> xs(20), ys(20);
  for (int i = 0; i < 20; ++i) xs[i] = ys[i] = i;
  a.shuffle(xs);
  b.shuffle(ys);
  CHECK(xs == ys);
  std::vector<int> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) CHECK(sorted[i] == i);
  Rng r(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[r.below(7)];
  for (int c : counts) CHECK(c > 800);
}

}  // TEST_SUITE
