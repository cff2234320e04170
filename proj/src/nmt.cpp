#include "mnmt/nmt.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mnmt/error.hpp"
#include "mnmt/kernels.hpp"

namespace mnmt {

namespace {

constexpr const char* kSrcEmbed = "src_embed";
constexpr const char* kTgtEmbed = "tgt_embed";
constexpr const char* kEncFwd = "enc_fwd";
constexpr const char* kEncBwd = "enc_bwd";
constexpr const char* kDec = "dec";
constexpr const char* kInitW = "init.W";
constexpr const char* kAttW = "att.W";
constexpr const char* kAttU = "att.U";
constexpr const char* kAttV = "att.v";
constexpr const char* kOutU = "out.U";
constexpr const char* kOutV = "out.V";
constexpr const char* kOutC = "out.C";
constexpr const char* kOutB = "out.b";

struct Weights {
  const Tensor* src_embed;
  const Tensor* tgt_embed;
  GruWeights enc_fwd;
  GruWeights enc_bwd;
  GruWeights dec;
  const Tensor* init_w;
  const Tensor* att_w;
  const Tensor* att_u;
  const Tensor* att_v;
  const Tensor* out_u;
  const Tensor* out_v;
  const Tensor* out_c;
  const Tensor* out_b;

  std::size_t embed() const { return tgt_embed->cols(); }
  std::size_t hidden() const { return enc_fwd.hidden_dim(); }
  std::size_t attention() const { return att_v->size(); }

  static Weights bind(const ParamSet& p) {
    Weights w{&p.get(kSrcEmbed), &p.get(kTgtEmbed), GruWeights::bind(p, kEncFwd),
              GruWeights::bind(p, kEncBwd), GruWeights::bind(p, kDec), &p.get(kInitW),
              &p.get(kAttW), &p.get(kAttU), &p.get(kAttV), &p.get(kOutU),
              &p.get(kOutV), &p.get(kOutC), &p.get(kOutB)};
    const std::size_t e = w.embed();
    const std::size_t h = w.hidden();
    const std::size_t a = w.attention();
    auto expect = [](const Tensor* t, std::size_t r, std::size_t c, const char* name) {
      if (t->rows() != r || t->cols() != c) {
        throw DimensionError(std::string(name) + " has shape " + shape_string(t->shape()) +
                             ", expected [" + std::to_string(r) + "x" + std::to_string(c) + "]");
      }
    };
    expect(w.src_embed, w.src_embed->rows(), e, kSrcEmbed);
    if (w.enc_fwd.input_dim() != e || w.enc_bwd.input_dim() != e || w.enc_bwd.hidden_dim() != h) {
      throw DimensionError("encoder GRU sizes disagree with the embedding");
    }
    if (w.dec.input_dim() != e + 2 * h || w.dec.hidden_dim() != h) {
      throw DimensionError("decoder GRU must take [embedding ; context] and keep hidden_dim");
    }
    expect(w.init_w, h, h, kInitW);
    expect(w.att_w, a, h, kAttW);
    expect(w.att_u, a, 2 * h, kAttU);
    expect(w.out_u, 2 * e, e, kOutU);
    expect(w.out_v, 2 * e, h, kOutV);
    expect(w.out_c, 2 * e, 2 * h, kOutC);
    if (w.out_b->size() != 2 * e) throw DimensionError("out.b must have 2*embed_dim entries");
    return w;
  }
};

struct Grads {
  Tensor* src_embed;
  Tensor* tgt_embed;
  GruGrads enc_fwd;
  GruGrads enc_bwd;
  GruGrads dec;
  Tensor* init_w;
  Tensor* att_w;
  Tensor* att_u;
  Tensor* att_v;
  Tensor* out_u;
  Tensor* out_v;
  Tensor* out_c;
  Tensor* out_b;

  static Grads bind(TensorMap& g) {
    auto get = [&](const char* name) {
      auto it = g.find(name);
      if (it == g.end()) throw Error(std::string("missing gradient slot '") + name + "'");
      return &it->second;
    };
    return {get(kSrcEmbed), get(kTgtEmbed), GruGrads::bind(g, kEncFwd), GruGrads::bind(g, kEncBwd),
            GruGrads::bind(g, kDec), get(kInitW), get(kAttW), get(kAttU), get(kAttV), get(kOutU),
            get(kOutV), get(kOutC), get(kOutB)};
  }
};

void add_gru_params(ParamSet& params, const std::string& prefix, std::size_t input,
                    std::size_t hidden) {
  const auto names = gru_param_names(prefix);
  for (std::size_t gate = 0; gate < 3; ++gate) {
    params.add(names[3 * gate], Tensor({hidden, input}));
    params.add(names[3 * gate + 1], Tensor({hidden, hidden}));
    params.add(names[3 * gate + 2], Tensor({hidden}));
  }
}

struct EncoderTrace {
  std::vector<GruCache> forward;
  std::vector<GruCache> backward;
};

EncodedSource run_encoder(const Weights& w, std::span<const TokenId> source, EncoderTrace* trace) {
  if (source.empty()) throw DimensionError("cannot encode an empty source");
  const std::size_t t_len = source.size();
  const std::size_t h = w.hidden();
  for (TokenId id : source) {
    if (id < 0 || static_cast<std::size_t>(id) >= w.src_embed->rows()) {
      throw DimensionError("source id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(w.src_embed->rows()));
    }
  }
  EncodedSource enc;
  enc.states = Tensor({t_len, 2 * h});
  enc.keys = Tensor({t_len, w.attention()});
  enc.mask.resize(t_len);
  if (trace) {
    trace->forward.resize(t_len);
    trace->backward.resize(t_len);
  }
  Vec state(h, 0.0);
  for (std::size_t j = 0; j < t_len; ++j) {
    state = gru_forward(w.enc_fwd, w.src_embed->row(static_cast<std::size_t>(source[j])), state,
                        trace ? &trace->forward[j] : nullptr);
    std::copy(state.begin(), state.end(), enc.states.row(j).begin());
  }
  std::fill(state.begin(), state.end(), 0.0);
  for (std::size_t j = t_len; j-- > 0;) {
    state = gru_forward(w.enc_bwd, w.src_embed->row(static_cast<std::size_t>(source[j])), state,
                        trace ? &trace->backward[j] : nullptr);
    std::copy(state.begin(), state.end(), enc.states.row(j).begin() + static_cast<std::ptrdiff_t>(h));
  }
  for (std::size_t j = 0; j < t_len; ++j) {
    gemv_acc(*w.att_u, enc.states.row(j), enc.keys.row(j));
    enc.mask[j] = source[j] == kPad ? 0 : 1;
  }
  return enc;
}

Vec initial_state(const Weights& w, const EncodedSource& enc) {
  Vec s(w.hidden(), 0.0);
  gemv_acc(*w.init_w, enc.backward_state(0), s);
  for (double& x : s) x = std::tanh(x);
  return s;
}

// Attention scores; fills `hidden` ([T x A] tanh activations) when given.
Vec attention(const Weights& w, std::span<const double> s_prev, const EncodedSource& enc,
              Tensor* hidden) {
  if (enc.length() == 0) throw DimensionError("attention over an empty source");
  const std::size_t a = w.attention();
  Vec query(a, 0.0);
  gemv_acc(*w.att_w, s_prev, query);
  Vec scores(enc.length());
  Vec act(a);
  if (hidden) *hidden = Tensor({enc.length(), a});
  for (std::size_t j = 0; j < enc.length(); ++j) {
    const auto key = enc.keys.row(j);
    for (std::size_t k = 0; k < a; ++k) act[k] = std::tanh(query[k] + key[k]);
    scores[j] = dot(w.att_v->values(), act);
    if (hidden) std::copy(act.begin(), act.end(), hidden->row(j).begin());
  }
  return softmax(scores, std::span<const std::uint8_t>(enc.mask));
}

Vec context(std::span<const double> alpha, const EncodedSource& enc) {
  if (alpha.size() != enc.length()) {
    throw DimensionError("attention has " + std::to_string(alpha.size()) + " weights for " +
                         std::to_string(enc.length()) + " source positions");
  }
  Vec c(enc.states.cols(), 0.0);
  for (std::size_t j = 0; j < enc.length(); ++j) {
    if (alpha[j] != 0.0) axpy(alpha[j], enc.states.row(j), c);
  }
  return c;
}

std::span<const double> target_embedding(const Weights& w, TokenId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= w.tgt_embed->rows()) {
    throw DimensionError("target id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(w.tgt_embed->rows()));
  }
  return w.tgt_embed->row(static_cast<std::size_t>(id));
}

MaxoutResult readout(const Weights& w, std::span<const double> y_embed,
                     std::span<const double> s_prev, std::span<const double> c, Vec* pre_out) {
  Vec pre(w.out_b->values().begin(), w.out_b->values().end());
  gemv_acc(*w.out_u, y_embed, pre);
  gemv_acc(*w.out_v, s_prev, pre);
  gemv_acc(*w.out_c, c, pre);
  auto result = maxout(pre);
  if (pre_out) *pre_out = std::move(pre);
  return result;
}

Vec output_probs(const Weights& w, std::span<const double> z) {
  if (z.size() != w.embed()) {
    throw DimensionError("readout has " + std::to_string(z.size()) + " units, embedding has " +
                         std::to_string(w.embed()));
  }
  Vec logits(w.tgt_embed->rows(), 0.0);
  gemv_acc(*w.tgt_embed, z, logits);
  return softmax(logits);
}

struct StepTrace {
  Vec s_prev;
  Tensor att_hidden;
  Vec alpha;
  Vec context;
  TokenId y_prev = kBos;
  GruCache gru;
  MaxoutResult maxout;
  Vec probs;
};

// One decoder step; returns s_i and leaves p(y_i) in trace.probs.
Vec forward_step(const Weights& w, const EncodedSource& enc, TokenId y_prev,
                 std::span<const double> s_prev, StepTrace& trace) {
  trace.s_prev.assign(s_prev.begin(), s_prev.end());
  trace.y_prev = y_prev;
  trace.alpha = attention(w, s_prev, enc, &trace.att_hidden);
  trace.context = context(trace.alpha, enc);
  const auto y_embed = target_embedding(w, y_prev);
  Vec input = concat(y_embed, trace.context);
  Vec s_next = gru_forward(w.dec, input, s_prev, &trace.gru);
  trace.maxout = readout(w, y_embed, s_prev, trace.context, nullptr);
  trace.probs = output_probs(w, trace.maxout.output);
  return s_next;
}

// Negative log-likelihood of one pair; accumulates `weight` * gradient into g.
double sentence_nll(const Weights& w, std::span<const TokenId> source,
                    std::span<const TokenId> target, double weight, Grads* g) {
  EncoderTrace enc_trace;
  const EncodedSource enc = run_encoder(w, source, g ? &enc_trace : nullptr);
  const Vec s0 = initial_state(w, enc);
  std::vector<StepTrace> steps(target.size());
  Vec s = s0;
  double nll = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const TokenId y_prev = i == 0 ? kBos : target[i - 1];
    s = forward_step(w, enc, y_prev, s, steps[i]);
    const TokenId y = target[i];
    if (y < 0 || static_cast<std::size_t>(y) >= steps[i].probs.size()) {
      throw DimensionError("target id " + std::to_string(y) + " outside vocabulary");
    }
    nll -= std::log(steps[i].probs[static_cast<std::size_t>(y)]);
  }
  if (!g) return nll;

  const std::size_t h = w.hidden();
  const std::size_t e = w.embed();
  const std::size_t a = w.attention();
  Tensor d_states({enc.length(), 2 * h});
  Vec ds_next(h, 0.0);
  for (std::size_t i = target.size(); i-- > 0;) {
    const StepTrace& tr = steps[i];
    Vec d_logits = tr.probs;
    d_logits[static_cast<std::size_t>(target[i])] -= 1.0;
    for (double& v : d_logits) v *= weight;

    const Vec& z = tr.maxout.output;
    Vec dz(e, 0.0);
    gemv_t_acc(*w.tgt_embed, d_logits, dz);
    outer_acc(*g->tgt_embed, d_logits, z);

    const Vec d_pre = maxout_backward(tr.maxout, dz, 2 * e);
    const auto y_embed = target_embedding(w, tr.y_prev);
    Vec ds_prev(h, 0.0);
    Vec dc(2 * h, 0.0);
    Vec dy(e, 0.0);
    outer_acc(*g->out_u, d_pre, y_embed);
    gemv_t_acc(*w.out_u, d_pre, dy);
    outer_acc(*g->out_v, d_pre, tr.s_prev);
    gemv_t_acc(*w.out_v, d_pre, ds_prev);
    outer_acc(*g->out_c, d_pre, tr.context);
    gemv_t_acc(*w.out_c, d_pre, dc);
    axpy(1.0, d_pre, g->out_b->values());

    Vec dx(e + 2 * h, 0.0);
    gru_backward(w.dec, tr.gru, ds_next, g->dec, dx, ds_prev);
    for (std::size_t k = 0; k < e; ++k) dy[k] += dx[k];
    for (std::size_t k = 0; k < 2 * h; ++k) dc[k] += dx[e + k];
    axpy(1.0, dy, g->tgt_embed->row(static_cast<std::size_t>(tr.y_prev)));

    Vec d_alpha(enc.length());
    for (std::size_t j = 0; j < enc.length(); ++j) {
      d_alpha[j] = dot(dc, enc.states.row(j));
      if (tr.alpha[j] != 0.0) axpy(tr.alpha[j], dc, d_states.row(j));
    }
    const Vec d_scores = softmax_backward(tr.alpha, d_alpha);
    Vec d_query(a, 0.0);
    Vec d_act(a);
    for (std::size_t j = 0; j < enc.length(); ++j) {
      if (d_scores[j] == 0.0) continue;
      const auto act = tr.att_hidden.row(j);
      axpy(d_scores[j], act, g->att_v->values());
      for (std::size_t k = 0; k < a; ++k) {
        d_act[k] = d_scores[j] * (*w.att_v)[k] * (1.0 - act[k] * act[k]);
        d_query[k] += d_act[k];
      }
      outer_acc(*g->att_u, d_act, enc.states.row(j));
      gemv_t_acc(*w.att_u, d_act, d_states.row(j));
    }
    outer_acc(*g->att_w, d_query, tr.s_prev);
    gemv_t_acc(*w.att_w, d_query, ds_prev);
    ds_next = std::move(ds_prev);
  }

  Vec d_init(h);
  for (std::size_t k = 0; k < h; ++k) d_init[k] = ds_next[k] * (1.0 - s0[k] * s0[k]);
  outer_acc(*g->init_w, d_init, enc.backward_state(0));
  gemv_t_acc(*w.init_w, d_init, d_states.row(0).subspan(h, h));

  Vec dh(h, 0.0);
  Vec dx(e);
  for (std::size_t j = enc.length(); j-- > 0;) {
    axpy(1.0, d_states.row(j).subspan(0, h), dh);
    Vec dh_prev(h, 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    gru_backward(w.enc_fwd, enc_trace.forward[j], dh, g->enc_fwd, dx, dh_prev);
    axpy(1.0, dx, g->src_embed->row(static_cast<std::size_t>(source[j])));
    dh = std::move(dh_prev);
  }
  std::fill(dh.begin(), dh.end(), 0.0);
  for (std::size_t j = 0; j < enc.length(); ++j) {
    axpy(1.0, d_states.row(j).subspan(h, h), dh);
    Vec dh_prev(h, 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    gru_backward(w.enc_bwd, enc_trace.backward[j], dh, g->enc_bwd, dx, dh_prev);
    axpy(1.0, dx, g->src_embed->row(static_cast<std::size_t>(source[j])));
    dh = std::move(dh_prev);
  }
  return nll;
}

}  // namespace

void NmtConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw UsageError(std::string(name) + " must be positive");
  };
  positive(src_vocab_size, "src_vocab_size");
  positive(tgt_vocab_size, "tgt_vocab_size");
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(beam_size, "beam_size");
  positive(batch_size, "batch_size");
  if (src_vocab_size < kNumControlTokens || tgt_vocab_size < kNumControlTokens) {
    throw UsageError("vocabularies must hold at least the control tokens");
  }
  if (!(lr > 0.0)) throw UsageError("lr must be positive");
}

ParamSet init_nmt_params(const NmtConfig& config, std::uint64_t seed, double scale) {
  config.validate();
  const std::size_t e = config.embed_dim;
  const std::size_t h = config.hidden_dim;
  const std::size_t a = config.resolved_attention_dim();
  ParamSet params;
  params.add(kSrcEmbed, Tensor({config.src_vocab_size, e}));
  params.add(kTgtEmbed, Tensor({config.tgt_vocab_size, e}));
  add_gru_params(params, kEncFwd, e, h);
  add_gru_params(params, kEncBwd, e, h);
  add_gru_params(params, kDec, e + 2 * h, h);
  params.add(kInitW, Tensor({h, h}));
  params.add(kAttW, Tensor({a, h}));
  params.add(kAttU, Tensor({a, 2 * h}));
  params.add(kAttV, Tensor({a}));
  params.add(kOutU, Tensor({2 * e, e}));
  params.add(kOutV, Tensor({2 * e, h}));
  params.add(kOutC, Tensor({2 * e, 2 * h}));
  params.add(kOutB, Tensor({2 * e}));
  init_uniform(params, seed, scale);
  params.get(kAttV).fill(0.0);
  return params;
}

NmtConfig infer_nmt_config(const ParamSet& params) {
  const Weights w = Weights::bind(params);
  NmtConfig config;
  config.src_vocab_size = w.src_embed->rows();
  config.tgt_vocab_size = w.tgt_embed->rows();
  config.embed_dim = w.embed();
  config.hidden_dim = w.hidden();
  config.attention_dim = w.attention();
  return config;
}

std::span<const double> EncodedSource::backward_state(std::size_t j) const {
  const std::size_t h = states.cols() / 2;
  return states.row(j).subspan(h, h);
}

EncodedSource encode(std::span<const TokenId> source, const ParamSet& params) {
  return run_encoder(Weights::bind(params), source, nullptr);
}

Vec initial_decoder_state(const EncodedSource& enc, const ParamSet& params) {
  return initial_state(Weights::bind(params), enc);
}

Vec attention_weights(std::span<const double> s_prev, const EncodedSource& enc,
                      const ParamSet& params) {
  return attention(Weights::bind(params), s_prev, enc, nullptr);
}

Vec context_vector(std::span<const double> alpha, const EncodedSource& enc) {
  return context(alpha, enc);
}

DecoderStepResult decoder_step(TokenId y_prev, std::span<const double> s_prev,
                               std::span<const double> context_vec, const ParamSet& params) {
  const Weights w = Weights::bind(params);
  const auto y_embed = target_embedding(w, y_prev);
  DecoderStepResult out;
  out.state = gru_forward(w.dec, concat(y_embed, context_vec), s_prev);
  out.readout = readout(w, y_embed, s_prev, context_vec, nullptr).output;
  return out;
}

Vec output_distribution(std::span<const double> readout_vec, const ParamSet& params) {
  return output_probs(Weights::bind(params), readout_vec);
}

double batch_loss(const Batch& batch, const ParamSet& params, TensorMap* grads) {
  const Weights w = Weights::bind(params);
  std::optional<Grads> g;
  if (grads) g = Grads::bind(*grads);
  std::size_t tokens = 0;
  for (std::size_t r = 0; r < batch.size; ++r) tokens += batch.tgt_length(r);
  if (tokens == 0) throw EmptyDataError("batch has no target tokens");
  const double weight = 1.0 / static_cast<double>(tokens);
  double total = 0.0;
  for (std::size_t r = 0; r < batch.size; ++r) {
    total += sentence_nll(w, batch.src_row(r), batch.tgt_row(r), weight, g ? &*g : nullptr);
  }
  const double loss = total * weight;
  if (!std::isfinite(loss)) throw NumericError("training loss is not finite");
  return loss;
}

double train_step(const Batch& batch, ParamSet& params, const TrainStepOptions& options) {
  TensorMap grads = params.zeros_like();
  const double loss = batch_loss(batch, params, &grads);
  clip_global_norm(grads, options.clip_norm);
  AdamOptions adam;
  adam.lr = options.lr;
  adam_step(params, grads, adam);
  return loss;
}

double train_step(const Batch& batch, ParamSet& params, double lr) {
  TrainStepOptions options;
  options.lr = lr;
  return train_step(batch, params, options);
}

std::vector<double> train_nmt(std::span<const EncodedPair> corpus, ParamSet& params,
                              const TrainOptions& options,
                              const std::function<void(std::size_t, double)>& on_step) {
  std::vector<double> losses;
  losses.reserve(options.steps);
  TrainStepOptions step_options;
  step_options.lr = options.lr;
  step_options.clip_norm = options.clip_norm;
  std::size_t epoch = 0;
  while (losses.size() < options.steps) {
    const auto batching = make_batches(corpus, options.batch_size, options.max_len, options.seed + epoch);
    for (const auto& batch : batching.batches) {
      if (losses.size() >= options.steps) break;
      losses.push_back(train_step(batch, params, step_options));
      if (on_step) on_step(losses.size(), losses.back());
    }
    ++epoch;
  }
  return losses;
}

TeacherForcedTrace teacher_forced_trace(std::span<const TokenId> source,
                                        std::span<const TokenId> target, const ParamSet& params) {
  const Weights w = Weights::bind(params);
  TeacherForcedTrace trace;
  trace.encoded = run_encoder(w, source, nullptr);
  Vec s = initial_state(w, trace.encoded);
  StepTrace step;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const TokenId y_prev = i == 0 ? kBos : target[i - 1];
    trace.states.push_back(s);
    trace.previous.push_back(y_prev);
    if (i + 1 < target.size()) s = forward_step(w, trace.encoded, y_prev, s, step);
  }
  return trace;
}

NmtStepModel::NmtStepModel(const ParamSet& params, EncodedSource encoded, const PosteriorHook* hook)
    : params_(params), encoded_(std::move(encoded)), hook_(hook) {}

Vec NmtStepModel::initial_state() const { return initial_decoder_state(encoded_, params_); }

StepOutput NmtStepModel::step(std::span<const TokenId> prefix, std::span<const double> state) const {
  const Weights w = Weights::bind(params_);
  TokenId y_prev = prefix.empty() ? kBos : prefix.back();
  if (hook_) y_prev = hook_->embedding_id(y_prev);
  StepTrace trace;
  StepOutput out;
  out.next_state = forward_step(w, encoded_, y_prev, state, trace);
  out.probs = hook_ ? hook_->transform(trace.probs, state, y_prev) : std::move(trace.probs);
  return out;
}

std::size_t default_max_decode_len(std::size_t source_tokens) { return 2 * source_tokens + 5; }

Hypothesis beam_search(std::span<const TokenId> source, const ParamSet& params, std::size_t beam,
                       std::size_t max_len, const PosteriorHook* hook) {
  const std::size_t words = !source.empty() && source.back() == kEos ? source.size() - 1 : source.size();
  if (max_len == 0) max_len = default_max_decode_len(words);
  NmtStepModel model(params, encode(source, params), hook);
  return beam_search(model, beam, max_len);
}

}  // namespace mnmt
