#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mnmt/beam_search.hpp"
#include "mnmt/corpus.hpp"
#include "mnmt/optim.hpp"
#include "mnmt/tensor.hpp"

namespace mnmt {

/// Attention-based encoder-decoder hyperparameters. The output embedding is
/// tied to the target embedding, so the readout width equals embed_dim.
struct NmtConfig {
  std::size_t src_vocab_size = 30000;
  std::size_t tgt_vocab_size = 30000;
  std::size_t embed_dim = 500;
  std::size_t hidden_dim = 1000;
  std::size_t attention_dim = 0;  // 0: same as hidden_dim
  std::size_t beam_size = 12;
  std::size_t max_decode_len = 0;  // 0: 2 * source length + 5
  double lr = 0.0005;
  std::size_t batch_size = 80;

  std::size_t resolved_attention_dim() const {
    return attention_dim == 0 ? hidden_dim : attention_dim;
  }
  /// Throws UsageError on non-positive sizes.
  void validate() const;
};

/// Fresh parameters: uniform in [-scale, scale] except the attention vector,
/// which starts at zero.
ParamSet init_nmt_params(const NmtConfig& config, std::uint64_t seed,
                         double scale = kDefaultInitScale);

/// Reads the model sizes back from a parameter set.
NmtConfig infer_nmt_config(const ParamSet& params);

struct EncodedSource {
  Tensor states;                   // [T x 2H], row j = [forward_j ; backward_j]
  Tensor keys;                     // [T x A], attention projection of each row
  std::vector<std::uint8_t> mask;  // 0 on PAD positions

  std::size_t length() const { return states.rows(); }
  std::span<const double> backward_state(std::size_t j) const;
};

/// Bidirectional GRU encoding. Throws DimensionError on an empty source or an
/// id outside the source vocabulary.
EncodedSource encode(std::span<const TokenId> source, const ParamSet& params);

/// s_0 = tanh(W_init * backward state at the first position).
Vec initial_decoder_state(const EncodedSource& enc, const ParamSet& params);

/// Masked softmax of v^T tanh(W_a s_prev + U_a h_j) over source positions.
Vec attention_weights(std::span<const double> s_prev, const EncodedSource& enc,
                      const ParamSet& params);

/// sum_j alpha_j h_j
Vec context_vector(std::span<const double> alpha, const EncodedSource& enc);

struct DecoderStepResult {
  Vec state;    // s_i
  Vec readout;  // z_i
};

/// s_i = GRU([E_t y_prev ; c], s_prev);
/// z_i = maxout(U E_t y_prev + V s_prev + C c + b).
DecoderStepResult decoder_step(TokenId y_prev, std::span<const double> s_prev,
                               std::span<const double> context, const ParamSet& params);

/// softmax(E_t z)
Vec output_distribution(std::span<const double> readout, const ParamSet& params);

/// Mask-weighted mean negative log-likelihood of the batch under teacher
/// forcing. When `grads` is given it receives the gradient (accumulated).
double batch_loss(const Batch& batch, const ParamSet& params, TensorMap* grads);

struct TrainStepOptions {
  double lr = 0.0005;
  double clip_norm = kDefaultClipNorm;
};

/// One Adam update on the batch loss; returns the loss before the update.
double train_step(const Batch& batch, ParamSet& params, const TrainStepOptions& options);
double train_step(const Batch& batch, ParamSet& params, double lr);

struct TrainOptions {
  std::size_t steps = 1000;
  std::size_t batch_size = 80;
  std::size_t max_len = 50;
  double lr = 0.0005;
  double clip_norm = kDefaultClipNorm;
  std::uint64_t seed = 1;
};

/// Cycles over the corpus in freshly shuffled epochs for `options.steps`
/// batches. `on_step(step, loss)` is called after every update.
/// Returns the per-step losses.
std::vector<double> train_nmt(std::span<const EncodedPair> corpus, ParamSet& params,
                              const TrainOptions& options,
                              const std::function<void(std::size_t, double)>& on_step = {});

/// Decoder states s_0 .. s_{N-1} seen under teacher forcing on `target`
/// (ids ending with EOS): entry i is the state preceding target position i.
struct TeacherForcedTrace {
  EncodedSource encoded;
  std::vector<Vec> states;
  std::vector<TokenId> previous;  // y_{i-1}, BOS first
};
TeacherForcedTrace teacher_forced_trace(std::span<const TokenId> source,
                                        std::span<const TokenId> target, const ParamSet& params);

/// Adjusts the decoder's posterior at each step. Memory interpolation is the
/// production implementation. Extra labels are token ids >= target vocab size.
class PosteriorHook {
 public:
  virtual ~PosteriorHook() = default;
  virtual std::size_t extra_labels() const { return 0; }
  /// Embedding row fed back to the decoder when `token` is the previous word.
  virtual TokenId embedding_id(TokenId token) const { return token; }
  /// `y_prev_embedding` is already mapped through embedding_id.
  virtual Vec transform(std::span<const double> p_nmt, std::span<const double> s_prev,
                        TokenId y_prev_embedding) const = 0;
};

class IdentityHook final : public PosteriorHook {
 public:
  Vec transform(std::span<const double> p_nmt, std::span<const double>, TokenId) const override {
    return Vec(p_nmt.begin(), p_nmt.end());
  }
};

/// The NMT decoder as a StepModel for one encoded source.
class NmtStepModel final : public StepModel {
 public:
  NmtStepModel(const ParamSet& params, EncodedSource encoded, const PosteriorHook* hook = nullptr);

  Vec initial_state() const override;
  StepOutput step(std::span<const TokenId> prefix, std::span<const double> state) const override;

  const EncodedSource& encoded() const { return encoded_; }

 private:
  const ParamSet& params_;
  EncodedSource encoded_;
  const PosteriorHook* hook_;
};

/// Default decode budget for a source of `source_tokens` words.
std::size_t default_max_decode_len(std::size_t source_tokens);

/// Beam decoding of `source` (ids, EOS included). `max_len` 0 selects the
/// default budget.
Hypothesis beam_search(std::span<const TokenId> source, const ParamSet& params,
                       std::size_t beam, std::size_t max_len,
                       const PosteriorHook* hook = nullptr);

}  // namespace mnmt
