#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/lexicon.hpp"
#include "mnmt/nmt.hpp"
#include "mnmt/optim.hpp"
#include "mnmt/tensor.hpp"

namespace mnmt {

// ---- similar-word maps and OOV substitution ----

/// OOV token -> ordered in-vocabulary stand-ins, for one language side.
class SimilarWordMap {
 public:
  SimilarWordMap() = default;

  /// Keeps only candidates present in `vocab`, first occurrence wins.
  /// Returns the number of candidates dropped.
  std::size_t add(const std::string& word, std::span<const std::string> candidates,
                  const Vocabulary& vocab);

  const std::vector<std::string>& candidates(const std::string& word) const;
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> map_;
};

struct SimilarWordLoad {
  SimilarWordMap map;
  std::size_t dropped_candidates = 0;
};

/// TSV rows: word TAB candidate1 TAB candidate2 ...
SimilarWordLoad load_similar_words(const std::filesystem::path& path, const Vocabulary& vocab);

struct SubstitutionRecord {
  std::size_t position = 0;
  std::string original;
  std::optional<std::string> substitute;  // empty: became UNK

  bool resolved() const { return substitute.has_value(); }
};

struct Substitution {
  Sentence tokens;
  std::vector<SubstitutionRecord> records;
};

/// Replaces each OOV token by its first stand-in not already in the sentence;
/// tokens without a usable stand-in become the UNK token.
Substitution apply_oov_substitution(std::span<const std::string> tokens, const Vocabulary& vocab,
                                    const SimilarWordMap& similar);

// ---- local and merged memory ----

struct LocalMemoryEntry {
  std::string label;               // target word emitted when this entry is chosen
  std::optional<TokenId> vocab_id; // set when label is in the target vocabulary
  TokenId embed_id = kUnk;         // target embedding row representing the label
  std::size_t position = 0;
  Vec hidden;
  double p_t_given_s = 0.0;
  double p_s_given_t = 0.0;
};

/// For each source word (EOS and PAD excluded), its top-k lexicon targets
/// paired with the word's encoder state. Targets outside the vocabulary are
/// kept only if `tgt_similar` gives them an in-vocabulary stand-in embedding.
std::vector<LocalMemoryEntry> build_local_memory(std::span<const std::string> tokens,
                                                 const EncodedSource& enc, const Lexicon& lex,
                                                 const Vocabulary& tgt_vocab, std::size_t k,
                                                 const SimilarWordMap* tgt_similar = nullptr);

struct MemoryEntry {
  std::string label;
  std::optional<TokenId> vocab_id;
  TokenId embed_id = kUnk;
  Vec blended;
};

/// Memory with one entry per target label, in first-seen order.
class MergedMemory {
 public:
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }
  const MemoryEntry& entry(std::size_t k) const { return entries_[k]; }

  std::optional<std::size_t> find(const std::string& label) const;
  /// Throws if the label already exists.
  void add(MemoryEntry entry);
  void relabel(std::size_t k, std::string label, std::optional<TokenId> vocab_id);

  /// Entries whose label is outside the target vocabulary, in entry order.
  /// The j-th of them decodes as token id (vocab size + j).
  std::vector<std::size_t> oov_entries() const;

 private:
  std::vector<MemoryEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Groups entries by label; the blended state is the p(s|t)-weighted mean of
/// the contributors, weights renormalized within the group (uniform if they
/// are all zero).
MergedMemory merge_memory(std::span<const LocalMemoryEntry> entries);

struct OovInjectionReport {
  std::size_t added = 0;
  std::size_t relabeled = 0;
  std::vector<std::string> skipped;  // human-readable reasons
};

/// Gives substituted source OOVs a memory presence under their own
/// translations. An in-vocabulary translation is added as a plain entry. An
/// out-of-vocabulary translation borrows the embedding of its first
/// in-vocabulary similar word: an existing entry for that stand-in is
/// relabeled to the true translation, otherwise a new entry on the OOV's
/// encoder state is added.
MergedMemory inject_oov_targets(MergedMemory memory, std::span<const SubstitutionRecord> records,
                                const EncodedSource& enc, const Lexicon& lex,
                                const Vocabulary& tgt_vocab, const SimilarWordMap& tgt_similar,
                                std::size_t k, OovInjectionReport* report = nullptr);

// ---- memory attention ----

inline constexpr double kDefaultBeta = 1.0 / 3.0;

/// Memory attention parameters mem.v, mem.Ws, mem.Wu, mem.Wy and the
/// interpolation weight.
struct MemoryParams {
  ParamSet params;
  double beta = kDefaultBeta;

  /// Throws NumericError when beta is outside [0, 1].
  void validate() const;
};

/// v starts at zero (uniform attention); the matrices uniform in [-scale, scale].
MemoryParams init_memory_params(const NmtConfig& nmt, std::size_t attention_dim, double beta,
                                std::uint64_t seed, double scale = kDefaultInitScale);

/// Memory attention net bound to one merged memory. Keys W_u u_k, with
/// u_k = [E_t(embed of entry k) ; blended state], are computed once.
class MemoryScorer {
 public:
  MemoryScorer(const MergedMemory& memory, const ParamSet& mem_params, const Tensor& tgt_embed);

  std::size_t size() const { return units_.rows(); }

  /// alpha^m_k = softmax_k( v^T tanh(W_s s_prev + W_u u_k + W_y E_t y_prev) ).
  /// `hidden` receives the [K x A] tanh activations when given.
  Vec attention(std::span<const double> s_prev, TokenId y_prev_embed, Tensor* hidden = nullptr) const;

  /// -log alpha^m[target] and, when `grads` is given, its gradient w.r.t. the
  /// memory parameters scaled by `weight`.
  double nll(std::span<const double> s_prev, TokenId y_prev_embed, std::size_t target,
             double weight, TensorMap* grads) const;

 private:
  const ParamSet& params_;
  const Tensor& tgt_embed_;
  Tensor units_;  // [K x (E + 2H)]
  Tensor keys_;   // [K x A]
};

Vec memory_attention(std::span<const double> s_prev, TokenId y_prev_embed,
                     const MergedMemory& memory, const MemoryParams& mparams,
                     const ParamSet& nmt_params);

/// beta * alpha^m + (1 - beta) * p_nmt over the target vocabulary followed by
/// the memory's OOV labels (see MergedMemory::oov_entries). With an empty
/// memory the NMT posterior is returned as is.
Vec interpolate_posterior(std::span<const double> p_nmt, std::span<const double> alpha,
                          const MergedMemory& memory, double beta);

/// Posterior hook that interpolates the decoder with memory attention.
class MemoryHook final : public PosteriorHook {
 public:
  MemoryHook(const MergedMemory& memory, const MemoryParams& mparams, const ParamSet& nmt_params);

  std::size_t extra_labels() const override { return oov_.size(); }
  TokenId embedding_id(TokenId token) const override;
  Vec transform(std::span<const double> p_nmt, std::span<const double> s_prev,
                TokenId y_prev_embedding) const override;

  /// Output string for a decoded token.
  std::string label(TokenId token, const Vocabulary& tgt_vocab) const;

 private:
  const MergedMemory& memory_;
  const MemoryParams& mparams_;
  std::size_t vocab_size_;
  std::vector<std::size_t> oov_;
  std::optional<MemoryScorer> scorer_;
};

// ---- staged training against a frozen NMT ----

/// One sentence prepared for memory training: its merged memory and the
/// frozen decoder's teacher-forced states.
struct MemoryExample {
  MergedMemory memory;
  std::vector<Vec> states;
  std::vector<TokenId> previous;
  std::vector<std::optional<std::size_t>> targets;  // memory slot of y_i, if any
};

MemoryExample prepare_memory_example(const SentencePair& pair, const Vocabulary& src_vocab,
                                     const Vocabulary& tgt_vocab, const ParamSet& nmt_params,
                                     const Lexicon& lex, std::size_t k,
                                     const SimilarWordMap* tgt_similar = nullptr);

/// Sum of -log alpha^m over the example's trainable positions; gradient into
/// `grads` scaled by `weight`.
double memory_example_loss(const MemoryExample& example, const ParamSet& mem_params,
                           const ParamSet& nmt_params, double weight, TensorMap* grads);

struct MemoryTrainOptions {
  std::size_t epochs = 10;
  std::size_t k = 3;
  std::size_t batch_size = 80;
  double lr = 0.0005;
  double clip_norm = kDefaultClipNorm;
  std::uint64_t seed = 1;
};

struct MemoryTrainReport {
  std::vector<double> epoch_losses;  // mean -log alpha^m per trainable position
  std::size_t trainable_positions = 0;
  std::size_t skipped_positions = 0;  // reference word absent from memory
  bool no_op = false;
};

/// Trains only the memory attention; `nmt_params` is read-only. Throws
/// EmptyDataError on an empty lexicon. With no trainable position the call
/// is a no-op flagged in the report.
MemoryTrainReport train_memory_attention(const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                                         const Vocabulary& tgt_vocab, const ParamSet& nmt_params,
                                         MemoryParams& mparams, const Lexicon& lex,
                                         const MemoryTrainOptions& options,
                                         const SimilarWordMap* tgt_similar = nullptr);

}  // namespace mnmt
