#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mnmt/beam_search.hpp"
#include "mnmt/corpus.hpp"
#include "mnmt/lexicon.hpp"
#include "mnmt/memory.hpp"
#include "mnmt/nmt.hpp"

namespace mnmt::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::string& bytes);
void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src,
                  const std::filesystem::path& tgt);
std::string join(const Sentence& tokens);

// Control tokens followed by `words`.
Vocabulary vocab_of(const std::vector<std::string>& words);

NmtConfig tiny_config(std::size_t src_vocab, std::size_t tgt_vocab, std::size_t embed,
                      std::size_t hidden);

// Random parameters with a random (non-zero) attention vector.
ParamSet random_params(const NmtConfig& config, std::uint64_t seed, double scale = 0.3);

std::vector<TokenId> random_source(std::size_t vocab_size, std::size_t length, std::uint64_t seed);

// Source word s<k> translates to t<k> in place; `words` distinct words,
// sentence lengths in [min_len, max_len].
ParallelCorpus copy_corpus(std::size_t pairs, std::size_t words, std::size_t min_len,
                           std::size_t max_len, std::uint64_t seed);

// Frequent words f<k> -> g<k>, plus rare words r<k> -> q<k> that occur
// exactly once in the training split and once each in the held-out split.
struct RareWordCorpus {
  ParallelCorpus train;
  ParallelCorpus held_out;
  std::vector<std::string> rare_sources;
  std::vector<std::string> rare_targets;
  Lexicon lexicon;  // every source/target pair with p = 1 both ways
};
RareWordCorpus rare_word_corpus(std::size_t frequent_pairs, std::size_t frequent_words,
                                std::size_t rare_words, std::uint64_t seed);

// Scalar EM for p(t|s) on [("a b", "x y"), ("a", "x")], written out by hand.
struct ToyTable {
  double xa = 0.5, ya = 0.5, xb = 0.5, yb = 0.5;
};
ToyTable toy_em(int iterations);

struct TrainedModel {
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  ParamSet params;
  std::vector<double> losses;
};
TrainedModel train_model(const ParallelCorpus& corpus, const NmtConfig& sizes,
                         const TrainOptions& options, std::uint64_t init_seed);

// Beam decode of every source sentence; memory interpolation when both
// `memory` and `lex` are given.
std::vector<Sentence> translate_all(const ParallelCorpus& corpus, const TrainedModel& model,
                                    std::size_t beam, const MemoryParams* memory = nullptr,
                                    const Lexicon* lex = nullptr, std::size_t k = 3);

std::vector<Sentence> targets_of(const ParallelCorpus& corpus);

// Next-token distributions looked up by prefix; prefixes not in the table
// get `fallback`.
class TableModel final : public StepModel {
 public:
  TableModel(std::map<std::vector<TokenId>, Vec> table, Vec fallback)
      : table_(std::move(table)), fallback_(std::move(fallback)) {}
  Vec initial_state() const override { return {}; }
  StepOutput step(std::span<const TokenId> prefix, std::span<const double>) const override;

 private:
  std::map<std::vector<TokenId>, Vec> table_;
  Vec fallback_;
};

// Vocabulary {a, b, EOS} where greedy settles on a-EOS (log-prob -1.2) but
// b-a-EOS has log-prob -0.9, i.e. -0.3 per token.
inline constexpr TokenId kTokA = 4;
inline constexpr TokenId kTokB = 5;
TableModel greedy_trap_model();

// Every token sequence the decoder could return within `max_len` steps,
// with its log-probability under `model`.
std::vector<Hypothesis> enumerate_sequences(const StepModel& model, std::size_t max_len);

}  // namespace mnmt::testing
