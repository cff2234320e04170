#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mnmt {

using TokenId = std::int32_t;
using Sentence = std::vector<std::string>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumControlTokens = 4;

/// Bidirectional token <-> id map. Ids 0..3 are always PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kBosToken = "<s>";
  static constexpr std::string_view kEosToken = "</s>";
  static constexpr std::string_view kUnkToken = "<unk>";

  /// Vocabulary holding only the four control tokens.
  Vocabulary();

  /// Builds from an explicit token list; the first four entries must be the
  /// control tokens in order. Throws ParseError on duplicates.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(std::string_view token) const;
  /// Id of `token`, or kUnk when absent.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void append(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct SentencePair {
  Sentence source;
  Sentence target;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::size_t dropped_empty = 0;
};

/// Splits on ASCII whitespace.
Sentence tokenize(std::string_view line);

/// True when `bytes` is well-formed UTF-8.
bool is_valid_utf8(std::string_view bytes);

/// Reads a monolingual file, one sentence per line. Throws EncodingError with
/// the 1-based line number on malformed UTF-8.
std::vector<Sentence> load_sentences(const std::filesystem::path& path);

/// Reads line-aligned source/target files. Pairs with an empty side are dropped
/// and counted in `dropped_empty`.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& src_path,
                                    const std::filesystem::path& tgt_path);

/// Control tokens first, then tokens by descending frequency, frequency ties
/// broken by first occurrence; truncated to `max_size` entries in total.
Vocabulary build_vocabulary(std::span<const Sentence> side, std::size_t max_size);

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

std::vector<TokenId> encode_sentence(std::span<const std::string> tokens,
                                     const Vocabulary& vocab, bool append_eos);

/// Maps ids back to tokens, stopping before the first EOS.
Sentence decode_sentence(std::span<const TokenId> ids, const Vocabulary& vocab);

struct EncodedPair {
  std::vector<TokenId> source;  // ends with EOS
  std::vector<TokenId> target;  // ends with EOS
};

std::vector<EncodedPair> encode_corpus(const ParallelCorpus& corpus,
                                       const Vocabulary& src_vocab,
                                       const Vocabulary& tgt_vocab);

/// Padded mini-batch; row-major [size x len] id and mask matrices.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<TokenId> src;
  std::vector<std::uint8_t> src_mask;
  std::vector<TokenId> tgt;
  std::vector<std::uint8_t> tgt_mask;

  std::size_t src_length(std::size_t row) const;
  std::size_t tgt_length(std::size_t row) const;
  /// Unpadded source ids of `row`.
  std::span<const TokenId> src_row(std::size_t row) const;
  std::span<const TokenId> tgt_row(std::size_t row) const;
};

struct Batching {
  std::vector<Batch> batches;
  std::size_t dropped_long = 0;
};

/// Drops pairs with a side longer than `max_len` tokens (EOS not counted),
/// shuffles the rest with `seed`, and cuts them into padded batches.
/// Throws EmptyDataError when nothing survives the length filter.
Batching make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size,
                      std::size_t max_len, std::uint64_t seed);

/// Single-row batch for one pair, without filtering.
Batch make_single_batch(const EncodedPair& pair);

}  // namespace mnmt
