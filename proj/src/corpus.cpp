#include "mnmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mnmt/error.hpp"
#include "mnmt/rng.hpp"

namespace mnmt {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

Vocabulary::Vocabulary() {
  append(std::string(kPadToken));
  append(std::string(kBosToken));
  append(std::string(kEosToken));
  append(std::string(kUnkToken));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary vocab;
  if (tokens.size() < kNumControlTokens) {
    throw ParseError("vocabulary must start with the 4 control tokens");
  }
  for (std::size_t i = 0; i < kNumControlTokens; ++i) {
    if (tokens[i] != vocab.tokens_[i]) {
      throw ParseError("vocabulary line " + std::to_string(i) + " must be '" +
                       vocab.tokens_[i] + "', got '" + tokens[i] + "'");
    }
  }
  for (std::size_t i = kNumControlTokens; i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) {
      throw ParseError("duplicate vocabulary token '" + tokens[i] + "' at line " +
                       std::to_string(i));
    }
    vocab.append(std::move(tokens[i]));
  }
  return vocab;
}

void Vocabulary::append(std::string token) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= bytes.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, and values past U+10FFFF.
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

std::vector<Sentence> load_sentences(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Sentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!is_valid_utf8(line)) {
      throw EncodingError(path.string() + ":" + std::to_string(line_no) +
                          ": invalid UTF-8");
    }
    out.push_back(tokenize(line));
  }
  return out;
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& src_path,
                                    const std::filesystem::path& tgt_path) {
  auto src = load_sentences(src_path);
  auto tgt = load_sentences(tgt_path);
  if (src.size() != tgt.size()) {
    throw AlignmentError("parallel files differ in line count: " + std::to_string(src.size()) +
                         " vs " + std::to_string(tgt.size()) + " (" + src_path.string() +
                         ", " + tgt_path.string() + ")");
  }
  ParallelCorpus corpus;
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].empty() || tgt[i].empty()) {
      ++corpus.dropped_empty;
      continue;
    }
    corpus.pairs.push_back({std::move(src[i]), std::move(tgt[i])});
  }
  return corpus;
}

Vocabulary build_vocabulary(std::span<const Sentence> side, std::size_t max_size) {
  struct Stat {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<std::string, Stat> stats;
  std::size_t position = 0;
  Vocabulary control;
  for (const auto& sentence : side) {
    for (const auto& token : sentence) {
      auto [it, inserted] = stats.try_emplace(token);
      if (inserted) it->second.first = position;
      ++it->second.count;
      ++position;
    }
  }
  std::vector<std::pair<std::string, Stat>> ranked;
  ranked.reserve(stats.size());
  for (auto& [token, stat] : stats) {
    if (control.contains(token)) continue;
    ranked.emplace_back(token, stat);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first < b.second.first;
  });
  std::vector<std::string> tokens = control.tokens();
  for (auto& [token, stat] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(token);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& token : vocab.tokens()) out << token << '\n';
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!is_valid_utf8(line)) {
      throw EncodingError(path.string() + ":" + std::to_string(tokens.size()) +
                          ": invalid UTF-8");
    }
    tokens.push_back(line);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<TokenId> encode_sentence(std::span<const std::string> tokens,
                                     const Vocabulary& vocab, bool append_eos) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size() + 1);
  for (const auto& token : tokens) ids.push_back(vocab.id(token));
  if (append_eos) ids.push_back(kEos);
  return ids;
}

Sentence decode_sentence(std::span<const TokenId> ids, const Vocabulary& vocab) {
  Sentence out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::vector<EncodedPair> encode_corpus(const ParallelCorpus& corpus,
                                       const Vocabulary& src_vocab,
                                       const Vocabulary& tgt_vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.pairs.size());
  for (const auto& pair : corpus.pairs) {
    out.push_back({encode_sentence(pair.source, src_vocab, true),
                   encode_sentence(pair.target, tgt_vocab, true)});
  }
  return out;
}

std::size_t Batch::src_length(std::size_t row) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < src_len; ++j) n += src_mask[row * src_len + j];
  return n;
}

std::size_t Batch::tgt_length(std::size_t row) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < tgt_len; ++j) n += tgt_mask[row * tgt_len + j];
  return n;
}

std::span<const TokenId> Batch::src_row(std::size_t row) const {
  return std::span<const TokenId>(src).subspan(row * src_len, src_length(row));
}

std::span<const TokenId> Batch::tgt_row(std::size_t row) const {
  return std::span<const TokenId>(tgt).subspan(row * tgt_len, tgt_length(row));
}

namespace {

Batch pack(std::span<const EncodedPair* const> rows) {
  Batch batch;
  batch.size = rows.size();
  for (const auto* pair : rows) {
    batch.src_len = std::max(batch.src_len, pair->source.size());
    batch.tgt_len = std::max(batch.tgt_len, pair->target.size());
  }
  batch.src.assign(batch.size * batch.src_len, kPad);
  batch.src_mask.assign(batch.size * batch.src_len, 0);
  batch.tgt.assign(batch.size * batch.tgt_len, kPad);
  batch.tgt_mask.assign(batch.size * batch.tgt_len, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& pair = *rows[r];
    for (std::size_t j = 0; j < pair.source.size(); ++j) {
      batch.src[r * batch.src_len + j] = pair.source[j];
      batch.src_mask[r * batch.src_len + j] = 1;
    }
    for (std::size_t j = 0; j < pair.target.size(); ++j) {
      batch.tgt[r * batch.tgt_len + j] = pair.target[j];
      batch.tgt_mask[r * batch.tgt_len + j] = 1;
    }
  }
  return batch;
}

std::size_t content_length(const std::vector<TokenId>& ids) {
  return !ids.empty() && ids.back() == kEos ? ids.size() - 1 : ids.size();
}

}  // namespace

Batching make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size,
                      std::size_t max_len, std::uint64_t seed) {
  if (batch_size == 0) throw UsageError("batch_size must be at least 1");
  Batching result;
  std::vector<const EncodedPair*> kept;
  kept.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (content_length(pair.source) > max_len || content_length(pair.target) > max_len) {
      ++result.dropped_long;
      continue;
    }
    kept.push_back(&pair);
  }
  if (kept.empty()) {
    throw EmptyDataError("no training pairs left after the length filter (max_len=" +
                         std::to_string(max_len) + ", dropped " +
                         std::to_string(result.dropped_long) + ")");
  }
  Rng rng(seed);
  rng.shuffle(kept);
  for (std::size_t start = 0; start < kept.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, kept.size() - start);
    result.batches.push_back(pack(std::span<const EncodedPair* const>(kept).subspan(start, n)));
  }
  return result;
}

Batch make_single_batch(const EncodedPair& pair) {
  const EncodedPair* row = &pair;
  return pack(std::span<const EncodedPair* const>(&row, 1));
}

}  // namespace mnmt
