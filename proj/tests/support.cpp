#include "support.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mnmt/rng.hpp"
#include "mnmt/translator.hpp"

namespace mnmt::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ ++counter);
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = fs::temp_directory_path() / ("mnmt-test-" + std::to_string(rng.next()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& line : lines) out << line << '\n';
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

std::string join(const Sentence& tokens) {
  std::string line;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) line += ' ';
    line += tokens[i];
  }
  return line;
}

void write_corpus(const ParallelCorpus& corpus, const fs::path& src, const fs::path& tgt) {
  std::vector<std::string> s, t;
  for (const auto& p : corpus.pairs) {
    s.push_back(join(p.source));
    t.push_back(join(p.target));
  }
  write_lines(src, s);
  write_lines(tgt, t);
}

Vocabulary vocab_of(const std::vector<std::string>& words) {
  std::vector<std::string> tokens = {"<pad>", "<s>", "</s>", "<unk>"};
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocabulary::from_tokens(std::move(tokens));
}

NmtConfig tiny_config(std::size_t src_vocab, std::size_t tgt_vocab, std::size_t embed,
                      std::size_t hidden) {
  NmtConfig c;
  c.src_vocab_size = src_vocab;
  c.tgt_vocab_size = tgt_vocab;
  c.embed_dim = embed;
  c.hidden_dim = hidden;
  return c;
}

ParamSet random_params(const NmtConfig& config, std::uint64_t seed, double scale) {
  auto params = init_nmt_params(config, seed, scale);
  init_uniform(params, seed + 1, scale);
  return params;
}

std::vector<TokenId> random_source(std::size_t vocab_size, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < length; ++i) {
    ids.push_back(static_cast<TokenId>(kNumControlTokens + rng.below(vocab_size - kNumControlTokens)));
  }
  ids.push_back(kEos);
  return ids;
}

ParallelCorpus copy_corpus(std::size_t pairs, std::size_t words, std::size_t min_len,
                           std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  ParallelCorpus corpus;
  for (std::size_t n = 0; n < pairs; ++n) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    SentencePair pair;
    for (std::size_t i = 0; i < len; ++i) {
      const auto w = std::to_string(rng.below(words));
      pair.source.push_back("s" + w);
      pair.target.push_back("t" + w);
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

RareWordCorpus rare_word_corpus(std::size_t frequent_pairs, std::size_t frequent_words,
                                std::size_t rare_words, std::uint64_t seed) {
  Rng rng(seed);
  RareWordCorpus out;
  auto frequent = [&](std::size_t len) {
    SentencePair pair;
    for (std::size_t i = 0; i < len; ++i) {
      const auto w = std::to_string(rng.below(frequent_words));
      pair.source.push_back("f" + w);
      pair.target.push_back("g" + w);
    }
    return pair;
  };
  // The rare word sits at a random position inside a frequent-word frame.
  auto with_rare = [&](std::size_t r) {
    auto pair = frequent(4 + rng.below(3));
    const std::size_t at = rng.below(pair.source.size());
    pair.source[at] = "r" + std::to_string(r);
    pair.target[at] = "q" + std::to_string(r);
    return pair;
  };
  for (std::size_t n = 0; n < frequent_pairs; ++n) out.train.pairs.push_back(frequent(4 + rng.below(3)));
  for (std::size_t r = 0; r < rare_words; ++r) {
    out.rare_sources.push_back("r" + std::to_string(r));
    out.rare_targets.push_back("q" + std::to_string(r));
    out.train.pairs.push_back(with_rare(r));
    out.held_out.pairs.push_back(with_rare(r));
  }
  rng.shuffle(out.train.pairs);

  std::map<std::pair<std::string, std::string>, LexicalProb> table;
  for (std::size_t w = 0; w < frequent_words; ++w) {
    table[{"f" + std::to_string(w), "g" + std::to_string(w)}] = {1.0, 1.0};
  }
  for (std::size_t r = 0; r < rare_words; ++r) table[{out.rare_sources[r], out.rare_targets[r]}] = {1.0, 1.0};
  out.lexicon = Lexicon(std::move(table));
  return out;
}

ToyTable toy_em(int iterations) {
  ToyTable t;
  for (int it = 0; it < iterations; ++it) {
    double c_xa = 0, c_ya = 0, c_xb = 0, c_yb = 0;
    // pair 1: x and y each align to a or b
    c_xa += t.xa / (t.xa + t.xb);
    c_xb += t.xb / (t.xa + t.xb);
    c_ya += t.ya / (t.ya + t.yb);
    c_yb += t.yb / (t.ya + t.yb);
    // pair 2: x aligns to a
    c_xa += 1.0;
    t.xa = c_xa / (c_xa + c_ya);
    t.ya = c_ya / (c_xa + c_ya);
    t.xb = c_xb / (c_xb + c_yb);
    t.yb = c_yb / (c_xb + c_yb);
  }
  return t;
}

TrainedModel train_model(const ParallelCorpus& corpus, const NmtConfig& sizes,
                         const TrainOptions& options, std::uint64_t init_seed) {
  std::vector<Sentence> src, tgt;
  for (const auto& p : corpus.pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  TrainedModel model;
  model.src_vocab = build_vocabulary(src, 100000);
  model.tgt_vocab = build_vocabulary(tgt, 100000);
  NmtConfig config = sizes;
  config.src_vocab_size = model.src_vocab.size();
  config.tgt_vocab_size = model.tgt_vocab.size();
  model.params = init_nmt_params(config, init_seed);
  const auto pairs = encode_corpus(corpus, model.src_vocab, model.tgt_vocab);
  model.losses = train_nmt(pairs, model.params, options);
  return model;
}

std::vector<Sentence> translate_all(const ParallelCorpus& corpus, const TrainedModel& model,
                                    std::size_t beam, const MemoryParams* memory,
                                    const Lexicon* lex, std::size_t k) {
  TranslatorResources res;
  res.nmt = &model.params;
  res.src_vocab = &model.src_vocab;
  res.tgt_vocab = &model.tgt_vocab;
  res.memory = memory;
  res.lexicon = lex;
  res.k = k;
  res.beam = beam;
  std::vector<Sentence> out;
  for (const auto& p : corpus.pairs) out.push_back(translate_sentence(p.source, res).tokens);
  return out;
}

std::vector<Sentence> targets_of(const ParallelCorpus& corpus) {
  std::vector<Sentence> out;
  for (const auto& p : corpus.pairs) out.push_back(p.target);
  return out;
}

StepOutput TableModel::step(std::span<const TokenId> prefix, std::span<const double>) const {
  auto it = table_.find(std::vector<TokenId>(prefix.begin(), prefix.end()));
  return {it == table_.end() ? fallback_ : it->second, {}};
}

TableModel greedy_trap_model() {
  auto dist = [](double a, double b, double eos) {
    Vec p(6, 0.0);
    p[kTokA] = a;
    p[kTokB] = b;
    p[kEos] = eos;
    return p;
  };
  const double after_a_eos = std::exp(-1.2) / 0.45;
  const double after_ba_eos = std::exp(-0.9) / (0.42 * 0.98);
  std::map<std::vector<TokenId>, Vec> table;
  table[{}] = dist(0.45, 0.42, 0.13);
  table[{kTokA}] = dist(0.2, 1.0 - 0.2 - after_a_eos, after_a_eos);
  table[{kTokB}] = dist(0.98, 0.01, 0.01);
  table[{kTokB, kTokA}] = dist((1.0 - after_ba_eos) / 2, (1.0 - after_ba_eos) / 2, after_ba_eos);
  return TableModel(std::move(table), dist(1.0 / 3, 1.0 / 3, 1.0 / 3));
}

std::vector<Hypothesis> enumerate_sequences(const StepModel& model, std::size_t max_len) {
  std::vector<Hypothesis> done;
  std::vector<Hypothesis> frontier(1);
  frontier[0].state = model.initial_state();
  while (!frontier.empty()) {
    std::vector<Hypothesis> next;
    for (const auto& h : frontier) {
      const auto out = model.step(h.tokens, h.state);
      for (std::size_t t = 0; t < out.probs.size(); ++t) {
        if (out.probs[t] <= 0.0) continue;
        Hypothesis child = h;
        child.tokens.push_back(static_cast<TokenId>(t));
        child.log_prob += std::log(out.probs[t]);
        child.state = out.next_state;
        child.finished = t == static_cast<std::size_t>(kEos) || child.tokens.size() >= max_len;
        (child.finished ? done : next).push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  return done;
}

}  // namespace mnmt::testing
