#include "mnmt/diagnostics.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>

#include "mnmt/corpus.hpp"
#include "mnmt/error.hpp"
#include "mnmt/lexicon.hpp"
#include "mnmt/memory.hpp"
#include "mnmt/nmt.hpp"
#include "mnmt/rng.hpp"

namespace mnmt {

namespace {

Vocabulary numbered_vocab(char prefix, std::size_t size) {
  std::vector<std::string> tokens = {std::string(Vocabulary::kPadToken),
                                     std::string(Vocabulary::kBosToken),
                                     std::string(Vocabulary::kEosToken),
                                     std::string(Vocabulary::kUnkToken)};
  for (std::size_t i = kNumControlTokens; i < size; ++i) {
    tokens.push_back(std::string(1, prefix) + std::to_string(i));
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

Sentence random_sentence(const Vocabulary& vocab, std::size_t length, Rng& rng) {
  Sentence out;
  for (std::size_t i = 0; i < length; ++i) {
    const auto id = kNumControlTokens + rng.below(vocab.size() - kNumControlTokens);
    out.push_back(vocab.token(static_cast<TokenId>(id)));
  }
  return out;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckSetup& setup) {
  if (setup.vocab_size <= kNumControlTokens + 1) {
    throw UsageError("gradcheck vocabulary must hold at least two ordinary words");
  }
  Rng rng(setup.seed);
  const auto src_vocab = numbered_vocab('s', setup.vocab_size);
  const auto tgt_vocab = numbered_vocab('t', setup.vocab_size);

  ParallelCorpus corpus;
  for (std::size_t n = 0; n < setup.sentences; ++n) {
    corpus.pairs.push_back({random_sentence(src_vocab, 2 + rng.below(4), rng),
                            random_sentence(tgt_vocab, 2 + rng.below(4), rng)});
  }

  NmtConfig config;
  config.src_vocab_size = setup.vocab_size;
  config.tgt_vocab_size = setup.vocab_size;
  config.embed_dim = setup.embed_dim;
  config.hidden_dim = setup.hidden_dim;
  auto nmt = init_nmt_params(config, rng.next(), setup.init_scale);
  // The attention vector starts at zero; a random one exercises its gradient.
  init_uniform(nmt, rng.next(), setup.init_scale);

  GradcheckReport report;
  const auto pairs = encode_corpus(corpus, src_vocab, tgt_vocab);
  const auto batching = make_batches(pairs, pairs.size(), 64, rng.next());
  const Batch& batch = batching.batches.front();
  report.nmt = grad_check(
      [&](const ParamSet& p, TensorMap* g) { return batch_loss(batch, p, g); }, nmt, setup.check);

  // Lexicon: each source word of the first pair points at every target word
  // of that pair, so every reference position has a memory slot.
  const SentencePair& pair = corpus.pairs.front();
  std::map<std::pair<std::string, std::string>, LexicalProb> table;
  for (const auto& s : pair.source) {
    for (const auto& t : pair.target) {
      const double share =
          1.0 / static_cast<double>(std::max(pair.source.size(), pair.target.size()) + 1);
      table[{s, t}] = {share * (0.5 + 0.5 * rng.uniform()), share * (0.5 + 0.5 * rng.uniform())};
    }
  }
  const Lexicon lex(std::move(table));
  const std::size_t k = std::max(setup.k, pair.target.size());
  const auto example = prepare_memory_example(pair, src_vocab, tgt_vocab, nmt, lex, k);
  report.memory_entries = example.memory.size();
  for (const auto& t : example.targets) report.memory_targets += t.has_value();

  auto mparams = init_memory_params(config, setup.hidden_dim, kDefaultBeta, rng.next(), setup.init_scale);
  init_uniform(mparams.params, rng.next(), setup.init_scale);
  report.memory = grad_check(
      [&](const ParamSet& p, TensorMap* g) { return memory_example_loss(example, p, nmt, 1.0, g); },
      mparams.params, setup.check);
  return report;
}

}  // namespace mnmt
