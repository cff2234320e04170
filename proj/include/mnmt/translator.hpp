#pragma once

#include <cstddef>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/lexicon.hpp"
#include "mnmt/memory.hpp"
#include "mnmt/nmt.hpp"

namespace mnmt {

/// Everything a sentence translation may use. Memory interpolation is active
/// when both `memory` and `lexicon` are set; OOV substitution when
/// `src_similar` is set.
struct TranslatorResources {
  const ParamSet* nmt = nullptr;
  const Vocabulary* src_vocab = nullptr;
  const Vocabulary* tgt_vocab = nullptr;
  const MemoryParams* memory = nullptr;
  const Lexicon* lexicon = nullptr;
  const SimilarWordMap* src_similar = nullptr;
  const SimilarWordMap* tgt_similar = nullptr;
  std::size_t k = 3;
  std::size_t beam = 12;
  std::size_t max_len = 0;
};

struct Translation {
  Sentence tokens;  // without EOS
  Hypothesis hypothesis;
  std::vector<SubstitutionRecord> substitutions;
  OovInjectionReport oov;
  std::size_t memory_size = 0;
};

Translation translate_sentence(std::span<const std::string> source,
                               const TranslatorResources& resources);

}  // namespace mnmt
