#include "mnmt/translator.hpp"

#include "mnmt/error.hpp"

namespace mnmt {

Translation translate_sentence(std::span<const std::string> source,
                               const TranslatorResources& res) {
  if (!res.nmt || !res.src_vocab || !res.tgt_vocab) {
    throw UsageError("translation needs model parameters and both vocabularies");
  }
  Translation out;
  Sentence tokens(source.begin(), source.end());
  if (res.src_similar) {
    auto substitution = apply_oov_substitution(tokens, *res.src_vocab, *res.src_similar);
    tokens = std::move(substitution.tokens);
    out.substitutions = std::move(substitution.records);
  }
  const auto ids = encode_sentence(tokens, *res.src_vocab, true);
  const std::size_t max_len = res.max_len ? res.max_len : default_max_decode_len(tokens.size());
  EncodedSource encoded = encode(ids, *res.nmt);

  if (!res.memory || !res.lexicon) {
    NmtStepModel model(*res.nmt, std::move(encoded));
    out.hypothesis = beam_search(model, res.beam, max_len);
    out.tokens = decode_sentence(out.hypothesis.tokens, *res.tgt_vocab);
    return out;
  }

  MergedMemory memory = merge_memory(
      build_local_memory(tokens, encoded, *res.lexicon, *res.tgt_vocab, res.k, res.tgt_similar));
  if (res.tgt_similar && !out.substitutions.empty()) {
    memory = inject_oov_targets(std::move(memory), out.substitutions, encoded, *res.lexicon,
                                *res.tgt_vocab, *res.tgt_similar, res.k, &out.oov);
  }
  out.memory_size = memory.size();
  const MemoryHook hook(memory, *res.memory, *res.nmt);
  NmtStepModel model(*res.nmt, std::move(encoded), &hook);
  out.hypothesis = beam_search(model, res.beam, max_len);
  for (TokenId id : out.hypothesis.tokens) {
    if (id == kEos) break;
    out.tokens.push_back(hook.label(id, *res.tgt_vocab));
  }
  return out;
}

}  // namespace mnmt
