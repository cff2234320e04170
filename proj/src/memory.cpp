#include "mnmt/memory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mnmt/error.hpp"
#include "mnmt/kernels.hpp"
#include "mnmt/rng.hpp"

namespace mnmt {

namespace {

constexpr const char* kMemV = "mem.v";
constexpr const char* kMemWs = "mem.Ws";
constexpr const char* kMemWu = "mem.Wu";
constexpr const char* kMemWy = "mem.Wy";
constexpr const char* kTgtEmbed = "tgt_embed";

const std::vector<std::string>& no_words() {
  static const std::vector<std::string> empty;
  return empty;
}

std::optional<TokenId> vocab_id_of(const Vocabulary& vocab, const std::string& word) {
  if (!vocab.contains(word)) return std::nullopt;
  return vocab.id(word);
}

// First in-vocabulary stand-in for an OOV target word.
std::optional<TokenId> borrowed_embedding(const std::string& word, const Vocabulary& tgt_vocab,
                                          const SimilarWordMap& similar) {
  for (const auto& candidate : similar.candidates(word)) {
    if (tgt_vocab.contains(candidate)) return tgt_vocab.id(candidate);
  }
  return std::nullopt;
}

}  // namespace

std::size_t SimilarWordMap::add(const std::string& word, std::span<const std::string> candidates,
                                const Vocabulary& vocab) {
  auto& list = map_[word];
  std::size_t dropped = 0;
  for (const auto& candidate : candidates) {
    if (!vocab.contains(candidate) ||
        std::find(list.begin(), list.end(), candidate) != list.end()) {
      ++dropped;
      continue;
    }
    list.push_back(candidate);
  }
  return dropped;
}

const std::vector<std::string>& SimilarWordMap::candidates(const std::string& word) const {
  auto it = map_.find(word);
  return it == map_.end() ? no_words() : it->second;
}

SimilarWordLoad load_similar_words(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  SimilarWordLoad result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!is_valid_utf8(line)) {
      throw EncodingError(path.string() + ":" + std::to_string(line_no) + ": invalid UTF-8");
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields[0].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected a word followed by at least one candidate");
    }
    result.dropped_candidates +=
        result.map.add(fields[0], std::span<const std::string>(fields).subspan(1), vocab);
  }
  return result;
}

Substitution apply_oov_substitution(std::span<const std::string> tokens, const Vocabulary& vocab,
                                    const SimilarWordMap& similar) {
  Substitution out;
  out.tokens.assign(tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    if (vocab.contains(out.tokens[i])) continue;
    SubstitutionRecord record;
    record.position = i;
    record.original = out.tokens[i];
    for (const auto& candidate : similar.candidates(record.original)) {
      if (std::find(out.tokens.begin(), out.tokens.end(), candidate) == out.tokens.end()) {
        record.substitute = candidate;
        break;
      }
    }
    out.tokens[i] = record.substitute ? *record.substitute : std::string(Vocabulary::kUnkToken);
    out.records.push_back(std::move(record));
  }
  return out;
}

std::vector<LocalMemoryEntry> build_local_memory(std::span<const std::string> tokens,
                                                 const EncodedSource& enc, const Lexicon& lex,
                                                 const Vocabulary& tgt_vocab, std::size_t k,
                                                 const SimilarWordMap* tgt_similar) {
  std::vector<LocalMemoryEntry> entries;
  const std::size_t n = std::min(tokens.size(), enc.length());
  for (std::size_t i = 0; i < n; ++i) {
    if (!enc.mask[i]) continue;
    const auto& token = tokens[i];
    if (token == Vocabulary::kEosToken || token == Vocabulary::kPadToken) continue;
    for (const auto& candidate : lexicon_lookup(lex, token, k)) {
      LocalMemoryEntry entry;
      entry.label = candidate.target;
      entry.vocab_id = vocab_id_of(tgt_vocab, candidate.target);
      if (entry.vocab_id) {
        entry.embed_id = *entry.vocab_id;
      } else {
        auto borrowed = tgt_similar ? borrowed_embedding(candidate.target, tgt_vocab, *tgt_similar)
                                    : std::nullopt;
        if (!borrowed) continue;
        entry.embed_id = *borrowed;
      }
      entry.position = i;
      const auto row = enc.states.row(i);
      entry.hidden.assign(row.begin(), row.end());
      entry.p_t_given_s = candidate.p_t_given_s;
      entry.p_s_given_t = lex.find(token, candidate.target)->p_s_given_t;
      entries.push_back(std::move(entry));
    }
  }
  return entries;
}

std::optional<std::size_t> MergedMemory::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void MergedMemory::add(MemoryEntry entry) {
  if (index_.count(entry.label)) throw Error("memory already holds label '" + entry.label + "'");
  index_.emplace(entry.label, entries_.size());
  entries_.push_back(std::move(entry));
}

void MergedMemory::relabel(std::size_t k, std::string label, std::optional<TokenId> vocab_id) {
  if (index_.count(label)) throw Error("memory already holds label '" + label + "'");
  index_.erase(entries_[k].label);
  index_.emplace(label, k);
  entries_[k].label = std::move(label);
  entries_[k].vocab_id = vocab_id;
}

std::vector<std::size_t> MergedMemory::oov_entries() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (!entries_[k].vocab_id) out.push_back(k);
  }
  return out;
}

MergedMemory merge_memory(std::span<const LocalMemoryEntry> entries) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const LocalMemoryEntry*>> groups;
  for (const auto& entry : entries) {
    auto [it, inserted] = groups.try_emplace(entry.label);
    if (inserted) order.push_back(entry.label);
    it->second.push_back(&entry);
  }
  MergedMemory memory;
  for (const auto& label : order) {
    const auto& group = groups.at(label);
    double total = 0.0;
    for (const auto* e : group) total += e->p_s_given_t;
    MemoryEntry merged;
    merged.label = label;
    merged.vocab_id = group.front()->vocab_id;
    merged.embed_id = group.front()->embed_id;
    merged.blended.assign(group.front()->hidden.size(), 0.0);
    for (const auto* e : group) {
      const double weight = total > 0.0 ? e->p_s_given_t / total
                                        : 1.0 / static_cast<double>(group.size());
      axpy(weight, e->hidden, merged.blended);
    }
    memory.add(std::move(merged));
  }
  return memory;
}

MergedMemory inject_oov_targets(MergedMemory memory, std::span<const SubstitutionRecord> records,
                                const EncodedSource& enc, const Lexicon& lex,
                                const Vocabulary& tgt_vocab, const SimilarWordMap& tgt_similar,
                                std::size_t k, OovInjectionReport* report) {
  OovInjectionReport local;
  OovInjectionReport& rep = report ? *report : local;
  for (const auto& record : records) {
    if (!record.resolved()) continue;
    if (record.position >= enc.length()) {
      throw DimensionError("substitution at position " + std::to_string(record.position) +
                           " beyond the encoded source");
    }
    const auto translations = lexicon_lookup(lex, record.original, k);
    if (translations.empty()) {
      rep.skipped.push_back("'" + record.original + "': no lexicon entry");
      continue;
    }
    const auto row = enc.states.row(record.position);
    for (const auto& translation : translations) {
      if (memory.find(translation.target)) continue;
      auto vocab_id = vocab_id_of(tgt_vocab, translation.target);
      if (vocab_id) {
        memory.add({translation.target, vocab_id, *vocab_id, Vec(row.begin(), row.end())});
        ++rep.added;
        continue;
      }
      auto borrowed = borrowed_embedding(translation.target, tgt_vocab, tgt_similar);
      if (!borrowed) {
        rep.skipped.push_back("'" + record.original + "' -> '" + translation.target +
                              "': no in-vocabulary similar target word");
        continue;
      }
      if (auto slot = memory.find(tgt_vocab.token(*borrowed))) {
        memory.relabel(*slot, translation.target, std::nullopt);
        ++rep.relabeled;
      } else {
        memory.add({translation.target, std::nullopt, *borrowed, Vec(row.begin(), row.end())});
        ++rep.added;
      }
    }
  }
  return memory;
}

void MemoryParams::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw NumericError("interpolation factor beta=" + std::to_string(beta) + " outside [0,1]");
  }
}

MemoryParams init_memory_params(const NmtConfig& nmt, std::size_t attention_dim, double beta,
                                std::uint64_t seed, double scale) {
  if (attention_dim == 0) throw UsageError("memory attention_dim must be positive");
  MemoryParams m;
  m.beta = beta;
  m.validate();
  const std::size_t e = nmt.embed_dim;
  const std::size_t h = nmt.hidden_dim;
  m.params.add(kMemV, Tensor({attention_dim}));
  m.params.add(kMemWs, Tensor({attention_dim, h}));
  m.params.add(kMemWu, Tensor({attention_dim, e + 2 * h}));
  m.params.add(kMemWy, Tensor({attention_dim, e}));
  init_uniform(m.params, seed, scale);
  m.params.get(kMemV).fill(0.0);
  return m;
}

MemoryScorer::MemoryScorer(const MergedMemory& memory, const ParamSet& mem_params,
                           const Tensor& tgt_embed)
    : params_(mem_params), tgt_embed_(tgt_embed) {
  if (memory.empty()) throw DimensionError("memory attention over an empty memory");
  const Tensor& wu = params_.get(kMemWu);
  const std::size_t e = tgt_embed.cols();
  const std::size_t width = wu.cols();
  units_ = Tensor({memory.size(), width});
  keys_ = Tensor({memory.size(), wu.rows()});
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const auto& entry = memory.entry(k);
    if (e + entry.blended.size() != width) {
      throw DimensionError("memory unit width " + std::to_string(e + entry.blended.size()) +
                           " does not match mem.Wu " + shape_string(wu.shape()));
    }
    const auto embed = tgt_embed.row(static_cast<std::size_t>(entry.embed_id));
    auto unit = units_.row(k);
    std::copy(embed.begin(), embed.end(), unit.begin());
    std::copy(entry.blended.begin(), entry.blended.end(), unit.begin() + static_cast<std::ptrdiff_t>(e));
    gemv_acc(wu, unit, keys_.row(k));
  }
}

Vec MemoryScorer::attention(std::span<const double> s_prev, TokenId y_prev_embed,
                            Tensor* hidden) const {
  const Tensor& v = params_.get(kMemV);
  const std::size_t a = v.size();
  Vec query(a, 0.0);
  gemv_acc(params_.get(kMemWs), s_prev, query);
  gemv_acc(params_.get(kMemWy), tgt_embed_.row(static_cast<std::size_t>(y_prev_embed)), query);
  if (hidden) *hidden = Tensor({size(), a});
  Vec scores(size());
  Vec act(a);
  for (std::size_t k = 0; k < size(); ++k) {
    const auto key = keys_.row(k);
    for (std::size_t i = 0; i < a; ++i) act[i] = std::tanh(query[i] + key[i]);
    scores[k] = dot(v.values(), act);
    if (hidden) std::copy(act.begin(), act.end(), hidden->row(k).begin());
  }
  return softmax(scores);
}

double MemoryScorer::nll(std::span<const double> s_prev, TokenId y_prev_embed, std::size_t target,
                         double weight, TensorMap* grads) const {
  Tensor hidden;
  const Vec alpha = attention(s_prev, y_prev_embed, grads ? &hidden : nullptr);
  const double loss = -std::log(alpha[target]);
  if (!grads) return loss;

  const Tensor& v = params_.get(kMemV);
  const std::size_t a = v.size();
  Tensor& gv = grads->at(kMemV);
  Tensor& gws = grads->at(kMemWs);
  Tensor& gwu = grads->at(kMemWu);
  Tensor& gwy = grads->at(kMemWy);
  Vec d_query(a, 0.0);
  Vec d_act(a);
  for (std::size_t k = 0; k < size(); ++k) {
    const double d_score = weight * (alpha[k] - (k == target ? 1.0 : 0.0));
    if (d_score == 0.0) continue;
    const auto act = hidden.row(k);
    axpy(d_score, act, gv.values());
    for (std::size_t i = 0; i < a; ++i) {
      d_act[i] = d_score * v[i] * (1.0 - act[i] * act[i]);
      d_query[i] += d_act[i];
    }
    outer_acc(gwu, d_act, units_.row(k));
  }
  outer_acc(gws, d_query, s_prev);
  outer_acc(gwy, d_query, tgt_embed_.row(static_cast<std::size_t>(y_prev_embed)));
  return loss;
}

Vec memory_attention(std::span<const double> s_prev, TokenId y_prev_embed,
                     const MergedMemory& memory, const MemoryParams& mparams,
                     const ParamSet& nmt_params) {
  return MemoryScorer(memory, mparams.params, nmt_params.get(kTgtEmbed)).attention(s_prev, y_prev_embed);
}

Vec interpolate_posterior(std::span<const double> p_nmt, std::span<const double> alpha,
                          const MergedMemory& memory, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw NumericError("interpolation factor beta=" + std::to_string(beta) + " outside [0,1]");
  }
  if (memory.empty()) return Vec(p_nmt.begin(), p_nmt.end());
  if (alpha.size() != memory.size()) {
    throw DimensionError("memory attention has " + std::to_string(alpha.size()) +
                         " weights for " + std::to_string(memory.size()) + " entries");
  }
  const auto oov = memory.oov_entries();
  Vec out(p_nmt.size() + oov.size());
  for (std::size_t w = 0; w < p_nmt.size(); ++w) out[w] = (1.0 - beta) * p_nmt[w];
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const auto& entry = memory.entry(k);
    if (!entry.vocab_id) continue;
    const auto w = static_cast<std::size_t>(*entry.vocab_id);
    if (w >= p_nmt.size()) throw DimensionError("memory label id outside the NMT vocabulary");
    out[w] = beta * alpha[k] + (1.0 - beta) * p_nmt[w];
  }
  for (std::size_t j = 0; j < oov.size(); ++j) out[p_nmt.size() + j] = beta * alpha[oov[j]];
  return out;
}

MemoryHook::MemoryHook(const MergedMemory& memory, const MemoryParams& mparams,
                       const ParamSet& nmt_params)
    : memory_(memory),
      mparams_(mparams),
      vocab_size_(nmt_params.get(kTgtEmbed).rows()),
      oov_(memory.oov_entries()) {
  mparams_.validate();
  if (!memory_.empty()) scorer_.emplace(memory_, mparams_.params, nmt_params.get(kTgtEmbed));
}

TokenId MemoryHook::embedding_id(TokenId token) const {
  if (token >= 0 && static_cast<std::size_t>(token) < vocab_size_) return token;
  const std::size_t j = static_cast<std::size_t>(token) - vocab_size_;
  if (j >= oov_.size()) throw DimensionError("token id " + std::to_string(token) + " unknown to the memory");
  return memory_.entry(oov_[j]).embed_id;
}

Vec MemoryHook::transform(std::span<const double> p_nmt, std::span<const double> s_prev,
                          TokenId y_prev_embedding) const {
  if (!scorer_) return Vec(p_nmt.begin(), p_nmt.end());
  const Vec alpha = scorer_->attention(s_prev, y_prev_embedding);
  return interpolate_posterior(p_nmt, alpha, memory_, mparams_.beta);
}

std::string MemoryHook::label(TokenId token, const Vocabulary& tgt_vocab) const {
  if (token >= 0 && static_cast<std::size_t>(token) < vocab_size_) return tgt_vocab.token(token);
  const std::size_t j = static_cast<std::size_t>(token) - vocab_size_;
  if (j >= oov_.size()) throw DimensionError("token id " + std::to_string(token) + " unknown to the memory");
  return memory_.entry(oov_[j]).label;
}

MemoryExample prepare_memory_example(const SentencePair& pair, const Vocabulary& src_vocab,
                                     const Vocabulary& tgt_vocab, const ParamSet& nmt_params,
                                     const Lexicon& lex, std::size_t k,
                                     const SimilarWordMap* tgt_similar) {
  const auto source = encode_sentence(pair.source, src_vocab, true);
  const auto target = encode_sentence(pair.target, tgt_vocab, true);
  auto trace = teacher_forced_trace(source, target, nmt_params);
  MemoryExample example;
  example.memory = merge_memory(
      build_local_memory(pair.source, trace.encoded, lex, tgt_vocab, k, tgt_similar));
  example.states = std::move(trace.states);
  example.previous = std::move(trace.previous);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::string& word =
        i < pair.target.size() ? pair.target[i] : std::string(Vocabulary::kEosToken);
    example.targets.push_back(example.memory.find(word));
  }
  return example;
}

double memory_example_loss(const MemoryExample& example, const ParamSet& mem_params,
                           const ParamSet& nmt_params, double weight, TensorMap* grads) {
  if (example.memory.empty()) return 0.0;
  const MemoryScorer scorer(example.memory, mem_params, nmt_params.get(kTgtEmbed));
  double loss = 0.0;
  for (std::size_t i = 0; i < example.targets.size(); ++i) {
    if (!example.targets[i]) continue;
    loss += scorer.nll(example.states[i], example.previous[i], *example.targets[i], weight, grads);
  }
  return loss;
}

MemoryTrainReport train_memory_attention(const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                                         const Vocabulary& tgt_vocab, const ParamSet& nmt_params,
                                         MemoryParams& mparams, const Lexicon& lex,
                                         const MemoryTrainOptions& options,
                                         const SimilarWordMap* tgt_similar) {
  if (lex.empty()) throw EmptyDataError("memory training needs a non-empty lexicon");
  if (options.batch_size == 0) throw UsageError("batch_size must be at least 1");
  mparams.validate();

  MemoryTrainReport report;
  std::vector<MemoryExample> examples;
  examples.reserve(corpus.pairs.size());
  for (const auto& pair : corpus.pairs) {
    auto example = prepare_memory_example(pair, src_vocab, tgt_vocab, nmt_params, lex, options.k,
                                          tgt_similar);
    for (const auto& t : example.targets) {
      if (t) ++report.trainable_positions;
      else ++report.skipped_positions;
    }
    examples.push_back(std::move(example));
  }
  if (report.trainable_positions == 0) {
    report.no_op = true;
    return report;
  }

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  AdamOptions adam;
  adam.lr = options.lr;
  Rng rng(options.seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::size_t positions = 0;
      for (std::size_t i = start; i < end; ++i) {
        for (const auto& t : examples[order[i]].targets) positions += t.has_value();
      }
      if (positions == 0) continue;
      const double weight = 1.0 / static_cast<double>(positions);
      TensorMap grads = mparams.params.zeros_like();
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += memory_example_loss(examples[order[i]], mparams.params, nmt_params, weight, &grads);
      }
      clip_global_norm(grads, options.clip_norm);
      adam_step(mparams.params, grads, adam);
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(report.trainable_positions));
  }
  return report;
}

}  // namespace mnmt
