#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mnmt/corpus.hpp"

namespace mnmt {

struct LexicalProb {
  double p_t_given_s = 0.0;
  double p_s_given_t = 0.0;
};

struct LexicalCandidate {
  std::string target;
  double p_t_given_s = 0.0;
};

/// Global memory: source->target word mappings in both conditional directions.
/// Immutable once built.
class Lexicon {
 public:
  using Key = std::pair<std::string, std::string>;

  Lexicon() = default;
  /// Validates ranges and per-word mass, then builds sorted candidate lists.
  explicit Lexicon(std::map<Key, LexicalProb> entries);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<Key, LexicalProb>& entries() const { return entries_; }

  std::optional<LexicalProb> find(std::string_view source, std::string_view target) const;

  /// All targets of `source`, by descending p(t|s), ties by target string.
  const std::vector<LexicalCandidate>& candidates(std::string_view source) const;

 private:
  std::map<Key, LexicalProb> entries_;
  std::unordered_map<std::string, std::vector<LexicalCandidate>> by_source_;
};

struct Ibm1Options {
  std::size_t iterations = 5;
  double prob_floor = 0.01;
};

struct Ibm1Result {
  Lexicon lexicon;
  // Corpus log-likelihood after each iteration, per direction.
  std::vector<double> log_likelihood_t_given_s;
  std::vector<double> log_likelihood_s_given_t;
};

/// Translation table from IBM Model 1 EM in one direction:
/// table[(from, to)] = p(to | from). No NULL word.
using TranslationTable = std::map<std::pair<std::string, std::string>, double>;

struct Ibm1Direction {
  TranslationTable table;
  std::vector<double> log_likelihood;
};

/// Runs EM estimating p(to|from) where each pair is (from-sentence, to-sentence).
Ibm1Direction train_ibm1_direction(
    const std::vector<std::pair<const Sentence*, const Sentence*>>& pairs,
    std::size_t iterations);

/// Both directions of IBM Model 1; entries whose two probabilities are both
/// below `prob_floor` are dropped. Throws EmptyDataError on an empty corpus.
Ibm1Result train_ibm1(const ParallelCorpus& corpus, const Ibm1Options& options);

struct LexiconLoad {
  Lexicon lexicon;
  std::size_t duplicates = 0;
};

/// TSV: source, target, p(t|s), p(s|t). Duplicate pairs keep the last row.
LexiconLoad load_lexicon(const std::filesystem::path& path);

/// Writes TSV rows with 6-decimal probabilities, sorted by (source, target).
void save_lexicon(const Lexicon& lex, const std::filesystem::path& path);

/// Top-k targets of `source`; empty for unknown sources.
std::vector<LexicalCandidate> lexicon_lookup(const Lexicon& lex, std::string_view source,
                                             std::size_t k);

}  // namespace mnmt
