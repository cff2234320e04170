#include "mnmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "mnmt/error.hpp"

namespace mnmt {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(const Sentence& s, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[Ngram(s.begin() + static_cast<std::ptrdiff_t>(i),
                   s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void check_sizes(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  if (hyps.size() != refs.size()) {
    throw UsageError("hypothesis and reference counts differ: " + std::to_string(hyps.size()) +
                     " vs " + std::to_string(refs.size()));
  }
}

}  // namespace

NgramCounts ngram_counts(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  check_sizes(hyps, refs);
  NgramCounts counts;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
      const auto hyp = count_ngrams(hyps[s], n);
      const auto ref = count_ngrams(refs[s], n);
      for (const auto& [gram, c] : hyp) {
        counts.total[n - 1] += c;
        auto it = ref.find(gram);
        if (it != ref.end()) counts.matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  return counts;
}

std::array<double, kBleuOrder> ngram_precisions(std::span<const Sentence> hyps,
                                                std::span<const Sentence> refs) {
  const auto counts = ngram_counts(hyps, refs);
  std::array<double, kBleuOrder> p{};
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    p[n] = counts.total[n] == 0 ? 0.0
                                : static_cast<double>(counts.matched[n]) /
                                      static_cast<double>(counts.total[n]);
  }
  return p;
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len == 0) return 0.0;
  if (hyp_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

BleuReport bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  const auto counts = ngram_counts(hyps, refs);
  BleuReport report;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    report.hyp_length += hyps[s].size();
    report.ref_length += refs[s].size();
  }
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    if (counts.total[n] == 0) report.degenerate = true;
    report.precisions[n] = counts.total[n] == 0 ? 0.0
                                                : static_cast<double>(counts.matched[n]) /
                                                      static_cast<double>(counts.total[n]);
    if (report.precisions[n] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(report.precisions[n]);
    }
  }
  report.brevity_penalty = brevity_penalty(report.hyp_length, report.ref_length);
  report.bleu = any_zero ? 0.0
                         : 100.0 * report.brevity_penalty *
                               std::exp(log_sum / static_cast<double>(kBleuOrder));
  return report;
}

std::size_t recalled_words(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  std::set<std::string> hyp_types;
  std::set<std::string> ref_types;
  for (const auto& s : hyps) hyp_types.insert(s.begin(), s.end());
  for (const auto& s : refs) ref_types.insert(s.begin(), s.end());
  std::size_t n = 0;
  for (const auto& w : hyp_types) n += ref_types.count(w);
  return n;
}

}  // namespace mnmt
