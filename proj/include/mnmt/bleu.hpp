#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "mnmt/corpus.hpp"

namespace mnmt {

inline constexpr std::size_t kBleuOrder = 4;

struct NgramCounts {
  std::array<std::size_t, kBleuOrder> matched{};  // clipped
  std::array<std::size_t, kBleuOrder> total{};    // hypothesis n-grams
};

/// Corpus-level clipped n-gram counts, one reference per hypothesis.
/// Throws UsageError when the lists differ in length.
NgramCounts ngram_counts(std::span<const Sentence> hyps, std::span<const Sentence> refs);

/// p_n = matched_n / total_n (0 when total_n is 0).
std::array<double, kBleuOrder> ngram_precisions(std::span<const Sentence> hyps,
                                                std::span<const Sentence> refs);

/// 1 if hyp_len >= ref_len, exp(1 - ref_len/hyp_len) otherwise, 0 for an
/// empty hypothesis.
double brevity_penalty(std::size_t hyp_len, std::size_t ref_len);

struct BleuReport {
  std::array<double, kBleuOrder> precisions{};
  double brevity_penalty = 0.0;
  double bleu = 0.0;  // 0..100
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  // Some n-gram order had no hypothesis n-grams at all, forcing BLEU to 0.
  bool degenerate = false;
};

/// 100 * BP * exp(mean_n log p_n), and 0 if any p_n is 0 (no smoothing).
BleuReport bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs);

/// Number of word types that occur both in the hypotheses and in the references.
std::size_t recalled_words(std::span<const Sentence> hyps, std::span<const Sentence> refs);

}  // namespace mnmt
