#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/tensor.hpp"

namespace mnmt {

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  Vec state;
  bool finished = false;

  /// Length-normalized log-probability used to rank finished hypotheses.
  double normalized_score() const {
    return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size());
  }
};

struct StepOutput {
  Vec probs;       // distribution over the next token
  Vec next_state;  // state handed to every child of this prefix
};

/// Source of next-token distributions for a prefix. The NMT decoder is one;
/// tests plug in hand-written tables.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual Vec initial_state() const = 0;
  virtual StepOutput step(std::span<const TokenId> prefix, std::span<const double> state) const = 0;
};

/// Beam search over a StepModel.
///
/// Each live hypothesis proposes its `beam` most probable tokens (ties to the
/// lower id); all proposals are ranked by accumulated log-probability and the
/// best `beam - |finished|` survive. A survivor ending in EOS, or reaching
/// `max_len` tokens, is set aside as finished. The search stops once `beam`
/// hypotheses are finished or none are live; the finished hypothesis with the
/// best length-normalized score wins.
Hypothesis beam_search(const StepModel& model, std::size_t beam, std::size_t max_len);

/// Argmax decoding until EOS or `max_len` tokens.
Hypothesis greedy_search(const StepModel& model, std::size_t max_len);

}  // namespace mnmt
