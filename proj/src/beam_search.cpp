#include "mnmt/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mnmt/error.hpp"

namespace mnmt {

namespace {

struct Proposal {
  std::size_t parent;
  TokenId token;
  double log_prob;
};

// Indices of the `k` largest probabilities, ties to the lower index.
// Zero-probability tokens are never proposed.
std::vector<TokenId> top_tokens(const Vec& probs, std::size_t k) {
  std::vector<TokenId> order;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) order.push_back(static_cast<TokenId>(i));
  }
  const auto n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](TokenId a, TokenId b) {
                      if (probs[a] != probs[b]) return probs[a] > probs[b];
                      return a < b;
                    });
  order.resize(n);
  return order;
}

bool better_final(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.normalized_score();
  const double sb = b.normalized_score();
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis beam_search(const StepModel& model, std::size_t beam, std::size_t max_len) {
  if (beam == 0) throw UsageError("beam size must be at least 1");
  if (max_len == 0) throw UsageError("max decode length must be at least 1");

  std::vector<Hypothesis> live(1);
  live[0].state = model.initial_state();
  std::vector<Hypothesis> finished;

  while (!live.empty() && finished.size() < beam) {
    std::vector<Proposal> proposals;
    std::vector<Vec> next_states(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      auto out = model.step(live[h].tokens, live[h].state);
      next_states[h] = std::move(out.next_state);
      for (TokenId token : top_tokens(out.probs, beam)) {
        proposals.push_back({h, token, live[h].log_prob + std::log(out.probs[token])});
      }
    }
    std::stable_sort(proposals.begin(), proposals.end(), [](const Proposal& a, const Proposal& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });
    const std::size_t keep = std::min(proposals.size(), beam - finished.size());
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& p = proposals[i];
      Hypothesis child;
      child.tokens = live[p.parent].tokens;
      child.tokens.push_back(p.token);
      child.log_prob = p.log_prob;
      child.state = next_states[p.parent];
      child.finished = p.token == kEos || child.tokens.size() >= max_len;
      (child.finished ? finished : next).push_back(std::move(child));
    }
    live = std::move(next);
  }

  if (finished.empty()) throw NumericError("beam search produced no hypothesis");
  return *std::min_element(finished.begin(), finished.end(), better_final);
}

Hypothesis greedy_search(const StepModel& model, std::size_t max_len) {
  if (max_len == 0) throw UsageError("max decode length must be at least 1");
  Hypothesis hyp;
  hyp.state = model.initial_state();
  while (!hyp.finished) {
    auto out = model.step(hyp.tokens, hyp.state);
    TokenId best = 0;
    for (std::size_t i = 1; i < out.probs.size(); ++i) {
      if (out.probs[i] > out.probs[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
    }
    hyp.tokens.push_back(best);
    hyp.log_prob += std::log(out.probs[static_cast<std::size_t>(best)]);
    hyp.state = std::move(out.next_state);
    hyp.finished = best == kEos || hyp.tokens.size() >= max_len;
  }
  return hyp;
}

}  // namespace mnmt
