#pragma once

#include <cstddef>
#include <cstdint>

#include "mnmt/optim.hpp"

namespace mnmt {

/// Sizes for the finite-difference self-check on random data.
struct GradcheckSetup {
  std::size_t vocab_size = 20;  // per side, control tokens included
  std::size_t embed_dim = 8;
  std::size_t hidden_dim = 12;
  std::size_t k = 3;
  std::size_t sentences = 3;
  double init_scale = 0.3;
  std::uint64_t seed = 1;
  // Some attention entries have gradients near 1e-9, where float64 rounding
  // alone gives relative errors of 1e-4; hence the wider step and floor.
  GradCheckOptions check{.epsilon = 1e-4, .max_entries_per_tensor = 200, .seed = 0,
                         .denominator_floor = 1e-6};
};

struct GradcheckReport {
  GradCheckResult nmt;     // batch_loss w.r.t. every NMT parameter
  GradCheckResult memory;  // memory-attention loss w.r.t. mem.*
  std::size_t memory_entries = 0;
  std::size_t memory_targets = 0;
};

/// Builds a random model, batch, lexicon and memory from `setup.seed` and
/// compares analytic gradients against central differences.
GradcheckReport run_gradcheck(const GradcheckSetup& setup);

}  // namespace mnmt
