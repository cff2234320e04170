#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mnmt/memory.hpp"
#include "mnmt/nmt.hpp"

namespace mnmt {

/// Everything a command may need. Defaults are the full-size settings; the
/// tests and examples override them with a config file.
struct RunConfig {
  // model and training
  std::size_t vocab_size = 30000;
  std::size_t embed_dim = 500;
  std::size_t hidden_dim = 1000;
  std::size_t attention_dim = 0;
  std::size_t beam = 12;
  std::size_t max_decode_len = 0;
  std::size_t batch_size = 80;
  std::size_t max_len = 50;
  std::size_t steps = 10000;
  double lr = 0.0005;
  double init_scale = kDefaultInitScale;
  double clip_norm = kDefaultClipNorm;
  std::size_t log_every = 100;

  // memory
  double beta = kDefaultBeta;
  std::size_t k = 3;
  std::size_t memory_epochs = 10;
  double memory_lr = 0.0005;
  std::size_t memory_attention_dim = 0;

  // lexicon
  std::size_t iters = 5;
  double floor = 0.01;

  std::uint64_t seed = 1;

  // files
  std::string src, tgt, vocab_src, vocab_tgt, lexicon, sim_src, sim_tgt, ckpt, mem_ckpt, out;
  std::string hyp, ref;

  /// Sets one key from text. Throws UsageError for unknown keys and
  /// ParseError for malformed values.
  void set(std::string_view key, std::string_view value);

  /// Reads `key=value` lines; blank lines and `#` comments are skipped.
  void load_file(const std::filesystem::path& path);

  /// Checks ranges; throws UsageError.
  void validate() const;

  /// Hyperparameters as `key=value` lines, file paths excluded.
  std::string hyperparameters() const;
  /// Every key, file paths included.
  std::string describe() const;

  static const std::vector<std::string>& keys();
};

}  // namespace mnmt
