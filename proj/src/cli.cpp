#include "mnmt/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "mnmt/bleu.hpp"
#include "mnmt/checkpoint.hpp"
#include "mnmt/config.hpp"
#include "mnmt/corpus.hpp"
#include "mnmt/diagnostics.hpp"
#include "mnmt/error.hpp"
#include "mnmt/lexicon.hpp"
#include "mnmt/memory.hpp"
#include "mnmt/nmt.hpp"
#include "mnmt/translator.hpp"

namespace mnmt {

namespace {

namespace fs = std::filesystem;

// Flag spelling for a config key: underscores become dashes.
std::string flag_for(const std::string& key) {
  if (key == "memory_epochs") return "--epochs";
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

// One subcommand: its config-key flags are collected as text and applied on
// top of the config file once parsing succeeds.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;  // key -> flag text
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void bind(const std::vector<std::string>& keys) {
    app->add_option("--config", config_path, "key=value configuration file");
    for (const auto& key : keys) {
      options[key] = app->add_option(flag_for(key), values[key]);
    }
  }

  RunConfig resolve(std::ostream& err) const {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& [key, option] : options) {
      if (option->count() > 0) config.set(key, values.at(key));
    }
    config.validate();
    err << "resolved config:\n" << config.describe() << "seed: " << config.seed << '\n';
    return config;
  }
};

const std::string& require(const std::string& value, const char* key) {
  if (value.empty()) throw UsageError(std::string("missing required setting ") + flag_for(key));
  return value;
}

std::string join(std::span<const std::string> tokens) {
  std::string line;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) line += ' ';
    line += tokens[i];
  }
  return line;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

Vocabulary load_or_build_vocab(const std::string& path, std::span<const Sentence> side,
                               std::size_t max_size, std::ostream& err) {
  if (fs::exists(path)) return load_vocabulary(path);
  auto vocab = build_vocabulary(side, max_size);
  save_vocabulary(vocab, path);
  err << "built vocabulary " << path << " (" << vocab.size() << " tokens)\n";
  return vocab;
}

std::vector<Sentence> side_of(const ParallelCorpus& corpus, bool source) {
  std::vector<Sentence> side;
  side.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) side.push_back(source ? p.source : p.target);
  return side;
}

Lexicon obtain_lexicon(const RunConfig& config, const ParallelCorpus* corpus, std::ostream& err) {
  if (!config.lexicon.empty()) {
    auto loaded = load_lexicon(config.lexicon);
    if (loaded.duplicates) err << "lexicon: " << loaded.duplicates << " duplicate rows, last kept\n";
    return std::move(loaded.lexicon);
  }
  if (!corpus) throw UsageError("missing required setting --lexicon");
  err << "no --lexicon given; estimating one with IBM Model 1\n";
  return train_ibm1(*corpus, {config.iters, config.floor}).lexicon;
}

std::optional<SimilarWordMap> obtain_similar(const std::string& path, const Vocabulary& vocab,
                                             const char* side, std::ostream& err) {
  if (path.empty()) return std::nullopt;
  auto loaded = load_similar_words(path, vocab);
  if (loaded.dropped_candidates) {
    err << side << " similar words: dropped " << loaded.dropped_candidates
        << " candidates outside the vocabulary\n";
  }
  return std::move(loaded.map);
}

// ---- subcommands ----

int cmd_build_vocab(const RunConfig& config, std::ostream& err) {
  bool wrote = false;
  auto build = [&](const std::string& input, const std::string& output) {
    const auto sentences = load_sentences(input);
    const auto vocab = build_vocabulary(sentences, config.vocab_size);
    save_vocabulary(vocab, output);
    err << "wrote " << output << " (" << vocab.size() << " tokens)\n";
    wrote = true;
  };
  if (!config.src.empty() && !config.vocab_src.empty()) build(config.src, config.vocab_src);
  if (!config.tgt.empty() && !config.vocab_tgt.empty()) build(config.tgt, config.vocab_tgt);
  if (!config.out.empty()) {
    if (config.src.empty() == config.tgt.empty()) {
      throw UsageError("--out needs exactly one of --src or --tgt");
    }
    build(config.src.empty() ? config.tgt : config.src, config.out);
  }
  if (!wrote) throw UsageError("nothing to build: pair --src/--tgt with --vocab-src/--vocab-tgt or --out");
  return kExitOk;
}

int cmd_train_lexicon(const RunConfig& config, std::ostream& err) {
  const auto corpus = load_parallel_corpus(require(config.src, "src"), require(config.tgt, "tgt"));
  const auto result = train_ibm1(corpus, {config.iters, config.floor});
  for (std::size_t i = 0; i < result.log_likelihood_t_given_s.size(); ++i) {
    err << "iteration " << i + 1 << " log-likelihood t|s " << result.log_likelihood_t_given_s[i]
        << " s|t " << result.log_likelihood_s_given_t[i] << '\n';
  }
  save_lexicon(result.lexicon, require(config.out, "out"));
  err << "wrote " << config.out << " (" << result.lexicon.size() << " entries)\n";
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& err) {
  const auto corpus = load_parallel_corpus(require(config.src, "src"), require(config.tgt, "tgt"));
  if (corpus.dropped_empty) err << "dropped " << corpus.dropped_empty << " empty pairs\n";
  const std::string& out = config.out.empty() ? config.ckpt : config.out;
  require(out, "out");
  const auto src_vocab = load_or_build_vocab(require(config.vocab_src, "vocab_src"),
                                             side_of(corpus, true), config.vocab_size, err);
  const auto tgt_vocab = load_or_build_vocab(require(config.vocab_tgt, "vocab_tgt"),
                                             side_of(corpus, false), config.vocab_size, err);

  NmtConfig nmt;
  nmt.src_vocab_size = src_vocab.size();
  nmt.tgt_vocab_size = tgt_vocab.size();
  nmt.embed_dim = config.embed_dim;
  nmt.hidden_dim = config.hidden_dim;
  nmt.attention_dim = config.attention_dim;
  nmt.validate();
  auto params = init_nmt_params(nmt, config.seed, config.init_scale);

  TrainOptions options;
  options.steps = config.steps;
  options.batch_size = config.batch_size;
  options.max_len = config.max_len;
  options.lr = config.lr;
  options.clip_norm = config.clip_norm;
  options.seed = config.seed;
  const auto pairs = encode_corpus(corpus, src_vocab, tgt_vocab);
  train_nmt(pairs, params, options, [&](std::size_t step, double loss) {
    if (config.log_every && (step % config.log_every == 0 || step == config.steps)) {
      err << "step " << step << " loss " << fixed(loss, 6) << '\n';
    }
  });
  save_checkpoint(out, config.hyperparameters(), params.values());
  err << "wrote " << out << " checksum " << hex64(checkpoint_checksum(out)) << '\n';
  return kExitOk;
}

int cmd_train_memory(const RunConfig& config, std::ostream& err) {
  const std::string& ckpt = require(config.ckpt, "ckpt");
  const std::string& out = config.out.empty() ? config.mem_ckpt : config.out;
  require(out, "out");
  const auto before = checkpoint_checksum(ckpt);
  const auto nmt = to_param_set(load_checkpoint(ckpt));
  const auto corpus = load_parallel_corpus(require(config.src, "src"), require(config.tgt, "tgt"));
  const auto src_vocab = load_vocabulary(require(config.vocab_src, "vocab_src"));
  const auto tgt_vocab = load_vocabulary(require(config.vocab_tgt, "vocab_tgt"));
  const auto lex = obtain_lexicon(config, &corpus, err);
  const auto tgt_sim = obtain_similar(config.sim_tgt, tgt_vocab, "target", err);

  const auto nmt_config = infer_nmt_config(nmt);
  const std::size_t att =
      config.memory_attention_dim ? config.memory_attention_dim : nmt_config.resolved_attention_dim();
  auto mparams = init_memory_params(nmt_config, att, config.beta, config.seed, config.init_scale);
  MemoryTrainOptions options;
  options.epochs = config.memory_epochs;
  options.k = config.k;
  options.batch_size = config.batch_size;
  options.lr = config.memory_lr;
  options.clip_norm = config.clip_norm;
  options.seed = config.seed;
  const auto report = train_memory_attention(corpus, src_vocab, tgt_vocab, nmt, mparams, lex,
                                             options, tgt_sim ? &*tgt_sim : nullptr);
  err << "trainable positions " << report.trainable_positions << ", skipped "
      << report.skipped_positions << '\n';
  if (report.no_op) err << "warning: no reference word is reachable from memory; nothing trained\n";
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
    err << "epoch " << e + 1 << " loss " << fixed(report.epoch_losses[e], 6) << '\n';
  }
  save_checkpoint(out, config.hyperparameters(), mparams.params.values());
  const auto after = checkpoint_checksum(ckpt);
  err << "wrote " << out << "; model checkpoint checksum " << hex64(before)
      << (before == after ? " unchanged" : " CHANGED") << '\n';
  if (before != after) throw Error("model checkpoint changed during memory training");
  return kExitOk;
}

int cmd_translate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto nmt = to_param_set(load_checkpoint(require(config.ckpt, "ckpt")));
  const auto src_vocab = load_vocabulary(require(config.vocab_src, "vocab_src"));
  const auto tgt_vocab = load_vocabulary(require(config.vocab_tgt, "vocab_tgt"));
  const auto src_sim = obtain_similar(config.sim_src, src_vocab, "source", err);
  const auto tgt_sim = obtain_similar(config.sim_tgt, tgt_vocab, "target", err);

  std::optional<MemoryParams> memory;
  std::optional<Lexicon> lex;
  if (!config.mem_ckpt.empty()) {
    memory.emplace();
    memory->params = to_param_set(load_checkpoint(config.mem_ckpt));
    memory->beta = config.beta;
    memory->validate();
    lex.emplace(obtain_lexicon(config, nullptr, err));
  }

  TranslatorResources res;
  res.nmt = &nmt;
  res.src_vocab = &src_vocab;
  res.tgt_vocab = &tgt_vocab;
  res.memory = memory ? &*memory : nullptr;
  res.lexicon = lex ? &*lex : nullptr;
  res.src_similar = src_sim ? &*src_sim : nullptr;
  res.tgt_similar = tgt_sim ? &*tgt_sim : nullptr;
  res.k = config.k;
  res.beam = config.beam;
  res.max_len = config.max_decode_len;

  const auto sentences = load_sentences(require(config.src, "src"));
  std::ofstream file;
  if (!config.out.empty()) {
    file.open(config.out);
    if (!file) throw Error("cannot write " + config.out);
  }
  std::ostream& sink = config.out.empty() ? out : file;
  std::size_t substituted = 0;
  for (const auto& sentence : sentences) {
    const auto t = translate_sentence(sentence, res);
    substituted += t.substitutions.size();
    for (const auto& reason : t.oov.skipped) err << "oov: " << reason << '\n';
    sink << join(t.tokens) << '\n';
  }
  err << "translated " << sentences.size() << " sentences, " << substituted
      << " source OOV tokens substituted\n";
  return kExitOk;
}

int cmd_score(const RunConfig& config, bool breakdown, std::ostream& out, std::ostream& err) {
  const auto hyps = load_sentences(require(config.hyp, "hyp"));
  const auto refs = load_sentences(require(config.ref, "ref"));
  if (hyps.size() != refs.size()) {
    throw UsageError("hypothesis and reference files differ in length: " +
                     std::to_string(hyps.size()) + " vs " + std::to_string(refs.size()));
  }
  const auto report = bleu(hyps, refs);
  if (report.degenerate) err << "warning: some n-gram order has no hypothesis n-grams; BLEU is 0\n";
  out << "BLEU: " << fixed(report.bleu, 2) << '\n';
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    out << "p_" << n + 1 << ": " << fixed(report.precisions[n], 4) << '\n';
  }
  out << "BP: " << fixed(report.brevity_penalty, 5) << '\n'
      << "hyp_length: " << report.hyp_length << '\n'
      << "ref_length: " << report.ref_length << '\n'
      << "recalled_words: " << recalled_words(hyps, refs) << '\n';
  if (breakdown) {
    const auto counts = ngram_counts(hyps, refs);
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
      out << "matched_" << n + 1 << ": " << counts.matched[n] << '\n'
          << "total_" << n + 1 << ": " << counts.total[n] << '\n';
    }
  }
  return kExitOk;
}

struct GradcheckFlags {
  std::uint64_t seed = 1;
  std::size_t vocab = 20, embed = 8, hidden = 12, k = 3;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckFlags& flags, std::ostream& out) {
  GradcheckSetup setup;
  setup.seed = flags.seed;
  setup.vocab_size = flags.vocab;
  setup.embed_dim = flags.embed;
  setup.hidden_dim = flags.hidden;
  setup.k = flags.k;
  setup.check.seed = flags.seed;
  const auto report = run_gradcheck(setup);
  auto line = [&](const char* name, const GradCheckResult& r) {
    out << name << ": max_relative_error " << std::scientific << std::setprecision(3)
        << r.max_relative_error << std::defaultfloat << " over " << r.entries_checked
        << " entries (worst " << r.worst_parameter << '[' << r.worst_index << "] analytic "
        << std::scientific << r.worst_analytic << " numeric " << r.worst_numeric
        << std::defaultfloat << ")\n";
  };
  line("nmt", report.nmt);
  line("memory", report.memory);
  const bool ok = report.nmt.max_relative_error < flags.tolerance &&
                  report.memory.max_relative_error < flags.tolerance;
  out << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory-augmented neural machine translation", "mnmt"};
  app.require_subcommand(1);

  const std::vector<std::string> model_keys = {
      "embed_dim", "hidden_dim", "attention_dim", "batch_size", "max_len", "steps", "lr",
      "init_scale", "clip_norm", "log_every", "vocab_size", "seed"};

  std::map<std::string, Command> commands;
  auto make = [&](const std::string& name, const std::string& about,
                  std::vector<std::string> keys) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, about);
    c.bind(keys);
    return c;
  };

  make("build-vocab", "Build vocabularies from corpus files",
       {"src", "tgt", "vocab_src", "vocab_tgt", "out", "vocab_size", "seed"});
  make("train-lexicon", "Estimate a bilingual lexicon with IBM Model 1",
       {"src", "tgt", "iters", "floor", "out", "seed"});
  {
    auto keys = model_keys;
    keys.insert(keys.end(), {"src", "tgt", "vocab_src", "vocab_tgt", "ckpt", "out"});
    make("train", "Train the attention NMT model", keys);
  }
  make("train-memory", "Train memory attention against a frozen NMT checkpoint",
       {"src", "tgt", "vocab_src", "vocab_tgt", "ckpt", "mem_ckpt", "lexicon", "sim_tgt", "beta",
        "k", "memory_epochs", "memory_lr", "memory_attention_dim", "batch_size", "clip_norm",
        "init_scale", "iters", "floor", "seed", "out"});
  make("translate", "Translate sentences, one per line",
       {"src", "vocab_src", "vocab_tgt", "ckpt", "mem_ckpt", "lexicon", "sim_src", "sim_tgt",
        "beta", "k", "beam", "max_decode_len", "seed", "out"});
  Command& score = make("score", "Corpus BLEU and recalled words", {"hyp", "ref", "seed"});
  bool breakdown = false;
  score.app->add_flag("--breakdown", breakdown, "Also print per-order n-gram counts");

  GradcheckFlags gflags;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient self-check");
  gradcheck->add_option("--seed", gflags.seed);
  gradcheck->add_option("--vocab-size", gflags.vocab);
  gradcheck->add_option("--embed-dim", gflags.embed);
  gradcheck->add_option("--hidden-dim", gflags.hidden);
  gradcheck->add_option("--k", gflags.k);
  gradcheck->add_option("--tolerance", gflags.tolerance);

  // CLI11 consumes arguments from the back.
  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (gradcheck->parsed()) {
      err << "resolved config:\nseed=" << gflags.seed << "\nvocab_size=" << gflags.vocab
          << "\nembed_dim=" << gflags.embed << "\nhidden_dim=" << gflags.hidden
          << "\nk=" << gflags.k << "\nseed: " << gflags.seed << '\n';
      return cmd_gradcheck(gflags, out);
    }
    for (auto& [name, command] : commands) {
      if (!command.app->parsed()) continue;
      const RunConfig config = command.resolve(err);
      if (name == "build-vocab") return cmd_build_vocab(config, err);
      if (name == "train-lexicon") return cmd_train_lexicon(config, err);
      if (name == "train") return cmd_train(config, err);
      if (name == "train-memory") return cmd_train_memory(config, err);
      if (name == "translate") return cmd_translate(config, out, err);
      if (name == "score") return cmd_score(config, breakdown, out, err);
    }
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CorruptionError& e) {
    err << "corrupt checkpoint: " << e.what() << '\n';
    return kExitCorrupt;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace mnmt
