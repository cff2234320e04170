#include "mnmt/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mnmt/error.hpp"

namespace mnmt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError("config key '" + std::string(key) + "': '" + std::string(text) +
                     "' is not a non-negative integer");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  std::string s(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(value)) {
    throw ParseError("config key '" + std::string(key) + "': '" + s + "' is not a number");
  }
  return value;
}

// Round-trippable text for doubles.
std::string real_text(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = {
      "vocab_size", "embed_dim", "hidden_dim", "attention_dim", "beam", "max_decode_len",
      "batch_size", "max_len", "steps", "lr", "init_scale", "clip_norm", "log_every",
      "beta", "k", "memory_epochs", "memory_lr", "memory_attention_dim", "iters", "floor",
      "seed", "src", "tgt", "vocab_src", "vocab_tgt", "lexicon", "sim_src", "sim_tgt",
      "ckpt", "mem_ckpt", "out", "hyp", "ref"};
  return all;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto sz = [&](std::size_t& field) { field = parse_integer<std::size_t>(key, value); };
  auto real = [&](double& field) { field = parse_real(key, value); };
  auto text = [&](std::string& field) { field = std::string(value); };
  if (key == "vocab_size") sz(vocab_size);
  else if (key == "embed_dim") sz(embed_dim);
  else if (key == "hidden_dim") sz(hidden_dim);
  else if (key == "attention_dim") sz(attention_dim);
  else if (key == "beam") sz(beam);
  else if (key == "max_decode_len") sz(max_decode_len);
  else if (key == "batch_size") sz(batch_size);
  else if (key == "max_len") sz(max_len);
  else if (key == "steps") sz(steps);
  else if (key == "lr") real(lr);
  else if (key == "init_scale") real(init_scale);
  else if (key == "clip_norm") real(clip_norm);
  else if (key == "log_every") sz(log_every);
  else if (key == "beta") real(beta);
  else if (key == "k") sz(k);
  else if (key == "memory_epochs") sz(memory_epochs);
  else if (key == "memory_lr") real(memory_lr);
  else if (key == "memory_attention_dim") sz(memory_attention_dim);
  else if (key == "iters") sz(iters);
  else if (key == "floor") real(floor);
  else if (key == "seed") seed = parse_integer<std::uint64_t>(key, value);
  else if (key == "src") text(src);
  else if (key == "tgt") text(tgt);
  else if (key == "vocab_src") text(vocab_src);
  else if (key == "vocab_tgt") text(vocab_tgt);
  else if (key == "lexicon") text(lexicon);
  else if (key == "sim_src") text(sim_src);
  else if (key == "sim_tgt") text(sim_tgt);
  else if (key == "ckpt") text(ckpt);
  else if (key == "mem_ckpt") text(mem_ckpt);
  else if (key == "out") text(out);
  else if (key == "hyp") text(hyp);
  else if (key == "ref") text(ref);
  else throw UsageError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
}

void RunConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw UsageError(std::string(name) + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(beam, "beam");
  positive(batch_size, "batch_size");
  positive(max_len, "max_len");
  positive(k, "k");
  positive(iters, "iters");
  if (vocab_size < 5) throw UsageError("vocab_size must be at least 5");
  if (!(lr > 0.0) || !(memory_lr > 0.0)) throw UsageError("learning rates must be positive");
  if (!(init_scale >= 0.0)) throw UsageError("init_scale must be non-negative");
  if (!(clip_norm > 0.0)) throw UsageError("clip_norm must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("beta must lie in [0,1]");
  if (!(floor >= 0.0 && floor <= 1.0)) throw UsageError("floor must lie in [0,1]");
}

std::string RunConfig::hyperparameters() const {
  std::ostringstream out;
  out << "vocab_size=" << vocab_size << '\n'
      << "embed_dim=" << embed_dim << '\n'
      << "hidden_dim=" << hidden_dim << '\n'
      << "attention_dim=" << attention_dim << '\n'
      << "beam=" << beam << '\n'
      << "max_decode_len=" << max_decode_len << '\n'
      << "batch_size=" << batch_size << '\n'
      << "max_len=" << max_len << '\n'
      << "steps=" << steps << '\n'
      << "lr=" << real_text(lr) << '\n'
      << "init_scale=" << real_text(init_scale) << '\n'
      << "clip_norm=" << real_text(clip_norm) << '\n'
      << "beta=" << real_text(beta) << '\n'
      << "k=" << k << '\n'
      << "memory_epochs=" << memory_epochs << '\n'
      << "memory_lr=" << real_text(memory_lr) << '\n'
      << "memory_attention_dim=" << memory_attention_dim << '\n'
      << "iters=" << iters << '\n'
      << "floor=" << real_text(floor) << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

std::string RunConfig::describe() const {
  std::ostringstream text;
  text << hyperparameters();
  const std::pair<const char*, const std::string*> paths[] = {
      {"src", &src},         {"tgt", &tgt},         {"vocab_src", &vocab_src},
      {"vocab_tgt", &vocab_tgt}, {"lexicon", &lexicon}, {"sim_src", &sim_src},
      {"sim_tgt", &sim_tgt}, {"ckpt", &ckpt},       {"mem_ckpt", &mem_ckpt},
      {"out", &out}, {"hyp", &hyp},         {"ref", &ref}};
  for (const auto& [key, value] : paths) {
    if (!value->empty()) text << key << '=' << *value << '\n';
  }
  return text.str();
}

}  // namespace mnmt
