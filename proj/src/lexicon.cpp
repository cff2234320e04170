#include "mnmt/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mnmt/error.hpp"

namespace mnmt {

namespace {

constexpr double kMassTolerance = 1e-6;
constexpr double kRoundingSlack = 5e-7;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

double parse_probability(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(value)) {
    throw ParseError("lexicon line " + std::to_string(line_no) + ": '" + text +
                     "' is not a probability");
  }
  if (value < 0.0 || value > 1.0) {
    throw ParseError("lexicon line " + std::to_string(line_no) + ": probability " + text +
                     " outside [0,1]");
  }
  return value;
}

const std::vector<LexicalCandidate>& no_candidates() {
  static const std::vector<LexicalCandidate> empty;
  return empty;
}

}  // namespace

Lexicon::Lexicon(std::map<Key, LexicalProb> entries) : entries_(std::move(entries)) {
  std::map<std::string, double> mass_by_source;
  std::map<std::string, double> mass_by_target;
  std::map<std::string, std::size_t> count_by_target;
  for (const auto& [key, prob] : entries_) {
    if (!(prob.p_t_given_s >= 0.0 && prob.p_t_given_s <= 1.0 && prob.p_s_given_t >= 0.0 &&
          prob.p_s_given_t <= 1.0)) {
      throw NumericError("lexicon entry (" + key.first + ", " + key.second +
                         ") has a probability outside [0,1]");
    }
    mass_by_source[key.first] += prob.p_t_given_s;
    mass_by_target[key.second] += prob.p_s_given_t;
    ++count_by_target[key.second];
    by_source_[key.first].push_back({key.second, prob.p_t_given_s});
  }
  // Six-decimal text rounding can overshoot by half a unit per entry.
  auto tolerance = [](std::size_t n) {
    return std::max(kMassTolerance, kRoundingSlack * static_cast<double>(n));
  };
  for (const auto& [word, mass] : mass_by_source) {
    if (mass > 1.0 + tolerance(by_source_[word].size())) {
      throw NumericError("p(t|s) for source '" + word + "' sums to " + std::to_string(mass));
    }
  }
  for (const auto& [word, mass] : mass_by_target) {
    if (mass > 1.0 + tolerance(count_by_target[word])) {
      throw NumericError("p(s|t) for target '" + word + "' sums to " + std::to_string(mass));
    }
  }
  for (auto& [source, list] : by_source_) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      if (a.p_t_given_s != b.p_t_given_s) return a.p_t_given_s > b.p_t_given_s;
      return a.target < b.target;
    });
  }
}

std::optional<LexicalProb> Lexicon::find(std::string_view source, std::string_view target) const {
  auto it = entries_.find(Key(std::string(source), std::string(target)));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

const std::vector<LexicalCandidate>& Lexicon::candidates(std::string_view source) const {
  auto it = by_source_.find(std::string(source));
  return it == by_source_.end() ? no_candidates() : it->second;
}

Ibm1Direction train_ibm1_direction(
    const std::vector<std::pair<const Sentence*, const Sentence*>>& pairs,
    std::size_t iterations) {
  // Words are interned so the inner loops work on dense indices.
  std::map<std::string, std::size_t> from_index;
  std::map<std::string, std::size_t> to_index;
  auto intern = [](std::map<std::string, std::size_t>& index, const std::string& word) {
    return index.try_emplace(word, index.size()).first->second;
  };
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> data;
  data.reserve(pairs.size());
  for (const auto& [from, to] : pairs) {
    std::vector<std::size_t> f;
    std::vector<std::size_t> t;
    for (const auto& w : *from) f.push_back(intern(from_index, w));
    for (const auto& w : *to) t.push_back(intern(to_index, w));
    data.emplace_back(std::move(f), std::move(t));
  }

  // Sparse table over co-occurring (from, to) pairs.
  std::map<std::pair<std::size_t, std::size_t>, double> prob;
  std::vector<std::set<std::size_t>> cooc(from_index.size());
  for (const auto& [f, t] : data) {
    for (auto fi : f) cooc[fi].insert(t.begin(), t.end());
  }
  for (std::size_t fi = 0; fi < cooc.size(); ++fi) {
    const double uniform = 1.0 / static_cast<double>(cooc[fi].size());
    for (auto ti : cooc[fi]) prob[{fi, ti}] = uniform;
  }
  // Per-sentence pointers into the table, fixed for the whole run.
  std::vector<std::vector<double*>> cells(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& [f, t] = data[n];
    cells[n].reserve(f.size() * t.size());
    for (auto ti : t) {
      for (auto fi : f) cells[n].push_back(&prob.at({fi, ti}));
    }
  }

  auto log_likelihood = [&]() {
    double ll = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& [f, t] = data[n];
      const double norm = std::log(static_cast<double>(f.size()));
      for (std::size_t j = 0; j < t.size(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) sum += *cells[n][j * f.size() + i];
        ll += std::log(sum) - norm;
      }
    }
    return ll;
  };

  Ibm1Direction result;
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (auto& [key, c] : prob) counts[key] = 0.0;
    std::vector<double> totals(from_index.size(), 0.0);
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto& [f, t] = data[n];
      for (std::size_t j = 0; j < t.size(); ++j) {
        double denom = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) denom += *cells[n][j * f.size() + i];
        for (std::size_t i = 0; i < f.size(); ++i) {
          const double share = *cells[n][j * f.size() + i] / denom;
          counts[{f[i], t[j]}] += share;
          totals[f[i]] += share;
        }
      }
    }
    for (auto& [key, p] : prob) p = counts[key] / totals[key.first];
    result.log_likelihood.push_back(log_likelihood());
  }

  std::vector<std::string> from_words(from_index.size());
  std::vector<std::string> to_words(to_index.size());
  for (const auto& [w, i] : from_index) from_words[i] = w;
  for (const auto& [w, i] : to_index) to_words[i] = w;
  for (const auto& [key, p] : prob) result.table[{from_words[key.first], to_words[key.second]}] = p;
  return result;
}

Ibm1Result train_ibm1(const ParallelCorpus& corpus, const Ibm1Options& options) {
  if (corpus.pairs.empty()) throw EmptyDataError("cannot train a lexicon on an empty corpus");
  if (options.iterations == 0) throw UsageError("IBM Model 1 needs at least one iteration");

  std::vector<std::pair<const Sentence*, const Sentence*>> forward;
  std::vector<std::pair<const Sentence*, const Sentence*>> backward;
  for (const auto& pair : corpus.pairs) {
    forward.emplace_back(&pair.source, &pair.target);
    backward.emplace_back(&pair.target, &pair.source);
  }
  auto t_given_s = train_ibm1_direction(forward, options.iterations);
  auto s_given_t = train_ibm1_direction(backward, options.iterations);

  std::map<Lexicon::Key, LexicalProb> entries;
  for (const auto& [key, p] : t_given_s.table) entries[key].p_t_given_s = p;
  for (const auto& [key, p] : s_given_t.table) entries[{key.second, key.first}].p_s_given_t = p;
  std::erase_if(entries, [&](const auto& item) {
    return item.second.p_t_given_s < options.prob_floor &&
           item.second.p_s_given_t < options.prob_floor;
  });

  Ibm1Result result;
  result.lexicon = Lexicon(std::move(entries));
  result.log_likelihood_t_given_s = std::move(t_given_s.log_likelihood);
  result.log_likelihood_s_given_t = std::move(s_given_t.log_likelihood);
  return result;
}

LexiconLoad load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::map<Lexicon::Key, LexicalProb> entries;
  LexiconLoad result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!is_valid_utf8(line)) {
      throw EncodingError("lexicon line " + std::to_string(line_no) + ": invalid UTF-8");
    }
    auto fields = split_tabs(line);
    if (fields.size() != 4 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("lexicon line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    LexicalProb prob{parse_probability(fields[2], line_no), parse_probability(fields[3], line_no)};
    auto [it, inserted] = entries.insert_or_assign({fields[0], fields[1]}, prob);
    if (!inserted) ++result.duplicates;
  }
  result.lexicon = Lexicon(std::move(entries));
  return result;
}

void save_lexicon(const Lexicon& lex, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  char buf[64];
  for (const auto& [key, prob] : lex.entries()) {
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f", prob.p_t_given_s, prob.p_s_given_t);
    out << key.first << '\t' << key.second << '\t' << buf << '\n';
  }
}

std::vector<LexicalCandidate> lexicon_lookup(const Lexicon& lex, std::string_view source,
                                             std::size_t k) {
  const auto& all = lex.candidates(source);
  const auto n = std::min(k, all.size());
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace mnmt
