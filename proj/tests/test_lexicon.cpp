#include <doctest.h>

#include <cmath>
#include <map>

#include "mnmt/error.hpp"
#include "mnmt/lexicon.hpp"
#include "support.hpp"

using namespace mnmt;
using mnmt::testing::TempDir;
using mnmt::testing::toy_em;
using mnmt::testing::write_lines;

namespace {

ParallelCorpus corpus_of(std::vector<std::pair<std::string, std::string>> rows) {
  ParallelCorpus corpus;
  for (const auto& [s, t] : rows) corpus.pairs.push_back({tokenize(s), tokenize(t)});
  return corpus;
}

void check_mass(const Lexicon& lex) {
  std::map<std::string, double> by_source, by_target;
  for (const auto& [key, p] : lex.entries()) {
    CHECK(p.p_t_given_s >= 0.0);
    CHECK(p.p_t_given_s <= 1.0);
    CHECK(p.p_s_given_t >= 0.0);
    CHECK(p.p_s_given_t <= 1.0);
    by_source[key.first] += p.p_t_given_s;
    by_target[key.second] += p.p_s_given_t;
  }
  for (const auto& [s, m] : by_source) CHECK(m <= 1.0 + 1e-6);
  for (const auto& [t, m] : by_target) CHECK(m <= 1.0 + 1e-6);
}

}  // namespace

TEST_SUITE("lexicon") {

TEST_CASE("single co-occurrence is certain") {
  const auto r = train_ibm1(corpus_of({{"a", "x"}}), {1, 0.01});
  const auto p = r.lexicon.find("a", "x");
  REQUIRE(p.has_value());
  CHECK(p->p_t_given_s == doctest::Approx(1.0));
  CHECK(p->p_s_given_t == doctest::Approx(1.0));
}

TEST_CASE("toy corpus matches the hand-rolled EM") {
  const auto corpus = corpus_of({{"a b", "x y"}, {"a", "x"}});
  for (int iters : {1, 2, 5, 10}) {
    const auto r = train_ibm1(corpus, {static_cast<std::size_t>(iters), 0.0});
    const auto oracle = toy_em(iters);
    CHECK(r.lexicon.find("a", "x")->p_t_given_s == doctest::Approx(oracle.xa).epsilon(1e-9));
    CHECK(r.lexicon.find("a", "y")->p_t_given_s == doctest::Approx(oracle.ya).epsilon(1e-9));
    CHECK(r.lexicon.find("b", "y")->p_t_given_s == doctest::Approx(oracle.yb).epsilon(1e-9));
  }
  const auto r = train_ibm1(corpus, {10, 0.01});
  CHECK(r.lexicon.find("a", "x")->p_t_given_s > r.lexicon.find("a", "y")->p_t_given_s);
}

TEST_CASE("log-likelihood never decreases") {
  const auto toy = corpus_of({{"a b", "x y"}, {"a", "x"}});
  const auto random = mnmt::testing::copy_corpus(30, 8, 1, 5, 3);
  for (const auto* corpus : {&toy, &random}) {
    const auto r = train_ibm1(*corpus, {10, 0.01});
    REQUIRE(r.log_likelihood_t_given_s.size() == 10);
    REQUIRE(r.log_likelihood_s_given_t.size() == 10);
    for (std::size_t i = 1; i < 10; ++i) {
      CHECK(r.log_likelihood_t_given_s[i] >= r.log_likelihood_t_given_s[i - 1] - 1e-9);
      CHECK(r.log_likelihood_s_given_t[i] >= r.log_likelihood_s_given_t[i - 1] - 1e-9);
    }
    check_mass(r.lexicon);
  }
}

TEST_CASE("floor drops entries weak in both directions") {
  const auto corpus = mnmt::testing::copy_corpus(40, 6, 2, 5, 4);
  const auto all = train_ibm1(corpus, {5, 0.0});
  const auto kept = train_ibm1(corpus, {5, 0.2});
  CHECK(kept.lexicon.size() < all.lexicon.size());
  for (const auto& [key, p] : kept.lexicon.entries()) {
    CHECK((p.p_t_given_s >= 0.2 || p.p_s_given_t >= 0.2));
  }
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_AS(train_ibm1(ParallelCorpus{}, {5, 0.01}), EmptyDataError);
}

TEST_CASE("load_lexicon parses rows") {
  TempDir dir;
  write_lines(dir / "lex", {"a\tx\t0.7\t0.9"});
  const auto load = load_lexicon(dir / "lex");
  const auto p = load.lexicon.find("a", "x");
  REQUIRE(p.has_value());
  CHECK(p->p_t_given_s == 0.7);
  CHECK(p->p_s_given_t == 0.9);
  CHECK(load.duplicates == 0);
}

TEST_CASE("duplicate rows keep the last") {
  TempDir dir;
  write_lines(dir / "lex", {"a\tx\t0.7\t0.9", "a\tx\t0.6\t0.8"});
  const auto load = load_lexicon(dir / "lex");
  CHECK(load.lexicon.find("a", "x")->p_t_given_s == 0.6);
  CHECK(load.lexicon.find("a", "x")->p_s_given_t == 0.8);
  CHECK(load.duplicates == 1);
}

TEST_CASE("malformed rows report their line") {
  TempDir dir;
  auto message = [&](const std::vector<std::string>& rows) -> std::string {
    write_lines(dir / "lex", rows);
    try {
      load_lexicon(dir / "lex");
    } catch (const ParseError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message({"a\tx\t0.5\t0.5", "a\tx\t1.2\t0.5"}).find("line 2") != std::string::npos);
  CHECK(message({"a\tx\t0.5"}).find("line 1") != std::string::npos);
  CHECK(message({"a\tx\tzero\t0.5"}).find("line 1") != std::string::npos);
  CHECK(message({"a\tx\t0.5\t-0.1"}).find("line 1") != std::string::npos);
}

TEST_CASE("lookup returns the top k with lexicographic ties") {
  const Lexicon lex({{{"a", "x"}, {0.6, 0.5}}, {{"a", "y"}, {0.3, 0.5}}, {{"a", "z"}, {0.1, 0.5}}});
  const auto top = lexicon_lookup(lex, "a", 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].target == "x");
  CHECK(top[0].p_t_given_s == 0.6);
  CHECK(top[1].target == "y");
  CHECK(lexicon_lookup(lex, "qqq", 3).empty());
  CHECK(lexicon_lookup(lex, "a", 10).size() == 3);

  const Lexicon tie({{{"a", "y"}, {0.5, 0.5}}, {{"a", "x"}, {0.5, 0.5}}});
  const auto one = lexicon_lookup(tie, "a", 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].target == "x");
}

TEST_CASE("lookup with k is a prefix of lookup with k + 1") {
  const auto r = train_ibm1(mnmt::testing::copy_corpus(30, 6, 2, 5, 8), {5, 0.0});
  for (const auto& source : {"s0", "s1", "s2", "s5"}) {
    for (std::size_t k = 1; k < 6; ++k) {
      const auto a = lexicon_lookup(r.lexicon, source, k);
      const auto b = lexicon_lookup(r.lexicon, source, k + 1);
      REQUIRE(a.size() <= b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].target == b[i].target);
    }
  }
}

TEST_CASE("invalid tables are rejected") {
  CHECK_THROWS(Lexicon({{{"a", "x"}, {1.5, 0.5}}}));
  CHECK_THROWS(Lexicon({{{"a", "x"}, {0.7, 0.5}}, {{"a", "y"}, {0.7, 0.5}}}));
}

TEST_CASE("save then load reproduces entries to six decimals") {
  TempDir dir;
  const auto r = train_ibm1(mnmt::testing::copy_corpus(30, 7, 2, 6, 2), {5, 0.01});
  save_lexicon(r.lexicon, dir / "lex");
  const auto back = load_lexicon(dir / "lex").lexicon;
  REQUIRE(back.size() == r.lexicon.size());
  for (const auto& [key, p] : r.lexicon.entries()) {
    const auto q = back.find(key.first, key.second);
    REQUIRE(q.has_value());
    CHECK(std::abs(q->p_t_given_s - p.p_t_given_s) <= 5e-7);
    CHECK(std::abs(q->p_s_given_t - p.p_s_given_t) <= 5e-7);
  }
  check_mass(back);
}

}  // TEST_SUITE
