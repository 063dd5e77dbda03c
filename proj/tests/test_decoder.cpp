#include <cmath>
#include <limits>
#include <random>

#include "cag/decoder/decoder.hpp"
#include "cag/errors.hpp"
#include "cag/treebank/tree.hpp"
#include "doctest.h"
#include "support/model_fixtures.hpp"

using namespace cag;
using namespace cag::decoder;
using models::Architecture;
using testing::tiny_config;

namespace {

// Small closed inventory: every derivation of a short sentence is enumerable.
models::ModelConfig closed_config(Architecture a) {
  auto c = tiny_config(a, 16, 2, 1);
  c.legality.max_open_nts = 3;
  c.legality.max_consecutive_nts = 2;
  return c;
}

const std::vector<Word> kSentence{{0}, {1, 0}, {1}};

BeamParams saturating() { return {100000, 100000, 100000}; }

std::vector<Word> head(const std::vector<Word>& w, std::size_t n) { return {w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n)}; }

}  // namespace

TEST_CASE("beam params validation and description") {
  BeamParams p;
  CHECK(p.describe() == "action=100;word=10;fast_track=5");
  CHECK_NOTHROW(p.validate());
  CHECK_THROWS_AS((BeamParams{5, 10, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((BeamParams{10, 5, 6}.validate()), ConfigError);
  CHECK_THROWS_AS((BeamParams{10, 5, -1}.validate()), ConfigError);
  CHECK_THROWS_AS((BeamParams{0, 0, 0}.validate()), ConfigError);
}

TEST_CASE("unit names") {
  CHECK(parse_unit("bits") == Unit::kBits);
  CHECK(parse_unit("nats") == Unit::kNats);
  CHECK(unit_name(Unit::kNats) == "nats");
  CHECK_THROWS_AS(parse_unit("bans"), ConfigError);
}

TEST_CASE("saturated beam equals exact marginals") {
  for (Architecture a : {Architecture::kActionLstm, Architecture::kRnng, Architecture::kPlm, Architecture::kPlmMask,
                         Architecture::kCag}) {
    CAPTURE(models::architecture_name(a));
    auto m = models::build_model(closed_config(a), 3);
    BeamResult r = word_sync_beam(*m, kSentence, saturating());
    REQUIRE(r.word_logprobs.size() == kSentence.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < kSentence.size(); ++i) {
      bool last = i + 1 == kSentence.size();
      auto now = exact_marginal(*m, head(kSentence, i + 1), last);
      REQUIRE(now.has_value());
      CHECK(r.word_logprobs[i] == doctest::Approx(*now - prev).epsilon(1e-6));
      prev = *now;
    }
    CHECK(r.total_logprob == doctest::Approx(prev).epsilon(1e-6));
  }
}

TEST_CASE("narrow beam is a lower bound on the exact marginal") {
  for (Architecture a : {Architecture::kRnng, Architecture::kCag}) {
    auto m = models::build_model(closed_config(a), 5);
    auto exact = exact_marginal(*m, kSentence, true);
    REQUIRE(exact.has_value());
    BeamResult r = word_sync_beam(*m, kSentence, {2, 1, 1});
    CHECK(r.total_logprob <= *exact + 1e-9);
    CHECK(r.final_beam.size() == 1);
  }
}

TEST_CASE("word log-probabilities telescope to the total") {
  auto m = models::build_model(tiny_config(Architecture::kCag), 7);
  std::vector<Word> words{{1}, {2, 3}, {4}, {0}, {5}};
  BeamResult r = word_sync_beam(*m, words, {20, 5, 2});
  double sum = 0.0;
  for (double lp : r.word_logprobs) {
    CHECK(lp <= 1e-12);
    sum += lp;
  }
  CHECK(sum == doctest::Approx(r.total_logprob).epsilon(1e-10));
}

TEST_CASE("final beam histories replay to their scores") {
  auto m = models::build_model(tiny_config(Architecture::kRnng), 11);
  std::vector<Word> words{{0, 1}, {2}, {3}};
  BeamResult r = word_sync_beam(*m, words, {30, 6, 3});
  REQUIRE(!r.final_beam.empty());
  for (std::size_t i = 0; i < r.final_beam.size(); ++i) {
    const BeamCell& c = r.final_beam[i];
    CHECK(c.state.finished);
    CHECK(c.words == 3);
    CHECK(m->sequence_logprob(c.history) == doctest::Approx(c.logprob).epsilon(1e-9));
    if (i > 0) CHECK(r.final_beam[i - 1].logprob >= c.logprob);
    std::vector<int> gens;
    for (const auto& act : c.history)
      if (act.kind == treebank::ActionKind::kGen) gens.push_back(act.symbol);
    CHECK(gens == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("single-action beam still decodes through fast track") {
  for (Architecture a : {Architecture::kActionLstm, Architecture::kCag}) {
    auto m = models::build_model(tiny_config(a), 13);
    std::vector<Word> words{{1}, {2}, {3}, {4}, {5}, {0}};
    BeamResult r = word_sync_beam(*m, words, {1, 1, 1});
    CHECK(r.final_beam.size() == 1);
    CHECK(r.word_logprobs.size() == words.size());
  }
}

TEST_CASE("fast track only adds hypotheses") {
  auto m = models::build_model(tiny_config(Architecture::kRnng), 17);
  std::vector<Word> words{{1}, {2}, {3}, {4}};
  BeamResult without = word_sync_beam(*m, words, {4, 4, 0});
  BeamResult with = word_sync_beam(*m, words, {4, 4, 4});
  CHECK(with.word_logprobs.front() >= without.word_logprobs.front() - 1e-12);
}

TEST_CASE("beam is deterministic") {
  auto m = models::build_model(tiny_config(Architecture::kPlmMask), 19);
  std::vector<Word> words{{1}, {2, 3}, {4}};
  BeamResult a = word_sync_beam(*m, words, {10, 3, 1});
  BeamResult b = word_sync_beam(*m, words, {10, 3, 1});
  CHECK(a.word_logprobs == b.word_logprobs);
  REQUIRE(a.final_beam.size() == b.final_beam.size());
  for (std::size_t i = 0; i < a.final_beam.size(); ++i) CHECK(a.final_beam[i].history == b.final_beam[i].history);
}

TEST_CASE("beam rejects sequence models and empty input") {
  auto lm = models::build_model(tiny_config(Architecture::kLstm), 1);
  CHECK_THROWS_AS(word_sync_beam(*lm, kSentence, {}), ContractError);
  auto m = models::build_model(tiny_config(Architecture::kCag), 1);
  CHECK_THROWS_AS(word_sync_beam(*m, {}, {}), ContractError);
  CHECK_THROWS_AS(word_sync_beam(*m, {{1}, {}}, {}), ContractError);
  CHECK_THROWS_AS(exact_marginal(*lm, kSentence, true), ContractError);
}

TEST_CASE("exact marginal refuses oversized searches") {
  auto m = models::build_model(closed_config(Architecture::kRnng), 2);
  CHECK_THROWS_AS(exact_marginal(*m, kSentence, true, 10), ContractError);
}

TEST_CASE("exact prefix marginals shrink as words are added") {
  auto m = models::build_model(closed_config(Architecture::kCag), 23);
  std::vector<Word> words{{0}, {1}, {1}, {0}};
  double prev = 0.0;
  for (std::size_t n = 1; n <= words.size(); ++n) {
    auto lp = exact_marginal(*m, head(words, n), false);
    REQUIRE(lp.has_value());
    CHECK(*lp <= prev + 1e-12);
    prev = *lp;
  }
  auto complete = exact_marginal(*m, words, true);
  REQUIRE(complete.has_value());
  CHECK(*complete <= prev + 1e-12);
}

TEST_CASE("exact marginal of a single forced word") {
  // One terminal, one label, at most one open constituent: (X a) is the only tree.
  auto c = tiny_config(Architecture::kRnng, 16, 1, 1);
  c.legality.max_open_nts = 1;
  auto m = models::build_model(c, 29);
  auto lp = exact_marginal(*m, {{0}}, true);
  REQUIRE(lp.has_value());
  using treebank::Action;
  CHECK(*lp == doctest::Approx(m->sequence_logprob({Action::nt(0), Action::gen(0), Action::reduce()})).epsilon(1e-12));
  BeamResult r = word_sync_beam(*m, {{0}}, {});
  CHECK(r.total_logprob == doctest::Approx(*lp).epsilon(1e-12));
}

TEST_CASE("region surprisals sum word surprisals") {
  auto m = models::build_model(tiny_config(Architecture::kCag), 31);
  std::vector<Word> words{{1}, {2, 3}, {4}, {0}};
  std::vector<RegionSpan> regions{{"a", 0, 2}, {"b", 2, 4}, {"all", 0, 4}};
  SurprisalTable bits = surprisals(*m, words, regions, {20, 5, 2}, Unit::kBits);
  SurprisalTable nats = surprisals(*m, words, regions, {20, 5, 2}, Unit::kNats);
  REQUIRE(bits.regions.size() == 3);
  CHECK(bits.regions[0].surprisal + bits.regions[1].surprisal == doctest::Approx(bits.regions[2].surprisal));
  CHECK(bits.regions[2].surprisal == doctest::Approx(-bits.total_logprob / std::log(2.0)));
  for (std::size_t i = 0; i < words.size(); ++i)
    CHECK(bits.word_surprisals[i] * std::log(2.0) == doctest::Approx(nats.word_surprisals[i]));
  CHECK_THROWS_AS(surprisals(*m, words, {{"bad", 3, 5}}, {}), ContractError);
  CHECK_THROWS_AS(surprisals(*m, words, {{"empty", 2, 2}}, {}), ContractError);
}

TEST_CASE("sequence model surprisal includes end of sentence on the last word") {
  for (Architecture a : {Architecture::kLstm, Architecture::kTransformer}) {
    auto m = models::build_model(tiny_config(a), 37);
    std::vector<Word> words{{1}, {2, 3}, {4}};
    SurprisalTable t = surprisals(*m, words, {}, {}, Unit::kNats);
    using treebank::Action;
    double whole = m->sequence_logprob(
        {Action::gen(1), Action::gen(2), Action::gen(3), Action::gen(4), Action::gen(m->eos_id())});
    CHECK(t.total_logprob == doctest::Approx(whole).epsilon(1e-10));
    double sum = 0.0;
    for (double s : t.word_surprisals) sum += s;
    CHECK(sum == doctest::Approx(-whole).epsilon(1e-10));
  }
}

TEST_CASE("gold perplexity") {
  treebank::Tree t1 = treebank::parse_bracketed("(S (NP the cat) (VP sat))");
  treebank::Tree t2 = treebank::parse_bracketed("(S (NP cats) (VP sat down))");
  auto vocab = treebank::build_vocab({t1, t2}, 4);
  std::vector<treebank::Tree> tok{treebank::tokenize_tree(t1, vocab), treebank::tokenize_tree(t2, vocab)};
  std::size_t n = tok[0].leaf_count() + tok[1].leaf_count();
  for (Architecture a : {Architecture::kLstm, Architecture::kCag}) {
    auto c = tiny_config(a, 16, static_cast<int>(vocab.token_count()), static_cast<int>(vocab.label_count()));
    auto m = models::build_model(c, 41);
    Perplexity p = perplexity_gold(*m, tok, vocab);
    CHECK(p.tokens == n);
    double total = 0.0;
    for (const auto& t : tok) {
      std::vector<treebank::Action> seq;
      if (m->syntactic()) {
        seq = treebank::encode_actions(t, vocab);
      } else {
        for (const auto* leaf : t.leaf_nodes()) seq.push_back(treebank::Action::gen(leaf->id));
        seq.push_back(treebank::Action::gen(m->eos_id()));
      }
      total += m->sequence_logprob(seq);
    }
    CHECK(p.total_logprob == doctest::Approx(total).epsilon(1e-12));
    CHECK(p.perplexity == doctest::Approx(std::exp(-total / static_cast<double>(n))).epsilon(1e-12));
    CHECK_THROWS_AS(perplexity_gold(*m, {}, vocab), DataError);
  }
}

TEST_CASE("unknown subword has no derivation") {
  auto m = models::build_model(closed_config(Architecture::kCag), 43);
  std::vector<Word> words{{0}, {2}};
  CHECK_FALSE(exact_marginal(*m, words, true).has_value());
  CHECK_FALSE(exact_marginal(*m, words, false).has_value());
  try {
    word_sync_beam(*m, words, {});
    FAIL("expected a decode error");
  } catch (const DecodeError& e) {
    CHECK(e.word_index() == 1);
  }
}

TEST_CASE("every action beam width bounds the exact marginal from below") {
  std::mt19937_64 rng(47);
  for (Architecture a : {Architecture::kRnng, Architecture::kCag, Architecture::kPlmMask}) {
    CAPTURE(models::architecture_name(a));
    auto m = models::build_model(closed_config(a), 53);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Word> words;
      int n = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < n; ++i) words.push_back({static_cast<int>(rng() % 2)});
      auto exact = exact_marginal(*m, words, true);
      REQUIRE(exact.has_value());
      double saturated = word_sync_beam(*m, words, saturating()).total_logprob;
      CHECK(saturated == doctest::Approx(*exact).epsilon(1e-9));
      for (int beam = 1; beam <= 4096; beam *= 2) {
        double total = word_sync_beam(*m, words, {beam, 1, 1}).total_logprob;
        CHECK(total <= saturated + 1e-9);
      }
    }
  }
}
