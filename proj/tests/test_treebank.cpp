#include <map>
#include <random>
#include <sstream>

#include "cag/errors.hpp"
#include "cag/treebank/actions.hpp"
#include "cag/treebank/bpe.hpp"
#include "cag/treebank/brackets.hpp"
#include "cag/treebank/tree.hpp"
#include "doctest.h"
#include "support/random_trees.hpp"

using namespace cag;
using namespace cag::treebank;

namespace {

const std::vector<std::string> kLabels{"S", "NP", "VP", "PP", "X"};
const std::vector<std::string> kTokens{"the", "bird", "sings", "a", "b", "c", "birds"};

std::vector<std::string> show(const std::vector<LabeledAction>& as) {
  std::vector<std::string> out;
  for (const auto& a : as) out.push_back(to_string(a));
  return out;
}

}  // namespace

TEST_CASE("parse_bracketed reads the example tree") {
  Tree t = parse_bracketed("(S (NP The bird) (VP sings))");
  CHECK(t.label == "S");
  REQUIRE(t.children.size() == 2);
  CHECK(t.children[0].label == "NP");
  CHECK(t.children[0].leaves() == std::vector<std::string>{"The", "bird"});
  CHECK(t.children[1].label == "VP");
  CHECK(t.leaves() == std::vector<std::string>{"The", "bird", "sings"});
  CHECK(render(t) == "(S (NP The bird) (VP sings))");
}

TEST_CASE("parse_bracketed is whitespace-insensitive and strips an unlabeled wrapper") {
  Tree a = parse_bracketed("(S (NP The bird) (VP sings))");
  CHECK(parse_bracketed("  (S\n\t(NP   The bird )(VP sings) )  ") == a);
  CHECK(parse_bracketed("( (S (NP The bird) (VP sings)) )") == a);
}

TEST_CASE("minimal tree") {
  Tree t = parse_bracketed("(X a)");
  CHECK(t.label == "X");
  CHECK(t.leaf_count() == 1);
  CHECK(t.internal_count() == 1);
}

TEST_CASE("parse errors carry offsets") {
  try {
    parse_bracketed("(S (NP The");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 11);
  }
  CHECK_THROWS_AS(parse_bracketed("(S )"), ParseError);
  CHECK_THROWS_AS(parse_bracketed("(S (NP a)))"), ParseError);
  CHECK_THROWS_AS(parse_bracketed(""), ParseError);
  CHECK_THROWS_AS(parse_bracketed("word"), ParseError);
}

TEST_CASE("tree_to_actions follows the top-down left-to-right order") {
  auto actions = tree_to_actions(parse_bracketed("(S (NP The bird) (VP sings))"));
  CHECK(show(actions) == std::vector<std::string>{"NT(S)", "NT(NP)", "GEN(The)", "GEN(bird)", "REDUCE",
                                                  "NT(VP)", "GEN(sings)", "REDUCE", "REDUCE"});
  CHECK(show(tree_to_actions(parse_bracketed("(X a)"))) ==
        std::vector<std::string>{"NT(X)", "GEN(a)", "REDUCE"});
}

TEST_CASE("unary chains keep one NT/REDUCE pair per level") {
  Tree t = parse_bracketed("(S (NP (NN x)))");
  auto a = tree_to_actions(t);
  CHECK(a.size() == 7);
  CHECK(actions_to_tree(a) == t);
}

TEST_CASE("oracle round trip over random trees") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    Tree t = testing::random_tree(rng, 8, 12, kLabels, kTokens);
    auto a = tree_to_actions(t);
    CHECK(a.size() == t.leaf_count() + 2 * t.internal_count());
    Tree back = actions_to_tree(a);
    REQUIRE(back == t);
    CHECK(tree_to_actions(back) == a);
  }
}

TEST_CASE("actions_to_tree rejects malformed sequences") {
  auto nt = LabeledAction::nt;
  auto gen = LabeledAction::gen;
  auto red = LabeledAction::reduce;
  CHECK(render(actions_to_tree({nt("X"), gen("a"), red()})) == "(X a)");
  try {
    actions_to_tree({nt("S"), red()});
    FAIL("expected StructureError");
  } catch (const StructureError& e) {
    CHECK(e.index() == 1);
  }
  try {
    actions_to_tree({gen("a")});
    FAIL("expected StructureError");
  } catch (const StructureError& e) {
    CHECK(e.index() == 0);
  }
  CHECK_THROWS_AS(actions_to_tree({nt("S"), gen("a")}), StructureError);
  CHECK_THROWS_AS(actions_to_tree({red()}), StructureError);
  CHECK_THROWS_AS(actions_to_tree({nt("S"), gen("a"), red(), nt("T")}), StructureError);
}

TEST_CASE("train_bpe merges the most frequent pair first") {
  std::vector<std::vector<std::string>> corpus(10, std::vector<std::string>{"aaab"});
  SubwordVocab v = train_bpe(corpus, 1);
  REQUIRE(v.merges().size() == 1);
  CHECK(v.merges()[0] == SubwordVocab::Merge{"a", "a"});
  CHECK(v.encode_pieces("aaab") == std::vector<std::string>{"aa", "a", "b</w>"});
}

TEST_CASE("zero merges gives the character inventory plus specials") {
  SubwordVocab v = train_bpe({{"ab", "ba"}}, 0);
  CHECK(v.merge_count() == 0);
  CHECK(v.token_count() == 5);  // <unk>, a, a</w>, b, b</w>
  CHECK(v.token(0) == "<unk>");
  CHECK(v.has_token("a</w>"));
  CHECK(v.has_token("b"));
}

TEST_CASE("BPE ties break on lexicographic pair order and the run is deterministic") {
  // bird x10, birds x4, cats x3. Hand count: (b,i)=14 and (i,r)=14 tie, so
  // (b,i) first; then (bi,r)=14; then (bir,d</w>)=10; then (bir,d)=4 ties
  // with (d,s</w>)=4 and wins lexicographically.
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back({"bird"});
  for (int i = 0; i < 4; ++i) corpus.push_back({"birds"});
  for (int i = 0; i < 3; ++i) corpus.push_back({"cats"});
  SubwordVocab v = train_bpe(corpus, 4);
  std::vector<SubwordVocab::Merge> expected{{"b", "i"}, {"bi", "r"}, {"bir", "d</w>"}, {"bir", "d"}};
  CHECK(v.merges() == expected);
  CHECK(v.encode_pieces("birds") == std::vector<std::string>{"bird", "s</w>"});
  CHECK(train_bpe(corpus, 4) == v);

  Tree t = tokenize_tree(parse_bracketed("(S (NP the birds) (VP sing))"), v);
  const Tree& np = t.children[0];
  REQUIRE(np.children.size() >= 3);
  const Tree& bird = np.children[np.children.size() - 2];
  const Tree& s = np.children.back();
  CHECK(bird.token == "bird");
  CHECK_FALSE(bird.word_end);
  CHECK(s.token == "s");
  CHECK(s.word_end);
  CHECK(detokenize_tree(t) == parse_bracketed("(S (NP the birds) (VP sing))"));
}

TEST_CASE("encode/decode round trip over the corpus") {
  std::mt19937_64 rng(3);
  std::vector<Tree> trees;
  for (int i = 0; i < 50; ++i) trees.push_back(testing::random_tree(rng, 6, 10, kLabels, kTokens));
  for (std::size_t merges : {0u, 3u, 10u, 50u}) {
    SubwordVocab v = build_vocab(trees, merges);
    for (const auto& t : trees) {
      for (const auto& w : t.leaves()) {
        auto ids = v.encode(w);
        CHECK(v.decode(ids) == std::vector<std::string>{w});
      }
      Tree tok = tokenize_tree(t, v);
      CHECK(tok.leaf_count() >= t.leaf_count());
      CHECK(detokenize_tree(tok) == t);
      auto actions = encode_actions(tok, v);
      CHECK(decode_actions(actions, v) == tok);
    }
  }
}

TEST_CASE("whole-word vocabulary leaves trees unchanged apart from ids") {
  std::vector<Tree> trees{parse_bracketed("(S (NP The bird) (VP sings))")};
  SubwordVocab v = build_vocab(trees, 100);
  Tree tok = tokenize_tree(trees[0], v);
  CHECK(tok == trees[0]);
  for (const Tree* leaf : tok.leaf_nodes()) {
    CHECK(leaf->id != v.unknown_id());
    CHECK(leaf->word_end);
  }
  CHECK(tok.id == v.label_id("S"));
}

TEST_CASE("unknown characters map to the unknown id") {
  SubwordVocab v = train_bpe({{"ab"}}, 1);
  auto ids = v.encode("az");
  REQUIRE(ids.size() == 2);
  CHECK(ids[1] == v.unknown_id());
}

TEST_CASE("vocabulary file round trip") {
  std::mt19937_64 rng(5);
  std::vector<Tree> trees;
  for (int i = 0; i < 20; ++i) trees.push_back(testing::random_tree(rng, 5, 8, kLabels, kTokens));
  SubwordVocab v = build_vocab(trees, 12);
  std::string text = v.serialize();
  CHECK(text.rfind("BPEv1 " + std::to_string(v.merge_count()) + "\n", 0) == 0);
  CHECK(SubwordVocab::deserialize(text) == v);
  CHECK_THROWS_AS(SubwordVocab::deserialize("BPEv2 1\n"), DataError);
  CHECK_THROWS_AS(SubwordVocab::deserialize("BPEv1 3\na b\n"), DataError);
}

TEST_CASE("bracket_f1 examples") {
  Tree gold = parse_bracketed("(S (NP a b) (VP c))");
  Tree pred = parse_bracketed("(S (NP a) (VP b c))");
  BracketReport r = bracket_f1({pred}, {gold});
  CHECK(r.matched == 1);
  CHECK(r.gold == 3);
  CHECK(r.predicted == 3);
  CHECK(r.f1 == doctest::Approx(1.0 / 3.0));

  BracketReport same = bracket_f1({gold}, {gold});
  CHECK(same.f1 == 1.0);

  Tree relabeled = parse_bracketed("(S (A a b) (B c))");
  CHECK(bracket_f1({relabeled}, {gold}).f1 == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(bracket_f1({parse_bracketed("(S a b d)")}, {gold}), AlignmentError);
  CHECK_THROWS_AS(bracket_f1({gold, gold}, {gold}), AlignmentError);
}

namespace {

// Independent bracket enumeration straight from the rendered string.
std::vector<std::tuple<std::string, int, int>> scan_brackets(const std::string& s) {
  std::vector<std::tuple<std::string, int, int>> out;
  std::vector<std::pair<std::string, int>> open;
  int leaves = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '(') {
      std::size_t j = s.find(' ', i);
      open.emplace_back(s.substr(i + 1, j - i - 1), leaves);
      i = j;
    } else if (s[i] == ')') {
      out.emplace_back(open.back().first, open.back().second, leaves);
      open.pop_back();
      ++i;
    } else if (s[i] == ' ') {
      ++i;
    } else {
      while (i < s.size() && s[i] != ' ' && s[i] != ')') ++i;
      ++leaves;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("bracket_f1 agrees with brute-force enumeration") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> labels{"A", "B"};
  const std::vector<std::string> tokens{"x"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tree> pred, gold;
    long matched = 0, ng = 0, np = 0;
    for (int k = 0; k < 3; ++k) {
      Tree g = testing::random_tree(rng, 5, 6, labels, tokens);
      Tree p;
      do {
        p = testing::random_tree(rng, 5, 6, labels, tokens);
      } while (p.leaf_count() != g.leaf_count());
      auto gb = scan_brackets(render(g));
      auto pb = scan_brackets(render(p));
      std::vector<bool> used(gb.size(), false);
      for (const auto& b : pb)
        for (std::size_t j = 0; j < gb.size(); ++j)
          if (!used[j] && gb[j] == b) {
            used[j] = true;
            ++matched;
            break;
          }
      ng += static_cast<long>(gb.size());
      np += static_cast<long>(pb.size());
      pred.push_back(p);
      gold.push_back(g);
    }
    BracketReport r = bracket_f1(pred, gold);
    CHECK(r.matched == static_cast<std::size_t>(matched));
    CHECK(r.gold == static_cast<std::size_t>(ng));
    CHECK(r.predicted == static_cast<std::size_t>(np));
    double P = double(matched) / double(np), R = double(matched) / double(ng);
    CHECK(r.f1 == doctest::Approx(P + R > 0 ? 2 * P * R / (P + R) : 0.0));
    CHECK(r.precision >= 0.0);
    CHECK(r.precision <= 1.0);
    CHECK(r.recall <= 1.0);
  }
}
