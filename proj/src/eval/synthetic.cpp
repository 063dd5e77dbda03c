#include "cag/eval/synthetic.hpp"

#include <random>
#include <set>
#include <string>

namespace cag::eval {

namespace {

using treebank::Tree;

struct Noun {
  const char* singular;
  const char* plural;
};

const Noun kNouns[] = {{"author", "authors"}, {"senator", "senators"}, {"pilot", "pilots"},   {"doctor", "doctors"},
                       {"teacher", "teachers"}, {"farmer", "farmers"}, {"singer", "singers"}, {"lawyer", "lawyers"},
                       {"painter", "painters"}, {"student", "students"}, {"manager", "managers"}, {"officer", "officers"}};
const char* kAdjectives[] = {"old", "young", "tall", "famous", "quiet", "clever"};
const char* kPrepositions[] = {"near", "behind", "beside", "with"};
const char* kPredicates[] = {"happy", "tired", "late", "ready", "busy"};
struct Verb {
  const char* singular;
  const char* plural;
};
const Verb kVerbs[] = {{"is", "are"}, {"was", "were"}};

template <class T, std::size_t N>
const T& pick(const T (&xs)[N], std::mt19937_64& rng) {
  return xs[rng() % N];
}

class Generator {
 public:
  Generator(const SyntheticConfig& c, std::uint64_t seed) : c_(c), rng_(seed) {}

  bool coin() { return rng_() % 2 == 0; }
  int upto(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n + 1)); }

  // (NP the ADJ* N [PP]); plural[at] is this noun, later entries the nested
  // attractors.
  Tree noun_phrase(const std::vector<bool>& plural, std::size_t at) {
    std::vector<Tree> kids{Tree::leaf("the")};
    int adjectives = upto(c_.max_adjectives);
    for (int i = 0; i < adjectives; ++i) kids.push_back(Tree::leaf(pick(kAdjectives, rng_)));
    const Noun& n = pick(kNouns, rng_);
    kids.push_back(Tree::leaf(plural[at] ? n.plural : n.singular));
    if (at + 1 < plural.size())
      kids.push_back(Tree::node("PP", {Tree::leaf(pick(kPrepositions, rng_)), noun_phrase(plural, at + 1)}));
    return Tree::node("NP", std::move(kids));
  }

  std::vector<Tree> intro() {
    switch (rng_() % 4) {
      case 0:
        return {Tree::node("ADVP", {Tree::leaf("yesterday")}), Tree::leaf(",")};
      case 1:
        return {Tree::node("PP", {Tree::leaf("in"), Tree::node("NP", {Tree::leaf("the"), Tree::leaf("morning")})}),
                Tree::leaf(",")};
      case 2:
        return {Tree::node("PP", {Tree::leaf("after"), Tree::node("NP", {Tree::leaf("the"), Tree::leaf("meetings")})}),
                Tree::leaf(",")};
      default:
        return {};
    }
  }

  struct Sentence {
    std::vector<Tree> intro;
    Tree subject;
    bool plural = false;
    const Verb* verb = nullptr;
    const char* predicate = nullptr;

    Tree tree(bool agree) const {
      std::vector<Tree> kids = intro;
      kids.push_back(subject);
      const char* v = (plural == agree) ? verb->plural : verb->singular;
      kids.push_back(Tree::node("VP", {Tree::leaf(v), Tree::node("ADJP", {Tree::leaf(predicate)})}));
      kids.push_back(Tree::leaf("."));
      return Tree::node("S", std::move(kids));
    }
  };

  Sentence sentence(bool hard) {
    Sentence s;
    s.intro = intro();
    s.plural = coin();
    std::vector<bool> numbers{s.plural};
    int attractors = hard ? 1 + upto(c_.max_attractors - 1) : upto(c_.max_attractors);
    for (int i = 0; i < attractors; ++i) numbers.push_back(hard ? !s.plural : coin());
    s.subject = noun_phrase(numbers, 0);
    s.verb = &pick(kVerbs, rng_);
    s.predicate = pick(kPredicates, rng_);
    return s;
  }

 private:
  const SyntheticConfig& c_;
  std::mt19937_64 rng_;
};

Condition condition(const Tree& t) {
  std::vector<std::string> ws = t.leaves();
  // ... verb predicate .
  std::size_t verb = ws.size() - 3;
  return Condition{{{"prefix", {ws.begin(), ws.begin() + static_cast<std::ptrdiff_t>(verb)}},
                    {"verb", {ws[verb]}},
                    {"end", {ws.begin() + static_cast<std::ptrdiff_t>(verb + 1), ws.end()}}}};
}

}  // namespace

SyntheticData generate_agreement_data(const SyntheticConfig& c) {
  SyntheticData d;
  std::set<std::string> seen;
  Generator train_gen(c, c.seed * 4 + 0);
  while (static_cast<int>(d.train.size()) < c.train) {
    Tree t = train_gen.sentence(false).tree(true);
    seen.insert(treebank::render(t));
    d.train.push_back(std::move(t));
  }
  auto held_out = [&](std::uint64_t stream, int count, std::vector<Tree>& out) {
    Generator g(c, c.seed * 4 + stream);
    while (static_cast<int>(out.size()) < count) {
      Tree t = g.sentence(false).tree(true);
      if (!seen.count(treebank::render(t))) out.push_back(std::move(t));
    }
  };
  held_out(1, c.dev, d.dev);
  held_out(2, c.test, d.test);

  d.suite.name = "synthetic agreement across attractors";
  d.suite.circuit = "Agreement";
  d.suite.criterion_text = "surprisal(match, verb) < surprisal(mismatch, verb)";
  d.suite.criterion = parse_criterion(d.suite.criterion_text);
  Generator g(c, c.seed * 4 + 3);
  std::set<std::string> used;
  while (static_cast<int>(d.suite.items.size()) < c.suite_items) {
    auto s = g.sentence(true);
    Tree good = s.tree(true);
    std::string key = treebank::render(good);
    if (seen.count(key) || !used.insert(key).second) continue;
    Item item;
    item.conditions["match"] = condition(good);
    item.conditions["mismatch"] = condition(s.tree(false));
    d.suite.items.push_back(std::move(item));
  }
  return d;
}

}  // namespace cag::eval
