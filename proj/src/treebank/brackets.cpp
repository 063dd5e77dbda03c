#include "cag/treebank/brackets.hpp"

#include <algorithm>
#include <map>

#include "cag/errors.hpp"

namespace cag::treebank {

namespace {

std::size_t collect(const Tree& t, std::size_t start, std::vector<Bracket>& out) {
  if (t.is_leaf()) return start + 1;
  std::size_t end = start;
  for (const auto& c : t.children) end = collect(c, end, out);
  out.emplace_back(t.label, start, end);
  return end;
}

}  // namespace

std::vector<Bracket> brackets(const Tree& tree) {
  std::vector<Bracket> out;
  collect(tree, 0, out);
  return out;
}

BracketReport bracket_f1(const std::vector<Tree>& predicted, const std::vector<Tree>& gold) {
  if (predicted.size() != gold.size())
    throw AlignmentError("predicted and gold treebanks differ in length", std::min(predicted.size(), gold.size()));
  BracketReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].leaves() != gold[i].leaves())
      throw AlignmentError("leaf sequences differ", i);
    std::map<Bracket, std::size_t> g;
    for (auto& b : brackets(gold[i])) ++g[b];
    auto p = brackets(predicted[i]);
    r.gold += brackets(gold[i]).size();
    r.predicted += p.size();
    for (auto& b : p) {
      auto it = g.find(b);
      if (it != g.end() && it->second > 0) {
        --it->second;
        ++r.matched;
      }
    }
  }
  if (r.predicted > 0) r.precision = static_cast<double>(r.matched) / static_cast<double>(r.predicted);
  if (r.gold > 0) r.recall = static_cast<double>(r.matched) / static_cast<double>(r.gold);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

}  // namespace cag::treebank
