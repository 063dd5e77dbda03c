#pragma once

#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "cag/treebank/tree.hpp"

namespace cag::treebank {

// Labeled bracket (label, start, end) over leaf positions, end exclusive.
using Bracket = std::tuple<std::string, std::size_t, std::size_t>;

// Every internal node, root included, no punctuation stripping.
std::vector<Bracket> brackets(const Tree& tree);

struct BracketReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
};

// Micro-averaged labeled bracket scores with multiset matching per sentence.
// Throws AlignmentError on length or leaf-sequence mismatch.
BracketReport bracket_f1(const std::vector<Tree>& predicted, const std::vector<Tree>& gold);

}  // namespace cag::treebank
