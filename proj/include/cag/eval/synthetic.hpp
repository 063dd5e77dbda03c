#pragma once

#include <cstdint>
#include <vector>

#include "cag/eval/suite.hpp"
#include "cag/treebank/tree.hpp"

namespace cag::eval {

// Toy English with subject-verb number agreement across prepositional
// attractors, optional sentence-initial material and stacked adjectives.
struct SyntheticConfig {
  std::uint64_t seed = 1;
  int train = 2000;
  int dev = 200;
  int test = 200;
  int suite_items = 200;
  int max_attractors = 2;
  int max_adjectives = 3;
};

struct SyntheticData {
  std::vector<treebank::Tree> train, dev, test;
  // Attractors always disagree with the head noun; match/mismatch on the verb.
  TestSuite suite;
};

// Deterministic in the seed. Test trees and suite sentences never occur in
// the training split.
SyntheticData generate_agreement_data(const SyntheticConfig& config);

}  // namespace cag::eval
