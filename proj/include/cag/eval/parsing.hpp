#pragma once

#include <vector>

#include "cag/decoder/decoder.hpp"
#include "cag/treebank/brackets.hpp"

namespace cag::eval {

// Highest-scoring finished tree of the word beam, with subwords merged back
// into words. Throws DecodeError on beam death.
treebank::Tree best_parse(const models::Model& model, const std::vector<std::string>& words,
                          const treebank::SubwordVocab& vocab, const decoder::BeamParams& params);

struct ParseRun {
  std::vector<treebank::Tree> predicted;  // parallel to the gold trees that decoded
  std::vector<treebank::Tree> gold;
  std::size_t failures = 0;               // sentences lost to decode errors
  treebank::BracketReport brackets;       // failures count as zero matched brackets
};

// Parses the leaves of every gold tree and scores labeled brackets.
ParseRun parse_corpus(const models::Model& model, const std::vector<treebank::Tree>& gold,
                      const treebank::SubwordVocab& vocab, const decoder::BeamParams& params);

}  // namespace cag::eval
