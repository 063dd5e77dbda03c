#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cag/models/model.hpp"
#include "cag/treebank/bpe.hpp"
#include "cag/treebank/tree.hpp"

namespace cag::decoder {

using models::Model;
using models::ModelState;
using treebank::Action;

struct BeamParams {
  int action_beam = 100;
  int word_beam = 10;
  int fast_track = 5;

  // Throws ConfigError unless 0 <= fast_track <= word_beam <= action_beam.
  void validate() const;
  std::string describe() const;  // "action=100;word=10;fast_track=5"
};

// One word = the subword ids of its pieces, in order.
using Word = std::vector<int>;
std::vector<Word> encode_words(const std::vector<std::string>& words, const treebank::SubwordVocab& vocab);

struct BeamCell {
  ModelState state;
  std::vector<Action> history;
  double logprob = 0.0;
  int words = 0;
};

struct BeamResult {
  std::vector<BeamCell> final_beam;       // finished cells, best first
  std::vector<double> word_logprobs;      // log p(w_i | w_<i), natural log
  double total_logprob = 0.0;             // log of the final marginal
};

// Word-synchronous beam search. Between words, structural actions are
// expanded round by round keeping the top action_beam successors; the top
// fast_track word-completing successors of each round are promoted
// regardless of rank. A word is generated as its full subword run. After
// promotion the synchronized cells are cut to word_beam. After the last word
// cells are closed with REDUCE only. Throws DecodeError when no cell can
// generate a word, ContractError for sequence models or empty input.
BeamResult word_sync_beam(const Model& model, const std::vector<Word>& words, const BeamParams& params);

// log of the summed probability of every derivation of `words`: with
// `complete`, over full trees; otherwise over prefixes ending at the
// generation of the last word. nullopt when there is none. Throws
// ContractError when more than `guard` partial derivations are visited.
std::optional<double> exact_marginal(const Model& model, const std::vector<Word>& words, bool complete,
                                     std::size_t guard = 1000000);

enum class Unit { kBits, kNats };
std::string unit_name(Unit u);
Unit parse_unit(const std::string& name);  // ConfigError

struct RegionSpan {
  std::string name;
  std::size_t begin = 0;  // word indices, half-open
  std::size_t end = 0;
};

struct RegionSurprisal {
  RegionSpan span;
  double surprisal = 0.0;
};

struct SurprisalTable {
  Unit unit = Unit::kBits;
  std::vector<double> word_logprobs;  // natural log
  std::vector<double> word_surprisals;  // in `unit`
  std::vector<RegionSurprisal> regions;
  double total_logprob = 0.0;
};

// Per-word and per-region surprisal. Syntactic models go through the beam;
// sequence models score directly (the last word includes end-of-sentence,
// matching the closing REDUCEs of syntactic models). Throws ContractError
// for a region outside the sentence.
SurprisalTable surprisals(const Model& model, const std::vector<Word>& words, const std::vector<RegionSpan>& regions,
                          const BeamParams& params, Unit unit = Unit::kBits);

// Perplexity under gold trees: exp(-sum log p / N) with N the number of
// terminal subwords. Syntactic models score the gold action sequence,
// sequence models the subwords plus end-of-sentence. Throws DataError for
// an empty corpus.
struct Perplexity {
  double perplexity = 0.0;
  double total_logprob = 0.0;
  std::size_t tokens = 0;
};
Perplexity perplexity_gold(const Model& model, const std::vector<treebank::Tree>& tokenized,
                           const treebank::SubwordVocab& vocab);

}  // namespace cag::decoder
