#include "cag/eval/parsing.hpp"

#include "cag/errors.hpp"

namespace cag::eval {

treebank::Tree best_parse(const models::Model& model, const std::vector<std::string>& words,
                          const treebank::SubwordVocab& vocab, const decoder::BeamParams& params) {
  decoder::BeamResult r = decoder::word_sync_beam(model, decoder::encode_words(words, vocab), params);
  return treebank::detokenize_tree(treebank::decode_actions(r.final_beam.front().history, vocab));
}

ParseRun parse_corpus(const models::Model& model, const std::vector<treebank::Tree>& gold,
                      const treebank::SubwordVocab& vocab, const decoder::BeamParams& params) {
  ParseRun run;
  std::size_t missed_gold = 0;
  for (const auto& g : gold) {
    try {
      run.predicted.push_back(best_parse(model, g.leaves(), vocab, params));
      run.gold.push_back(g);
    } catch (const DecodeError&) {
      ++run.failures;
      missed_gold += treebank::brackets(g).size();
    }
  }
  if (!run.gold.empty()) run.brackets = treebank::bracket_f1(run.predicted, run.gold);
  auto& b = run.brackets;
  b.gold += missed_gold;
  b.precision = b.predicted ? static_cast<double>(b.matched) / static_cast<double>(b.predicted) : 0.0;
  b.recall = b.gold ? static_cast<double>(b.matched) / static_cast<double>(b.gold) : 0.0;
  b.f1 = b.precision + b.recall > 0 ? 2 * b.precision * b.recall / (b.precision + b.recall) : 0.0;
  return run;
}

}  // namespace cag::eval
