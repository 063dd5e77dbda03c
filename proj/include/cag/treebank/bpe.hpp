#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cag/treebank/actions.hpp"
#include "cag/treebank/tree.hpp"

namespace cag::treebank {

// Marker appended to the last symbol of every word before merging.
inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::string_view kUnknownToken = "<unk>";

// Byte-pair-encoding vocabulary over whitespace-delimited words, plus the
// nonterminal label inventory of the treebank it was built from.
//
// Token id 0 is always the unknown token. Flat action ids (used by models
// that embed whole actions) are: 0 = REDUCE, 1..L = NT(label), L+1.. = GEN.
class SubwordVocab {
 public:
  using Merge = std::pair<std::string, std::string>;

  SubwordVocab();

  const std::vector<Merge>& merges() const { return merges_; }
  std::size_t merge_count() const { return merges_.size(); }

  std::size_t token_count() const { return tokens_.size(); }
  const std::string& token(int id) const;
  // Token without the end-of-word marker.
  std::string display(int id) const;
  bool is_word_final(int id) const;
  int token_id(std::string_view token) const;  // unknown_id() if absent
  bool has_token(std::string_view token) const;
  int unknown_id() const { return 0; }

  std::size_t label_count() const { return labels_.size(); }
  const std::string& label(int id) const;
  int label_id(std::string_view label) const;  // -1 if absent
  int add_label(const std::string& label);

  int reduce_id() const { return 0; }
  int nt_open_id(int label) const { return 1 + label; }
  int gen_id(int token) const { return 1 + static_cast<int>(labels_.size()) + token; }
  std::size_t action_inventory_size() const { return 1 + labels_.size() + tokens_.size(); }

  // Subword pieces (with end-of-word marker on the last) and their ids.
  std::vector<std::string> encode_pieces(std::string_view word) const;
  std::vector<int> encode(std::string_view word) const;
  // Joins ids back into words, splitting at word-final tokens.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static SubwordVocab load(const std::string& path);
  std::string serialize() const;
  static SubwordVocab deserialize(std::string_view text);

  friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
    return a.merges_ == b.merges_ && a.tokens_ == b.tokens_ && a.labels_ == b.labels_;
  }

 private:
  friend SubwordVocab train_bpe(const std::vector<std::vector<std::string>>&, std::size_t);

  int add_token(const std::string& token);

  std::vector<Merge> merges_;
  std::map<Merge, int> merge_rank_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> token_ids_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> label_ids_;
};

// Splits a UTF-8 word into code points; the last one carries kEndOfWord.
std::vector<std::string> split_symbols(std::string_view word);

// Greedy BPE: each round merges the most frequent adjacent pair (ties to the
// lexicographically smallest pair). Stops early if no pair remains. Throws
// ContractError on an empty corpus.
SubwordVocab train_bpe(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t merge_count);

// BPE over the leaves of a treebank, with its labels registered (sorted).
SubwordVocab build_vocab(const std::vector<Tree>& trees, std::size_t merge_count);

// Replaces each leaf by one leaf per subword (ids set, word_end on the last
// subword of each word). Known labels get their id. Unknown characters map
// to the unknown id.
Tree tokenize_tree(const Tree& tree, const SubwordVocab& vocab);

// Merges subword leaves back into whole words using the word_end flags.
Tree detokenize_tree(const Tree& tree);

// Id-level action sequence for a tokenized tree. Throws DataError when a
// label is not in the vocabulary.
std::vector<Action> encode_actions(const Tree& tokenized, const SubwordVocab& vocab);
std::vector<LabeledAction> label_actions(const std::vector<Action>& actions,
                                         const SubwordVocab& vocab);
// Tokenized tree (ids and word_end set) from an id-level action sequence.
Tree decode_actions(const std::vector<Action>& actions, const SubwordVocab& vocab);

}  // namespace cag::treebank
