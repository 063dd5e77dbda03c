#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cag::treebank {

// A labeled constituency tree. Internal nodes carry `label` and at least one
// child; leaves carry `token` and no children.
//
// `id` and `word_end` are annotations added by subword tokenization: the
// vocabulary id of the leaf (or label), and whether the leaf is the last
// subword of its source word. They do not take part in equality.
struct Tree {
  std::string label;
  std::string token;
  std::vector<Tree> children;
  int id = -1;
  bool word_end = true;

  static Tree leaf(std::string token, int id = -1, bool word_end = true);
  static Tree node(std::string label, std::vector<Tree> children, int id = -1);

  bool is_leaf() const { return children.empty(); }

  std::size_t leaf_count() const;
  std::size_t internal_count() const;
  std::size_t depth() const;

  // In-order terminal tokens.
  std::vector<std::string> leaves() const;
  // Pointers to the leaf nodes, in order.
  std::vector<const Tree*> leaf_nodes() const;

  friend bool operator==(const Tree& a, const Tree& b);
};

// Parses one PTB-style bracketing, e.g. "(S (NP The bird) (VP sings))".
// Leaves may appear directly under any constituent. A single unlabeled outer
// wrapper "( (S ...) )" is removed. Error offsets are 1-based byte positions;
// an unexpected end of input is reported one past the last byte.
Tree parse_bracketed(std::string_view text);

// Renders with single spaces, the inverse of parse_bracketed.
std::string render(const Tree& tree);

// Reads a treebank file: one tree per non-blank line. Throws DataError naming
// the line when a tree fails to parse.
std::vector<Tree> read_treebank(const std::string& path);
void write_treebank(const std::string& path, const std::vector<Tree>& trees);

}  // namespace cag::treebank
