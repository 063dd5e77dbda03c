#include "cag/treebank/tree.hpp"

#include <cctype>
#include <fstream>
#include <functional>

#include "cag/errors.hpp"

namespace cag::treebank {

Tree Tree::leaf(std::string token, int id, bool word_end) {
  Tree t;
  t.token = std::move(token);
  t.id = id;
  t.word_end = word_end;
  return t;
}

Tree Tree::node(std::string label, std::vector<Tree> children, int id) {
  Tree t;
  t.label = std::move(label);
  t.children = std::move(children);
  t.id = id;
  return t;
}

std::size_t Tree::leaf_count() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : children) n += c.leaf_count();
  return n;
}

std::size_t Tree::internal_count() const {
  if (is_leaf()) return 0;
  std::size_t n = 1;
  for (const auto& c : children) n += c.internal_count();
  return n;
}

std::size_t Tree::depth() const {
  std::size_t d = 0;
  for (const auto& c : children) d = std::max(d, c.depth());
  return d + 1;
}

std::vector<const Tree*> Tree::leaf_nodes() const {
  std::vector<const Tree*> out;
  std::function<void(const Tree&)> walk = [&](const Tree& t) {
    if (t.is_leaf()) {
      out.push_back(&t);
      return;
    }
    for (const auto& c : t.children) walk(c);
  };
  walk(*this);
  return out;
}

std::vector<std::string> Tree::leaves() const {
  std::vector<std::string> out;
  for (const Tree* t : leaf_nodes()) out.push_back(t->token);
  return out;
}

bool operator==(const Tree& a, const Tree& b) {
  return a.label == b.label && a.token == b.token && a.children == b.children;
}

namespace {

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  Tree read() {
    skip_space();
    if (at_end()) fail("empty input");
    if (text_[pos_] != '(') fail("expected '('");
    Tree t = read_constituent();
    skip_space();
    if (!at_end()) fail("trailing text after tree");
    // "( (S ...) )" style outer wrapper.
    if (t.label.empty()) {
      if (t.children.size() != 1 || t.children[0].is_leaf()) fail("missing label", 1);
      return std::move(t.children[0]);
    }
    return t;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_ + 1); }
  [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
    throw ParseError(what, offset);
  }

  std::string read_symbol() {
    std::size_t start = pos_;
    while (!at_end()) {
      char c = text_[pos_];
      if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  Tree read_constituent() {
    std::size_t open_at = pos_;
    ++pos_;  // '('
    skip_space();
    if (at_end()) fail("unbalanced brackets");
    Tree node;
    if (text_[pos_] != '(' && text_[pos_] != ')') node.label = read_symbol();
    for (;;) {
      skip_space();
      if (at_end()) fail("unbalanced brackets");
      char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        node.children.push_back(read_constituent());
      } else {
        node.children.push_back(Tree::leaf(read_symbol()));
      }
    }
    if (node.children.empty()) fail("empty constituent", open_at + 1);
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void render_into(const Tree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token;
    return;
  }
  out += '(';
  out += t.label;
  for (const auto& c : t.children) {
    out += ' ';
    render_into(c, out);
  }
  out += ')';
}

}  // namespace

Tree parse_bracketed(std::string_view text) { return BracketReader(text).read(); }

std::string render(const Tree& tree) {
  std::string out;
  render_into(tree, out);
  return out;
}

std::vector<Tree> read_treebank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open treebank " + path);
  std::vector<Tree> trees;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      trees.push_back(parse_bracketed(line));
    } catch (const ParseError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trees;
}

void write_treebank(const std::string& path, const std::vector<Tree>& trees) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write treebank " + path);
  for (const auto& t : trees) out << render(t) << '\n';
}

}  // namespace cag::treebank
