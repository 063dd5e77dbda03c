#include "cag/treebank/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cag/errors.hpp"

namespace cag::treebank {

namespace {

bool ends_with_marker(std::string_view s) {
  return s.size() >= kEndOfWord.size() && s.substr(s.size() - kEndOfWord.size()) == kEndOfWord;
}

std::string strip_marker(std::string_view s) {
  if (ends_with_marker(s)) s.remove_suffix(kEndOfWord.size());
  return std::string(s);
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte: pass through as its own symbol
}

void apply_merge(std::vector<std::string>& symbols, const SubwordVocab::Merge& m) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == m.first && symbols[i + 1] == m.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::vector<std::string> split_symbols(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t n = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    out.emplace_back(word.substr(i, n));
    i += n;
  }
  if (!out.empty()) out.back() += kEndOfWord;
  return out;
}

SubwordVocab::SubwordVocab() { add_token(std::string(kUnknownToken)); }

int SubwordVocab::add_token(const std::string& token) {
  auto it = token_ids_.find(token);
  if (it != token_ids_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  token_ids_.emplace(token, id);
  return id;
}

const std::string& SubwordVocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ContractError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::string SubwordVocab::display(int id) const { return strip_marker(token(id)); }

bool SubwordVocab::is_word_final(int id) const { return ends_with_marker(token(id)); }

int SubwordVocab::token_id(std::string_view token) const {
  auto it = token_ids_.find(std::string(token));
  return it == token_ids_.end() ? unknown_id() : it->second;
}

bool SubwordVocab::has_token(std::string_view token) const {
  return token_ids_.count(std::string(token)) > 0;
}

const std::string& SubwordVocab::label(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= labels_.size())
    throw ContractError("label id out of range: " + std::to_string(id));
  return labels_[static_cast<std::size_t>(id)];
}

int SubwordVocab::label_id(std::string_view label) const {
  auto it = label_ids_.find(std::string(label));
  return it == label_ids_.end() ? -1 : it->second;
}

int SubwordVocab::add_label(const std::string& label) {
  auto it = label_ids_.find(label);
  if (it != label_ids_.end()) return it->second;
  int id = static_cast<int>(labels_.size());
  labels_.push_back(label);
  label_ids_.emplace(label, id);
  return id;
}

std::vector<std::string> SubwordVocab::encode_pieces(std::string_view word) const {
  std::vector<std::string> symbols = split_symbols(word);
  if (symbols.size() < 2 || merges_.empty()) return symbols;
  for (;;) {
    int best_rank = -1;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) best_rank = it->second;
    }
    if (best_rank < 0) break;
    apply_merge(symbols, merges_[static_cast<std::size_t>(best_rank)]);
  }
  return symbols;
}

std::vector<int> SubwordVocab::encode(std::string_view word) const {
  std::vector<int> ids;
  for (const auto& p : encode_pieces(word)) ids.push_back(token_id(p));
  return ids;
}

std::vector<std::string> SubwordVocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  std::string cur;
  bool pending = false;
  for (int id : ids) {
    cur += display(id);
    pending = true;
    if (is_word_final(id)) {
      words.push_back(std::move(cur));
      cur.clear();
      pending = false;
    }
  }
  if (pending) words.push_back(std::move(cur));
  return words;
}

std::string SubwordVocab::serialize() const {
  std::ostringstream out;
  out << "BPEv1 " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) out << a << ' ' << b << '\n';
  out << "TOKENS " << tokens_.size() << '\n';
  for (const auto& t : tokens_) out << t << '\n';
  out << "LABELS " << labels_.size() << '\n';
  for (const auto& l : labels_) out << l << '\n';
  return out.str();
}

SubwordVocab SubwordVocab::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto expect_header = [&](const std::string& tag) -> std::size_t {
    if (!std::getline(in, line)) throw DataError("vocabulary: missing " + tag + " header");
    std::istringstream hs(line);
    std::string got;
    std::size_t n = 0;
    if (!(hs >> got >> n) || got != tag) throw DataError("vocabulary: bad header '" + line + "'");
    return n;
  };
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw DataError(std::string("vocabulary: truncated ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  SubwordVocab v;
  v.tokens_.clear();
  v.token_ids_.clear();
  std::size_t n_merges = expect_header("BPEv1");
  for (std::size_t i = 0; i < n_merges; ++i) {
    std::string l = next_line("merge list");
    auto sp = l.find(' ');
    if (sp == std::string::npos) throw DataError("vocabulary: bad merge line '" + l + "'");
    v.merge_rank_.emplace(SubwordVocab::Merge{l.substr(0, sp), l.substr(sp + 1)}, static_cast<int>(i));
    v.merges_.emplace_back(l.substr(0, sp), l.substr(sp + 1));
  }
  std::size_t n_tokens = expect_header("TOKENS");
  for (std::size_t i = 0; i < n_tokens; ++i) {
    std::string t = next_line("token table");
    if (v.token_ids_.count(t)) throw DataError("vocabulary: duplicate token '" + t + "'");
    v.add_token(t);
  }
  if (v.tokens_.empty() || v.tokens_[0] != kUnknownToken)
    throw DataError("vocabulary: token 0 must be " + std::string(kUnknownToken));
  std::size_t n_labels = expect_header("LABELS");
  for (std::size_t i = 0; i < n_labels; ++i) v.add_label(next_line("label table"));
  return v;
}

void SubwordVocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path);
  out << serialize();
}

SubwordVocab SubwordVocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

SubwordVocab train_bpe(const std::vector<std::vector<std::string>>& corpus,
                       std::size_t merge_count) {
  std::map<std::string, long> freq;
  for (const auto& sentence : corpus)
    for (const auto& w : sentence)
      if (!w.empty()) ++freq[w];
  if (freq.empty()) throw ContractError("train_bpe: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  std::set<std::string> alphabet;
  for (const auto& [w, n] : freq) {
    words.push_back(split_symbols(w));
    counts.push_back(n);
    alphabet.insert(words.back().begin(), words.back().end());
  }

  SubwordVocab v;
  for (const auto& s : alphabet) v.add_token(s);

  for (std::size_t round = 0; round < merge_count; ++round) {
    std::map<SubwordVocab::Merge, long> pairs;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        pairs[{words[w][i], words[w][i + 1]}] += counts[w];
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;
    SubwordVocab::Merge m = best->first;
    for (auto& w : words) apply_merge(w, m);
    v.merge_rank_.emplace(m, static_cast<int>(v.merges_.size()));
    v.merges_.push_back(m);
    v.add_token(m.first + m.second);
  }
  return v;
}

SubwordVocab build_vocab(const std::vector<Tree>& trees, std::size_t merge_count) {
  std::vector<std::vector<std::string>> corpus;
  std::set<std::string> labels;
  std::function<void(const Tree&)> collect = [&](const Tree& t) {
    if (t.is_leaf()) return;
    labels.insert(t.label);
    for (const auto& c : t.children) collect(c);
  };
  for (const auto& t : trees) {
    corpus.push_back(t.leaves());
    collect(t);
  }
  SubwordVocab v = train_bpe(corpus, merge_count);
  for (const auto& l : labels) v.add_label(l);
  return v;
}

Tree tokenize_tree(const Tree& tree, const SubwordVocab& vocab) {
  Tree out = tree;
  std::function<void(Tree&)> walk = [&](Tree& t) {
    t.id = vocab.label_id(t.label);
    std::vector<Tree> children;
    for (auto& c : t.children) {
      if (!c.is_leaf()) {
        walk(c);
        children.push_back(std::move(c));
        continue;
      }
      for (const auto& piece : vocab.encode_pieces(c.token)) {
        children.push_back(
            Tree::leaf(strip_marker(piece), vocab.token_id(piece), ends_with_marker(piece)));
      }
    }
    t.children = std::move(children);
  };
  walk(out);
  return out;
}

Tree detokenize_tree(const Tree& tree) {
  Tree out = tree;
  std::function<void(Tree&)> walk = [&](Tree& t) {
    std::vector<Tree> children;
    std::string word;
    bool pending = false;
    for (auto& c : t.children) {
      if (!c.is_leaf()) {
        if (pending) children.push_back(Tree::leaf(std::move(word)));
        word.clear();
        pending = false;
        walk(c);
        children.push_back(std::move(c));
        continue;
      }
      word += c.token;
      pending = true;
      if (c.word_end) {
        children.push_back(Tree::leaf(std::move(word)));
        word.clear();
        pending = false;
      }
    }
    if (pending) children.push_back(Tree::leaf(std::move(word)));
    t.children = std::move(children);
  };
  walk(out);
  return out;
}

std::vector<Action> encode_actions(const Tree& tokenized, const SubwordVocab& vocab) {
  std::vector<Action> out;
  std::function<void(const Tree&)> emit = [&](const Tree& t) {
    if (t.is_leaf()) {
      out.push_back(Action::gen(t.id >= 0 ? t.id : vocab.unknown_id()));
      return;
    }
    int label = t.id >= 0 ? t.id : vocab.label_id(t.label);
    if (label < 0) throw DataError("label not in vocabulary: " + t.label);
    out.push_back(Action::nt(label));
    for (const auto& c : t.children) emit(c);
    out.push_back(Action::reduce());
  };
  emit(tokenized);
  return out;
}

std::vector<LabeledAction> label_actions(const std::vector<Action>& actions,
                                         const SubwordVocab& vocab) {
  std::vector<LabeledAction> out;
  out.reserve(actions.size());
  for (const auto& a : actions) {
    switch (a.kind) {
      case ActionKind::kGen:
        out.push_back(LabeledAction::gen(vocab.display(a.symbol)));
        break;
      case ActionKind::kNt:
        out.push_back(LabeledAction::nt(vocab.label(a.symbol)));
        break;
      case ActionKind::kReduce:
        out.push_back(LabeledAction::reduce());
        break;
    }
  }
  return out;
}

Tree decode_actions(const std::vector<Action>& actions, const SubwordVocab& vocab) {
  Tree t = actions_to_tree(label_actions(actions, vocab));
  // Re-attach ids in the same pre-order the actions were emitted in.
  std::size_t i = 0;
  std::function<void(Tree&)> walk = [&](Tree& n) {
    const Action& a = actions[i++];
    n.id = a.symbol;
    if (n.is_leaf()) {
      n.word_end = vocab.is_word_final(a.symbol);
      return;
    }
    for (auto& c : n.children) walk(c);
    ++i;  // REDUCE
  };
  walk(t);
  return t;
}

}  // namespace cag::treebank
