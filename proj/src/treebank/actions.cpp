#include "cag/treebank/actions.hpp"

#include "cag/errors.hpp"

namespace cag::treebank {

const char* kind_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::kGen:
      return "GEN";
    case ActionKind::kNt:
      return "NT";
    case ActionKind::kReduce:
      return "REDUCE";
  }
  return "?";
}

std::string to_string(const LabeledAction& a) {
  if (a.kind == ActionKind::kReduce) return "REDUCE";
  return std::string(kind_name(a.kind)) + "(" + a.symbol + ")";
}

namespace {

void emit(const Tree& t, std::vector<LabeledAction>& out) {
  if (t.is_leaf()) {
    out.push_back(LabeledAction::gen(t.token));
    return;
  }
  out.push_back(LabeledAction::nt(t.label));
  for (const auto& c : t.children) emit(c, out);
  out.push_back(LabeledAction::reduce());
}

}  // namespace

std::vector<LabeledAction> tree_to_actions(const Tree& tree) {
  std::vector<LabeledAction> out;
  out.reserve(tree.leaf_count() + 2 * tree.internal_count());
  emit(tree, out);
  return out;
}

Tree actions_to_tree(const std::vector<LabeledAction>& actions) {
  std::vector<Tree> open;  // constituents under construction, outermost first
  bool root_closed = false;
  Tree root;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    if (root_closed) throw StructureError("action after the root constituent closed", i);
    switch (a.kind) {
      case ActionKind::kNt:
        open.push_back(Tree::node(a.symbol, {}));
        break;
      case ActionKind::kGen:
        if (open.empty()) throw StructureError("GEN before the first NT", i);
        open.back().children.push_back(Tree::leaf(a.symbol));
        break;
      case ActionKind::kReduce: {
        if (open.empty()) throw StructureError("REDUCE with no open constituent", i);
        if (open.back().children.empty()) throw StructureError("empty constituent", i);
        Tree done = std::move(open.back());
        open.pop_back();
        if (open.empty()) {
          root = std::move(done);
          root_closed = true;
        } else {
          open.back().children.push_back(std::move(done));
        }
        break;
      }
    }
  }
  if (!root_closed) throw StructureError("unclosed constituent at end of sequence", actions.size());
  return root;
}

}  // namespace cag::treebank
