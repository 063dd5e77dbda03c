#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "cag/treebank/tree.hpp"

namespace cag::treebank {

// Ordering of the kinds is part of the contract: it is the tie-break order
// used by the beam decoder (REDUCE < NT < GEN).
enum class ActionKind : std::uint8_t { kReduce = 0, kNt = 1, kGen = 2 };

const char* kind_name(ActionKind kind);

// One generation step over integer ids: GEN(token id), NT(label id), REDUCE.
struct Action {
  ActionKind kind = ActionKind::kReduce;
  int symbol = -1;  // -1 iff REDUCE

  static Action gen(int token) { return {ActionKind::kGen, token}; }
  static Action nt(int label) { return {ActionKind::kNt, label}; }
  static Action reduce() { return {ActionKind::kReduce, -1}; }

  bool valid() const { return (kind == ActionKind::kReduce) == (symbol < 0); }

  friend auto operator<=>(const Action&, const Action&) = default;
};

// The same step over strings, as produced directly from a Tree.
struct LabeledAction {
  ActionKind kind = ActionKind::kReduce;
  std::string symbol;

  static LabeledAction gen(std::string token) { return {ActionKind::kGen, std::move(token)}; }
  static LabeledAction nt(std::string label) { return {ActionKind::kNt, std::move(label)}; }
  static LabeledAction reduce() { return {ActionKind::kReduce, {}}; }

  friend bool operator==(const LabeledAction&, const LabeledAction&) = default;
};

std::string to_string(const LabeledAction& a);  // "NT(S)", "GEN(The)", "REDUCE"

// Top-down, left-to-right oracle: NT on entering a constituent, GEN per leaf,
// REDUCE on leaving. Length is leaves + 2 * internal nodes.
std::vector<LabeledAction> tree_to_actions(const Tree& tree);

// Inverse of tree_to_actions. Throws StructureError naming the failing index
// for premature/empty REDUCE, GEN outside any constituent, actions after the
// root closed, or unclosed constituents at the end.
Tree actions_to_tree(const std::vector<LabeledAction>& actions);

}  // namespace cag::treebank
