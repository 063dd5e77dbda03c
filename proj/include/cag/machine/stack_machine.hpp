#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cag/treebank/actions.hpp"
#include "cag/treebank/tree.hpp"

// Symbolic top-down generative transition system. Knows nothing about
// vectors: each stack entry carries an integer payload slot that the neural
// layer maps to its own representation.
namespace cag::machine {

using treebank::Action;
using treebank::ActionKind;
using treebank::Tree;

enum class EntryTag { kOpenNt, kTerminal, kClosed };

struct StackEntry {
  EntryTag tag = EntryTag::kOpenNt;
  int symbol = -1;  // label id (open/closed) or token id (terminal)
  int slot = -1;    // index of the action that pushed this entry
  // Completed subtree for CLOSED entries (ids only, strings empty).
  std::shared_ptr<const Tree> subtree;
};

struct LegalityConstraints {
  int max_open_nts = 100;
  int max_consecutive_nts = 8;
  bool require_word_before_reduce = true;  // REDUCE needs at least one child
};

struct ParserState {
  std::vector<StackEntry> stack;  // bottom -> top
  int open_nt_count = 0;
  int words_generated = 0;
  int consecutive_nts = 0;
  int steps = 0;  // actions applied so far; the next pushed slot
  bool finished = false;

  std::string summary() const;
};

// Which kinds are legal; a legal GEN admits every token and a legal NT
// every label.
struct LegalSet {
  bool reduce = false;
  bool nt = false;
  bool gen = false;

  bool empty() const { return !reduce && !nt && !gen; }
  bool allows(ActionKind kind) const;
  bool allows(const Action& a) const { return allows(a.kind); }
};

// Emitted by REDUCE: the popped payload slots in surface order, the open
// nonterminal's slot first, then its children left to right.
struct CompositionRequest {
  int label = -1;
  std::vector<int> slots;
};

ParserState initial_state();

LegalSet legal_actions(const ParserState& state, const LegalityConstraints& c = {});

// Pure transition. Throws TransitionError naming the action and the state
// when the action is not legal.
std::pair<ParserState, std::optional<CompositionRequest>> apply_action(
    const ParserState& state, const Action& action, const LegalityConstraints& c = {});

// Replays a sequence from the initial state; throws TransitionError at the
// first illegal action, with its index in the message.
ParserState replay(const std::vector<Action>& actions, const LegalityConstraints& c = {},
                   std::vector<CompositionRequest>* requests = nullptr);

// The finished tree (ids only). Throws ContractError if not finished.
const Tree& result_tree(const ParserState& state);

}  // namespace cag::machine
