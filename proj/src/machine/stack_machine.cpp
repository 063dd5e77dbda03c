#include "cag/machine/stack_machine.hpp"

#include <sstream>

#include "cag/errors.hpp"

namespace cag::machine {

std::string ParserState::summary() const {
  std::ostringstream s;
  s << "stack=[";
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (i) s << ' ';
    switch (stack[i].tag) {
      case EntryTag::kOpenNt:
        s << "(" << stack[i].symbol;
        break;
      case EntryTag::kTerminal:
        s << "t" << stack[i].symbol;
        break;
      case EntryTag::kClosed:
        s << "c" << stack[i].symbol;
        break;
    }
  }
  s << "] open=" << open_nt_count << " words=" << words_generated
    << (finished ? " finished" : "");
  return s.str();
}

bool LegalSet::allows(ActionKind kind) const {
  switch (kind) {
    case ActionKind::kReduce:
      return reduce;
    case ActionKind::kNt:
      return nt;
    case ActionKind::kGen:
      return gen;
  }
  return false;
}

ParserState initial_state() { return {}; }

LegalSet legal_actions(const ParserState& state, const LegalityConstraints& c) {
  LegalSet s;
  if (state.finished) return s;
  bool top_open = !state.stack.empty() && state.stack.back().tag == EntryTag::kOpenNt;
  s.reduce = state.open_nt_count >= 1 && !state.stack.empty() &&
             (!top_open || !c.require_word_before_reduce);
  s.gen = state.open_nt_count >= 1;
  s.nt = state.open_nt_count < c.max_open_nts && state.consecutive_nts < c.max_consecutive_nts;
  return s;
}

std::pair<ParserState, std::optional<CompositionRequest>> apply_action(
    const ParserState& state, const Action& action, const LegalityConstraints& c) {
  if (!action.valid() || !legal_actions(state, c).allows(action)) {
    std::string what = std::string("illegal ") + treebank::kind_name(action.kind);
    if (action.kind != ActionKind::kReduce) what += "(" + std::to_string(action.symbol) + ")";
    throw TransitionError(what + " in state " + state.summary());
  }
  ParserState next = state;
  std::optional<CompositionRequest> request;
  const int slot = next.steps++;
  switch (action.kind) {
    case ActionKind::kGen:
      next.stack.push_back({EntryTag::kTerminal, action.symbol, slot, nullptr});
      ++next.words_generated;
      next.consecutive_nts = 0;
      break;
    case ActionKind::kNt:
      next.stack.push_back({EntryTag::kOpenNt, action.symbol, slot, nullptr});
      ++next.open_nt_count;
      ++next.consecutive_nts;
      break;
    case ActionKind::kReduce: {
      std::size_t open = next.stack.size();
      while (open > 0 && next.stack[open - 1].tag != EntryTag::kOpenNt) --open;
      --open;  // index of the nearest open nonterminal
      const StackEntry& nt = next.stack[open];
      request = CompositionRequest{nt.symbol, {}};
      Tree subtree = Tree::node({}, {}, nt.symbol);
      for (std::size_t i = open; i < next.stack.size(); ++i) {
        const StackEntry& e = next.stack[i];
        request->slots.push_back(e.slot);
        if (i == open) continue;
        if (e.tag == EntryTag::kTerminal)
          subtree.children.push_back(Tree::leaf({}, e.symbol));
        else
          subtree.children.push_back(*e.subtree);
      }
      int label = nt.symbol;
      next.stack.resize(open);
      next.stack.push_back(
          {EntryTag::kClosed, label, slot, std::make_shared<const Tree>(std::move(subtree))});
      --next.open_nt_count;
      next.consecutive_nts = 0;
      break;
    }
  }
  next.finished = next.open_nt_count == 0 && next.stack.size() == 1 &&
                  next.stack.back().tag == EntryTag::kClosed && next.words_generated >= 1;
  return {std::move(next), std::move(request)};
}

ParserState replay(const std::vector<Action>& actions, const LegalityConstraints& c,
                   std::vector<CompositionRequest>* requests) {
  ParserState s = initial_state();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      auto [next, req] = apply_action(s, actions[i], c);
      if (req && requests) requests->push_back(std::move(*req));
      s = std::move(next);
    } catch (const TransitionError& e) {
      throw TransitionError("action " + std::to_string(i) + ": " + e.what());
    }
  }
  return s;
}

const Tree& result_tree(const ParserState& state) {
  if (!state.finished) throw ContractError("result_tree: parser state is not finished");
  return *state.stack.back().subtree;
}

}  // namespace cag::machine
