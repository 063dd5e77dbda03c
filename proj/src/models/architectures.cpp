#include <algorithm>

#include "cag/errors.hpp"
#include "cag/models/model.hpp"
#include "cag/nn/ops.hpp"

namespace cag::models {

using namespace cag::nn;
using machine::EntryTag;
using machine::ParserState;

namespace {

// Index of the nearest open nonterminal on the symbolic stack.
std::size_t open_index(const ParserState& p) {
  std::size_t i = p.stack.size();
  while (i > 0 && p.stack[i - 1].tag != EntryTag::kOpenNt) --i;
  if (i == 0) throw ContractError("REDUCE with no open nonterminal");
  return i - 1;
}

// ---------------------------------------------------------------- LSTM, ActionLSTM

class RecurrentModel final : public Model {
 public:
  RecurrentModel(const ModelConfig& c, std::mt19937_64& rng) : Model(c) {
    make_embeddings(rng);
    lstm_ = make_lstm(store_, "lstm", c.hidden_dim, c.hidden_dim, c.layers, rng);
    make_head(rng);
  }

 protected:
  struct LstmCore : Core {
    LstmState state;
  };

  Var first_input() const { return syntactic() ? lookup(*start_, 0) : lookup(*tok_emb_, eos_id()); }

  Var input(const Action& a) const {
    switch (a.kind) {
      case ActionKind::kGen:
        return lookup(*tok_emb_, a.symbol);
      case ActionKind::kNt:
        return lookup(*nt_emb_, a.symbol);
      case ActionKind::kReduce:
        break;
    }
    return lookup(*reduce_emb_, 0);
  }

  std::shared_ptr<const Core> step(const LstmState& state, const Var& x, const Dropout& drop) const {
    auto core = std::make_shared<LstmCore>();
    auto [h, next] = lstm_step(lstm_, state, drop(x), drop);
    core->hidden = h;
    core->state = std::move(next);
    return core;
  }

  std::shared_ptr<const Core> initial_core(const Dropout& drop) const override {
    return step(lstm_zero_state(lstm_), first_input(), drop);
  }

  std::shared_ptr<const Core> push(const ModelState& before, const Action& a, const Dropout& drop) const override {
    return step(static_cast<const LstmCore&>(*before.core).state, input(a), drop);
  }

  Var uncached_hidden(const std::vector<Action>& prefix) const override {
    auto [h, s] = lstm_step(lstm_, lstm_zero_state(lstm_), first_input());
    for (const auto& a : prefix) std::tie(h, s) = lstm_step(lstm_, s, input(a));
    return h;
  }

 private:
  LstmParams lstm_;
};

// ---------------------------------------------------------------- Transformer, PLM, PLM-mask

class SequenceAttentionModel final : public Model {
 public:
  SequenceAttentionModel(const ModelConfig& c, std::mt19937_64& rng) : Model(c) {
    make_embeddings(rng);
    tf_ = make_transformer(store_, "tf", c.hidden_dim, c.layers, c.heads, c.max_positions, rng);
    make_head(rng);
  }

 protected:
  struct Position {
    std::shared_ptr<const Position> below;
    std::size_t index = 0;
    PositionKV kv;
  };
  struct ChainCore : Core {
    std::shared_ptr<const Position> top;
    std::vector<std::size_t> open;  // positions of still-open NTs
  };

  bool masked() const { return config_.architecture == Architecture::kPlmMask; }

  std::vector<KeyMask> masks(std::size_t t, const std::vector<std::size_t>& open) const {
    if (!masked()) return {};
    std::vector<KeyMask> m(static_cast<std::size_t>(config_.heads));
    m[0].assign(t + 1, false);
    m[1].assign(t + 1, true);
    std::size_t from = open.empty() ? t : open.back();
    for (std::size_t j = from; j <= t; ++j) m[0][j] = true;
    for (std::size_t j = from; j < t; ++j) m[1][j] = false;
    return m;
  }

  Var first_input() const { return syntactic() ? lookup(*start_, 0) : lookup(*tok_emb_, eos_id()); }

  Var input(const Action& a) const {
    switch (a.kind) {
      case ActionKind::kGen:
        return lookup(*tok_emb_, a.symbol);
      case ActionKind::kNt:
        return lookup(*nt_emb_, a.symbol);
      case ActionKind::kReduce:
        break;
    }
    return lookup(*reduce_emb_, 0);
  }

  std::shared_ptr<const Core> extend(const std::shared_ptr<const Position>& below, std::vector<std::size_t> open,
                                     const Var& x, const Dropout& drop) const {
    auto node = std::make_shared<Position>();
    node->below = below;
    node->index = below ? below->index + 1 : 0;
    node->kv = transformer_position(tf_, node->index, drop(x), chain<PositionKV>(below), masks(node->index, open),
                                    drop);
    auto core = std::make_shared<ChainCore>();
    core->hidden = node->kv.output;
    core->top = std::move(node);
    core->open = std::move(open);
    return core;
  }

  std::shared_ptr<const Core> initial_core(const Dropout& drop) const override {
    return extend(nullptr, {}, first_input(), drop);
  }

  std::shared_ptr<const Core> push(const ModelState& before, const Action& a, const Dropout& drop) const override {
    const auto& core = static_cast<const ChainCore&>(*before.core);
    std::vector<std::size_t> open = core.open;
    if (a.kind == ActionKind::kNt) open.push_back(core.top->index + 1);
    if (a.kind == ActionKind::kReduce && !open.empty()) open.pop_back();
    return extend(core.top, std::move(open), input(a), drop);
  }

  Var uncached_hidden(const std::vector<Action>& prefix) const override {
    AttentionCache cache;
    const int heads = config_.heads;
    auto m = [&](std::size_t n) {
      return masked() ? plm_mask_heads({prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(n)}, heads)
                      : std::vector<KeyMask>{};
    };
    Var h = transformer_step(tf_, cache, first_input(), m(0));
    for (std::size_t i = 0; i < prefix.size(); ++i) h = transformer_step(tf_, cache, input(prefix[i]), m(i + 1));
    return h;
  }

 private:
  TransformerParams tf_;

  template <typename T>
  static std::vector<const T*> chain(const std::shared_ptr<const Position>& top) {
    std::vector<const T*> out;
    for (const Position* n = top.get(); n; n = n->below.get()) out.push_back(&n->kv);
    std::reverse(out.begin(), out.end());
    return out;
  }
};

// ---------------------------------------------------------------- stack models

Var entry_input(const Action& a, Param& tok, Param& nt) {
  return a.kind == ActionKind::kGen ? lookup(tok, a.symbol) : lookup(nt, a.symbol);
}

class RnngModel final : public Model {
 public:
  RnngModel(const ModelConfig& c, std::mt19937_64& rng) : Model(c) {
    make_embeddings(rng);
    lstm_ = make_lstm(store_, "stack", c.hidden_dim, c.hidden_dim, c.layers, rng);
    comp_ = make_composer(store_, "compose", c.hidden_dim, c.composer_hidden ? c.composer_hidden : c.hidden_dim, rng);
    make_head(rng);
  }

 protected:
  struct StackNode {
    std::shared_ptr<const StackNode> below;
    Var embedding;
    LstmState state;
    Var output;
  };
  struct StackCore : Core {
    std::shared_ptr<const StackNode> top;  // bottom is the sentinel
  };

  std::shared_ptr<const Core> make(const std::shared_ptr<const StackNode>& below, const Var& e,
                                   const Dropout& drop) const {
    auto node = std::make_shared<StackNode>();
    node->below = below;
    node->embedding = e;
    LstmState from = below ? below->state : lstm_zero_state(lstm_);
    std::tie(node->output, node->state) = lstm_step(lstm_, from, e, drop);
    auto core = std::make_shared<StackCore>();
    core->hidden = node->output;
    core->top = std::move(node);
    return core;
  }

  std::shared_ptr<const Core> initial_core(const Dropout& drop) const override {
    return make(nullptr, drop(lookup(*start_, 0)), drop);
  }

  std::shared_ptr<const Core> push(const ModelState& before, const Action& a, const Dropout& drop) const override {
    const auto& core = static_cast<const StackCore&>(*before.core);
    if (a.kind != ActionKind::kReduce) return make(core.top, drop(entry_input(a, *tok_emb_, *nt_emb_)), drop);
    std::size_t popped = before.parser.stack.size() - open_index(before.parser);
    std::vector<Var> span;
    std::shared_ptr<const StackNode> n = core.top;
    for (std::size_t i = 0; i < popped; ++i, n = n->below) span.push_back(n->embedding);
    std::reverse(span.begin(), span.end());
    return make(n, compose(span, comp_), drop);
  }

  Var uncached_hidden(const std::vector<Action>& prefix) const override {
    std::vector<Var> stack;
    ParserState p = machine::initial_state();
    for (const auto& a : prefix) {
      if (a.kind == ActionKind::kReduce) {
        std::size_t open = open_index(p);
        std::vector<Var> span(stack.begin() + static_cast<std::ptrdiff_t>(open), stack.end());
        stack.resize(open);
        stack.push_back(compose(span, comp_));
      } else {
        stack.push_back(entry_input(a, *tok_emb_, *nt_emb_));
      }
      p = machine::apply_action(p, a, config_.legality).first;
    }
    auto [h, s] = lstm_step(lstm_, lstm_zero_state(lstm_), lookup(*start_, 0));
    for (const auto& e : stack) std::tie(h, s) = lstm_step(lstm_, s, e);
    return h;
  }

 private:
  LstmParams lstm_;
  ComposerParams comp_;
};

class CagModel final : public Model {
 public:
  CagModel(const ModelConfig& c, std::mt19937_64& rng) : Model(c) {
    make_embeddings(rng);
    tf_ = make_transformer(store_, "tf", c.hidden_dim, c.layers, c.heads, c.max_positions, rng);
    comp_ = make_composer(store_, "compose", c.hidden_dim, c.composer_hidden ? c.composer_hidden : c.hidden_dim, rng);
    make_head(rng);
  }

 protected:
  struct StackNode {
    std::shared_ptr<const StackNode> below;
    std::size_t depth = 0;
    Var embedding;
    PositionKV kv;
  };
  struct StackCore : Core {
    std::shared_ptr<const StackNode> top;  // null for the empty stack
  };

  std::shared_ptr<const Core> make(const std::shared_ptr<const StackNode>& below, const Var& e,
                                   const Dropout& drop) const {
    auto node = std::make_shared<StackNode>();
    node->below = below;
    node->depth = below ? below->depth + 1 : 0;
    node->embedding = e;
    std::vector<const PositionKV*> previous;
    for (const StackNode* n = below.get(); n; n = n->below.get()) previous.push_back(&n->kv);
    std::reverse(previous.begin(), previous.end());
    node->kv = transformer_position(tf_, node->depth, e, previous, {}, drop);
    auto core = std::make_shared<StackCore>();
    core->hidden = node->kv.output;
    core->top = std::move(node);
    return core;
  }

  std::shared_ptr<const Core> initial_core(const Dropout&) const override {
    auto core = std::make_shared<StackCore>();
    core->hidden = lookup(*start_, 0);
    return core;
  }

  std::shared_ptr<const Core> push(const ModelState& before, const Action& a, const Dropout& drop) const override {
    const auto& core = static_cast<const StackCore&>(*before.core);
    if (a.kind != ActionKind::kReduce) return make(core.top, drop(entry_input(a, *tok_emb_, *nt_emb_)), drop);
    std::size_t popped = before.parser.stack.size() - open_index(before.parser);
    std::vector<Var> span;
    std::shared_ptr<const StackNode> n = core.top;
    for (std::size_t i = 0; i < popped; ++i, n = n->below) span.push_back(n->embedding);
    std::reverse(span.begin(), span.end());
    return make(n, compose(span, comp_), drop);
  }

  Var uncached_hidden(const std::vector<Action>& prefix) const override {
    std::vector<Var> stack;
    ParserState p = machine::initial_state();
    for (const auto& a : prefix) {
      if (a.kind == ActionKind::kReduce) {
        std::size_t open = open_index(p);
        std::vector<Var> span(stack.begin() + static_cast<std::ptrdiff_t>(open), stack.end());
        stack.resize(open);
        stack.push_back(compose(span, comp_));
      } else {
        stack.push_back(entry_input(a, *tok_emb_, *nt_emb_));
      }
      p = machine::apply_action(p, a, config_.legality).first;
    }
    if (stack.empty()) return lookup(*start_, 0);
    AttentionCache cache;
    return stack_attention(stack, cache, tf_);
  }

 private:
  TransformerParams tf_;
  ComposerParams comp_;
};

}  // namespace

std::unique_ptr<Model> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  switch (config.architecture) {
    case Architecture::kLstm:
    case Architecture::kActionLstm:
      return std::make_unique<RecurrentModel>(config, rng);
    case Architecture::kTransformer:
    case Architecture::kPlm:
    case Architecture::kPlmMask:
      return std::make_unique<SequenceAttentionModel>(config, rng);
    case Architecture::kRnng:
      return std::make_unique<RnngModel>(config, rng);
    case Architecture::kCag:
      return std::make_unique<CagModel>(config, rng);
  }
  throw ConfigError("unknown architecture");
}

}  // namespace cag::models
