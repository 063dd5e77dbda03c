#include "cag/models/model.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "cag/errors.hpp"
#include "cag/nn/ops.hpp"

namespace cag::models {

using namespace cag::nn;

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Flat syntactic distribution [REDUCE, NT.., GEN..] from the type
// log-probabilities [REDUCE, GEN, NT..] and (optionally) the token ones.
Var assemble(const Var& types, const Var& tokens, Eigen::Index labels, Eigen::Index vocab) {
  Vec y(1 + labels + vocab);
  y(0) = types->value(0);
  y.segment(1, labels) = types->value.segment(2, labels);
  if (tokens)
    y.segment(1 + labels, vocab) = tokens->value.array() + types->value(1);
  else
    y.segment(1 + labels, vocab).setConstant(kNegInf);
  std::vector<Var> inputs{types};
  if (tokens) inputs.push_back(tokens);
  return make_node(std::move(y), std::move(inputs), [labels, vocab](Node& self) {
    Vec gt = Vec::Zero(2 + labels);
    gt(0) = self.grad(0);
    gt.segment(2, labels) = self.grad.segment(1, labels);
    if (self.inputs.size() > 1) {
      Vec gw = self.grad.segment(1 + labels, vocab);
      gt(1) = gw.sum();
      self.inputs[1]->accumulate(gw);
    }
    self.inputs[0]->accumulate(gt);
  });
}

}  // namespace

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kLstm:
      return "LSTM";
    case Architecture::kActionLstm:
      return "ActionLSTM";
    case Architecture::kRnng:
      return "RNNG";
    case Architecture::kTransformer:
      return "Transformer";
    case Architecture::kPlm:
      return "PLM";
    case Architecture::kPlmMask:
      return "PLM-mask";
    case Architecture::kCag:
      return "CAG";
  }
  return "?";
}

Architecture parse_architecture(const std::string& name) {
  for (Architecture a : kAllArchitectures)
    if (lower(architecture_name(a)) == lower(name)) return a;
  throw ConfigError("unknown architecture '" + name + "'");
}

bool is_syntactic(Architecture a) { return a != Architecture::kLstm && a != Architecture::kTransformer; }

bool uses_attention(Architecture a) {
  return a == Architecture::kTransformer || a == Architecture::kPlm || a == Architecture::kPlmMask ||
         a == Architecture::kCag;
}

bool uses_composition(Architecture a) { return a == Architecture::kRnng || a == Architecture::kCag; }

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (layers < 1) fail("layers must be positive");
  if (hidden_dim < 1) fail("hidden_dim must be positive");
  if (input_dim != hidden_dim) fail("input_dim must equal hidden_dim");
  if (terminals < 1) fail("terminals must be positive");
  if (is_syntactic(architecture) && nonterminals < 1) fail("nonterminals must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (composer_hidden < 0) fail("composer_hidden must be non-negative");
  if (max_positions < 1) fail("max_positions must be positive");
  if (uses_attention(architecture)) {
    if (heads < 1 || hidden_dim % heads != 0) fail("heads must divide hidden_dim");
    if (architecture == Architecture::kPlmMask && heads < 2) fail("PLM-mask needs at least 2 heads");
  }
  if (legality.max_open_nts < 1 || legality.max_consecutive_nts < 1) fail("legality limits must be positive");
}

std::string ModelConfig::describe() const {
  std::ostringstream s;
  s << "architecture=" << architecture_name(architecture) << '\n'
    << "layers=" << layers << '\n'
    << "hidden_dim=" << hidden_dim << '\n'
    << "input_dim=" << input_dim << '\n'
    << "heads=" << heads << '\n'
    << "terminals=" << terminals << '\n'
    << "nonterminals=" << nonterminals << '\n'
    << "dropout=" << dropout << '\n'
    << "composer_hidden=" << (composer_hidden ? composer_hidden : hidden_dim) << '\n'
    << "max_positions=" << max_positions << '\n'
    << "factored_head=" << factored_head << '\n'
    << "tie_embeddings=" << tie_embeddings << '\n'
    << "max_open_nts=" << legality.max_open_nts << '\n'
    << "max_consecutive_nts=" << legality.max_consecutive_nts << '\n'
    << "require_word_before_reduce=" << legality.require_word_before_reduce << '\n';
  return s.str();
}

std::vector<bool> NextDistribution::mask() const {
  std::vector<bool> m(static_cast<std::size_t>(logprobs.size()));
  for (Eigen::Index i = 0; i < logprobs.size(); ++i) m[static_cast<std::size_t>(i)] = logprobs(i) > kNegInf;
  return m;
}

double NextDistribution::logprob(const Action& a) const {
  Eigen::Index i;
  if (!syntactic) {
    if (a.kind != ActionKind::kGen) return kNegInf;
    i = a.symbol;
  } else if (a.kind == ActionKind::kReduce) {
    i = 0;
  } else if (a.kind == ActionKind::kNt) {
    if (a.symbol < 0 || a.symbol >= nonterminals) return kNegInf;
    i = 1 + a.symbol;
  } else {
    i = 1 + nonterminals + a.symbol;
  }
  if (a.kind != ActionKind::kReduce && a.symbol < 0) return kNegInf;
  if (i < 0 || i >= logprobs.size()) return kNegInf;
  return logprobs(i);
}

Model::Model(ModelConfig config) : config_(std::move(config)) { config_.validate(); }

std::size_t Model::inventory_size() const {
  if (!syntactic()) return static_cast<std::size_t>(config_.terminals) + 1;
  return 1 + static_cast<std::size_t>(config_.nonterminals) + static_cast<std::size_t>(config_.terminals);
}

std::size_t Model::flat_index(const Action& a) const {
  const int L = config_.nonterminals, V = config_.terminals;
  if (!syntactic()) {
    if (a.kind != ActionKind::kGen || a.symbol < 0 || a.symbol > V)
      throw ContractError("sequence models only generate tokens and EOS");
    return static_cast<std::size_t>(a.symbol);
  }
  switch (a.kind) {
    case ActionKind::kReduce:
      return 0;
    case ActionKind::kNt:
      if (a.symbol < 0 || a.symbol >= L) throw ContractError("NT label out of range");
      return 1 + static_cast<std::size_t>(a.symbol);
    case ActionKind::kGen:
      if (a.symbol < 0 || a.symbol >= V) throw ContractError("GEN token out of range");
      return 1 + static_cast<std::size_t>(L + a.symbol);
  }
  return 0;
}

void Model::make_embeddings(std::mt19937_64& rng) {
  const int d = config_.hidden_dim;
  if (syntactic()) {
    tok_emb_ = &store_.add("emb.tok", d, config_.terminals, Init::kUniform, rng);
    nt_emb_ = &store_.add("emb.nt", d, config_.nonterminals, Init::kUniform, rng);
    start_ = &store_.add("emb.start", d, 1, Init::kUniform, rng);
    if (!uses_composition(config_.architecture))
      reduce_emb_ = &store_.add("emb.reduce", d, 1, Init::kUniform, rng);
  } else {
    tok_emb_ = &store_.add("emb.tok", d, config_.terminals + 1, Init::kUniform, rng);
  }
}

void Model::make_head(std::mt19937_64& rng) {
  const int d = config_.hidden_dim;
  const int out = syntactic() ? config_.terminals : config_.terminals + 1;
  if (syntactic()) {
    int rows = (config_.factored_head ? 2 : 1) + config_.nonterminals;
    type_w_ = &store_.add("head.type.w", rows, d, Init::kUniform, rng);
    type_b_ = &store_.add("head.type.b", rows, 1, Init::kUniform, rng);
  }
  if (!config_.tie_embeddings) tok_out_w_ = &store_.add("head.tok.w", out, d, Init::kUniform, rng);
  tok_b_ = &store_.add("head.tok.b", out, 1, Init::kUniform, rng);
}

Var Model::token_logits(const Var& hidden) const {
  if (tok_out_w_) return affine(*tok_out_w_, tok_b_, hidden);
  return affine_transposed(*tok_emb_, tok_b_, hidden);
}

Var Model::head(const Var& hidden, const machine::LegalSet& legal, bool eos_allowed,
                const Dropout& drop) const {
  Var x = drop(hidden);
  if (!syntactic()) {
    std::vector<bool> mask(static_cast<std::size_t>(config_.terminals) + 1, legal.gen);
    mask.back() = legal.gen && eos_allowed;
    return log_softmax(token_logits(x), mask);
  }
  const std::size_t L = static_cast<std::size_t>(config_.nonterminals);
  const std::size_t V = static_cast<std::size_t>(config_.terminals);
  if (config_.factored_head) {
    std::vector<bool> tmask(2 + L, legal.nt);
    tmask[0] = legal.reduce;
    tmask[1] = legal.gen;
    Var types = log_softmax(affine(*type_w_, type_b_, x), tmask);
    Var tokens = legal.gen ? log_softmax(token_logits(x)) : nullptr;
    return assemble(types, tokens, static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(V));
  }
  std::vector<bool> mask(1 + L + V, legal.gen);
  mask[0] = legal.reduce;
  for (std::size_t i = 0; i < L; ++i) mask[1 + i] = legal.nt;
  return log_softmax(concat({affine(*type_w_, type_b_, x), token_logits(x)}), mask);
}

machine::LegalSet Model::legal(const ModelState& state) const {
  if (syntactic()) return machine::legal_actions(state.parser, config_.legality);
  machine::LegalSet s;
  s.gen = !state.finished;
  return s;
}

ModelState Model::start_with(const Dropout& drop) const {
  ModelState s;
  s.parser = machine::initial_state();
  s.core = initial_core(drop);
  return s;
}

ModelState Model::start() const {
  NoGradGuard guard;
  return start_with({});
}

Var Model::logprobs_var(const ModelState& state, const Dropout& drop) const {
  if (state.finished) throw ContractError("next_distribution: state is finished");
  return head(state.core->hidden, legal(state), !syntactic() && state.steps >= 1, drop);
}

NextDistribution Model::next_distribution(const ModelState& state) const {
  if (state.finished) throw ContractError("next_distribution: state is finished");
  if (!state.core->logprobs) {
    NoGradGuard guard;
    state.core->logprobs = std::make_shared<const Vec>(logprobs_var(state, {})->value);
  }
  NextDistribution d;
  d.legal = legal(state);
  d.logprobs = *state.core->logprobs;
  d.nonterminals = config_.nonterminals;
  d.syntactic = syntactic();
  return d;
}

ModelState Model::advance_with(const ModelState& state, const Action& action, double logprob,
                               const Dropout& drop) const {
  ModelState next;
  if (syntactic()) {
    next.parser = machine::apply_action(state.parser, action, config_.legality).first;
    next.finished = next.parser.finished;
  } else {
    next.finished = action.symbol == eos_id();
  }
  next.logprob = state.logprob + logprob;
  next.steps = state.steps + 1;
  // A finished state never predicts again, so its core is not built.
  if (!next.finished) next.core = push(state, action, drop);
  return next;
}

ModelState Model::advance(const ModelState& state, const Action& action) const {
  NoGradGuard guard;
  if (state.finished) throw TransitionError("advance: state is finished");
  if (syntactic() && !legal(state).allows(action))
    machine::apply_action(state.parser, action, config_.legality);  // throws with details
  double lp = next_distribution(state).logprob(action);
  if (lp == kNegInf)
    throw TransitionError("advance: action " + std::string(treebank::kind_name(action.kind)) + "(" +
                          std::to_string(action.symbol) + ") is not legal here");
  return advance_with(state, action, lp, {});
}

double Model::sequence_logprob(const std::vector<Action>& actions) const {
  ModelState s = start();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      s = advance(s, actions[i]);
    } catch (const TransitionError& e) {
      throw TransitionError("action " + std::to_string(i) + ": " + e.what());
    }
  }
  return s.logprob;
}

Var Model::sequence_loss(const std::vector<Action>& actions, const Dropout& drop) const {
  if (actions.empty()) throw ContractError("sequence_loss: empty sequence");
  ModelState s = start_with(drop);
  std::vector<Var> terms;
  terms.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (s.finished) throw TransitionError("action " + std::to_string(i) + ": sequence already finished");
    Var lp = logprobs_var(s, drop);
    std::size_t idx = flat_index(actions[i]);
    double v = lp->value(static_cast<Eigen::Index>(idx));
    if (v == kNegInf) throw TransitionError("action " + std::to_string(i) + ": illegal action");
    terms.push_back(pick(lp, static_cast<Eigen::Index>(idx)));
    s = advance_with(s, actions[i], v, drop);
  }
  return scale(sum(terms), -1.0);
}

Vec Model::recompute_logprobs(const std::vector<Action>& prefix) const {
  NoGradGuard guard;
  ModelState s;
  if (syntactic()) {
    s.parser = machine::replay(prefix, config_.legality);
    s.finished = s.parser.finished;
  } else {
    for (const auto& a : prefix)
      if (a.symbol == eos_id()) s.finished = true;
  }
  s.steps = static_cast<int>(prefix.size());
  if (s.finished) throw ContractError("recompute_logprobs: prefix is finished");
  return head(uncached_hidden(prefix), legal(s), !syntactic() && s.steps >= 1, {})->value;
}

std::vector<nn::KeyMask> plm_mask_heads(const std::vector<Action>& prefix, int heads) {
  if (heads < 2) throw ContractError("plm_mask_heads: needs at least 2 heads");
  const std::size_t t = prefix.size();
  std::vector<std::size_t> open;  // positions of still-open NTs
  for (std::size_t i = 0; i < t; ++i) {
    if (prefix[i].kind == ActionKind::kNt) open.push_back(i + 1);
    if (prefix[i].kind == ActionKind::kReduce && !open.empty()) open.pop_back();
  }
  nn::KeyMask inside(t + 1, false), outside(t + 1, true);
  if (open.empty()) {
    inside[t] = true;
  } else {
    for (std::size_t j = open.back(); j <= t; ++j) inside[j] = true;
    for (std::size_t j = open.back(); j < t; ++j) outside[j] = false;
  }
  std::vector<nn::KeyMask> masks(static_cast<std::size_t>(heads));
  masks[0] = std::move(inside);
  masks[1] = std::move(outside);
  return masks;
}

}  // namespace cag::models
