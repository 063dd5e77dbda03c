#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cag/machine/stack_machine.hpp"
#include "cag/nn/layers.hpp"
#include "cag/nn/params.hpp"
#include "cag/treebank/actions.hpp"

namespace cag::models {

using nn::Vec;
using nn::Var;
using treebank::Action;
using treebank::ActionKind;

enum class Architecture { kLstm, kActionLstm, kRnng, kTransformer, kPlm, kPlmMask, kCag };

inline constexpr Architecture kAllArchitectures[] = {
    Architecture::kLstm, Architecture::kActionLstm, Architecture::kRnng, Architecture::kTransformer,
    Architecture::kPlm,  Architecture::kPlmMask,    Architecture::kCag};

std::string architecture_name(Architecture a);
// Accepts the display names ("CAG", "PLM-mask", ...) case-insensitively.
// Throws ConfigError otherwise.
Architecture parse_architecture(const std::string& name);
// Syntactic models generate NT/GEN/REDUCE; the rest generate tokens + EOS.
bool is_syntactic(Architecture a);
bool uses_attention(Architecture a);
bool uses_composition(Architecture a);

struct ModelConfig {
  Architecture architecture = Architecture::kCag;
  int layers = 3;
  int hidden_dim = 256;
  int input_dim = 256;
  int heads = 4;
  int terminals = 0;     // subword vocabulary size
  int nonterminals = 0;  // label count (ignored by sequence models)
  double dropout = 0.1;
  int composer_hidden = 0;  // per direction; 0 means hidden_dim
  int max_positions = 256;  // stack positions (CAG) or sequence positions
  bool factored_head = true;
  bool tie_embeddings = true;
  machine::LegalityConstraints legality;

  // Throws ConfigError.
  void validate() const;
  // Canonical "key=value" lines; the config digest is taken over this.
  std::string describe() const;
};

// Architecture-specific incremental state (immutable once built).
struct Core {
  virtual ~Core() = default;
  Var hidden;                                    // summary h_t used by the head
  mutable std::shared_ptr<const Vec> logprobs;  // memoized next distribution
};

// Persistent prefix state: copying is cheap and forks share structure.
struct ModelState {
  machine::ParserState parser;  // unused by sequence models
  double logprob = 0.0;          // cumulative log p(prefix)
  int steps = 0;
  bool finished = false;
  std::shared_ptr<const Core> core;
};

// Log-probabilities over the flat action inventory. Syntactic models:
// [REDUCE, NT_0..NT_{L-1}, GEN_0..GEN_{V-1}]; sequence models:
// [token_0..token_{V-1}, EOS]. Illegal entries are -inf.
struct NextDistribution {
  machine::LegalSet legal;
  Vec logprobs;
  int nonterminals = 0;
  bool syntactic = true;

  std::vector<bool> mask() const;
  double logprob(const Action& a) const;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class Model {
 public:
  explicit Model(ModelConfig config);
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  std::int64_t parameter_count() const { return store_.parameter_count(); }
  bool syntactic() const { return is_syntactic(config_.architecture); }
  // Token id used for end-of-sentence by sequence models.
  int eos_id() const { return config_.terminals; }
  std::size_t inventory_size() const;
  std::size_t flat_index(const Action& a) const;

  ModelState start() const;
  // Throws ContractError on a finished state.
  NextDistribution next_distribution(const ModelState& state) const;
  // Throws TransitionError for an illegal action.
  ModelState advance(const ModelState& state, const Action& action) const;
  // Sum of stepwise log-probabilities; throws TransitionError naming the
  // first illegal index.
  double sequence_logprob(const std::vector<Action>& actions) const;

  // Summed negative log-likelihood with a recorded graph, for training.
  Var sequence_loss(const std::vector<Action>& actions, const nn::Dropout& drop) const;

  // Next-action log-probabilities after `prefix`, recomputed from scratch
  // without any incremental state.
  Vec recompute_logprobs(const std::vector<Action>& prefix) const;

  machine::LegalSet legal(const ModelState& state) const;

 protected:
  virtual std::shared_ptr<const Core> initial_core(const nn::Dropout& drop) const = 0;
  // Builds the core after `action` given the state before it.
  virtual std::shared_ptr<const Core> push(const ModelState& before, const Action& action,
                                           const nn::Dropout& drop) const = 0;
  // Summary vector after `prefix`, without incremental state.
  virtual Var uncached_hidden(const std::vector<Action>& prefix) const = 0;

  Var head(const Var& hidden, const machine::LegalSet& legal, bool eos_allowed,
           const nn::Dropout& drop) const;
  Var token_logits(const Var& hidden) const;

  ModelState start_with(const nn::Dropout& drop) const;
  ModelState advance_with(const ModelState& state, const Action& action, double logprob,
                          const nn::Dropout& drop) const;
  Var logprobs_var(const ModelState& state, const nn::Dropout& drop) const;

  ModelConfig config_;
  nn::ParamStore store_;
  nn::Param* tok_emb_ = nullptr;   // d x V (x V+1 for sequence models)
  nn::Param* nt_emb_ = nullptr;    // d x L
  nn::Param* start_ = nullptr;     // d x 1
  nn::Param* reduce_emb_ = nullptr;
  nn::Param* type_w_ = nullptr;    // factored: (2+L) x d ; unfactored: (1+L) x d
  nn::Param* type_b_ = nullptr;
  nn::Param* tok_out_w_ = nullptr; // untied output (V x d), null when tied
  nn::Param* tok_b_ = nullptr;

  void make_embeddings(std::mt19937_64& rng);
  void make_head(std::mt19937_64& rng);
};

// Builds and initializes parameters (uniform(-0.1, 0.1), norms at 1/0).
// Throws ConfigError for an invalid config.
std::unique_ptr<Model> build_model(const ModelConfig& config, std::uint64_t seed);

// Per-head masks for the query at position t = prefix.size(), over
// positions 0..t where 0 is the beginning-of-sequence slot. Head 0 sees the
// inside of the most recently opened still-open nonterminal, head 1 the
// outside plus the current position, other heads everything.
std::vector<nn::KeyMask> plm_mask_heads(const std::vector<Action>& prefix, int heads);

}  // namespace cag::models
