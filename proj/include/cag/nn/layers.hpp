#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cag/nn/ops.hpp"
#include "cag/nn/params.hpp"

namespace cag::nn {

// Training-time randomness; a null rng means evaluation mode.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  Var operator()(const Var& x) const { return dropout(x, rate, rng); }
  bool active() const { return rng != nullptr && rate > 0.0; }
};

// ---------------------------------------------------------------- LSTM

struct LstmLayer {
  Param* w = nullptr;  // 4H x (I + H)
  Param* b = nullptr;  // 4H
};

struct LstmParams {
  std::vector<LstmLayer> layers;
  int hidden = 0;
};

LstmParams make_lstm(ParamStore& store, const std::string& prefix, int input, int hidden, int layers,
                     std::mt19937_64& rng);

struct LstmState {
  std::vector<Var> h;
  std::vector<Var> c;
};

LstmState lstm_zero_state(const LstmParams& p);

// Feeds x through every layer; returns the top hidden output and new state.
// Dropout is applied between layers.
std::pair<Var, LstmState> lstm_step(const LstmParams& p, const LstmState& state, const Var& x,
                                    const Dropout& drop = {});

// ---------------------------------------------------------------- composition

// Bidirectional LSTM over a closed constituent's vectors (label vector first,
// then the children left to right). The forward final state and the backward
// final state are concatenated and projected back to the model dimension.
struct ComposerParams {
  LstmLayer forward;
  LstmLayer backward;
  Param* proj_w = nullptr;
  Param* proj_b = nullptr;
  int dim = 0;
  int hidden = 0;  // per direction
};

ComposerParams make_composer(ParamStore& store, const std::string& prefix, int dim, int hidden,
                             std::mt19937_64& rng);

// Throws ContractError if the span is shorter than 2 or dimensions differ.
Var compose(const std::vector<Var>& span, const ComposerParams& p);

// ---------------------------------------------------------------- attention

struct BlockParams {
  Param *ln1_g, *ln1_b;
  Param *qkv_w, *qkv_b;
  Param *out_w, *out_b;
  Param *ln2_g, *ln2_b;
  Param *ff1_w, *ff1_b;
  Param *ff2_w, *ff2_b;
};

// Pre-normalized transformer layers (residual around attention and the
// feed-forward sublayer), learned absolute positions, and a final norm.
struct TransformerParams {
  std::vector<BlockParams> blocks;
  Param* positions = nullptr;  // dim x max_positions
  Param* final_g = nullptr;
  Param* final_b = nullptr;
  int dim = 0;
  int heads = 0;

  std::size_t max_positions() const { return static_cast<std::size_t>(positions->value.cols()); }
};

TransformerParams make_transformer(ParamStore& store, const std::string& prefix, int dim, int layers,
                                   int heads, int max_positions, std::mt19937_64& rng);

// Keys and values (one per layer) and the final output for one position.
struct PositionKV {
  std::vector<Var> keys;
  std::vector<Var> values;
  Var output;
};

// Computes position `position` (clamped to the position table) given the
// earlier positions, oldest first. `masks` restrict heads over the earlier
// positions plus the new one.
PositionKV transformer_position(const TransformerParams& p, std::size_t position, const Var& x,
                                const std::vector<const PositionKV*>& previous,
                                const std::vector<KeyMask>& masks = {}, const Dropout& drop = {});

// Positions [0, size()) of one causal sequence. Positions at or above the
// watermark are never read; the watermark is simply size() after truncate().
class AttentionCache {
 public:
  std::size_t size() const { return entries_.size(); }
  std::size_t watermark() const { return size(); }
  void truncate(std::size_t n) {
    if (n < entries_.size()) entries_.resize(n);
  }

  const PositionKV& entry(std::size_t position) const { return entries_[position]; }
  const Var& output(std::size_t position) const { return entries_[position].output; }
  void push(PositionKV kv) { entries_.push_back(std::move(kv)); }

 private:
  std::vector<PositionKV> entries_;
};

// Appends position cache.size() and returns its output.
Var transformer_step(const TransformerParams& p, AttentionCache& cache, const Var& x,
                     const std::vector<KeyMask>& masks = {}, const Dropout& drop = {});

// Self-attention over the stack e_1..e_k with a causal cache: positions below
// cache.size() are reused, the rest computed. Returns the top output h_t.
// Callers truncate the cache past any popped position before calling.
Var stack_attention(const std::vector<Var>& stack, AttentionCache& cache, const TransformerParams& p,
                    const Dropout& drop = {});

}  // namespace cag::nn
