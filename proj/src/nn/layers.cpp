#include "cag/nn/layers.hpp"

#include <algorithm>

#include "cag/errors.hpp"

namespace cag::nn {

LstmParams make_lstm(ParamStore& store, const std::string& prefix, int input, int hidden, int layers,
                     std::mt19937_64& rng) {
  LstmParams p;
  p.hidden = hidden;
  for (int l = 0; l < layers; ++l) {
    int in = l == 0 ? input : hidden;
    std::string name = prefix + ".l" + std::to_string(l);
    LstmLayer layer;
    layer.w = &store.add(name + ".w", 4 * hidden, in + hidden, Init::kUniform, rng);
    layer.b = &store.add(name + ".b", 4 * hidden, 1, Init::kUniform, rng);
    p.layers.push_back(layer);
  }
  return p;
}

LstmState lstm_zero_state(const LstmParams& p) {
  LstmState s;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    s.h.push_back(constant(Vec::Zero(p.hidden)));
    s.c.push_back(constant(Vec::Zero(p.hidden)));
  }
  return s;
}

std::pair<Var, LstmState> lstm_step(const LstmParams& p, const LstmState& state, const Var& x,
                                    const Dropout& drop) {
  LstmState next;
  Var input = x;
  const Eigen::Index H = p.hidden;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (l > 0) input = drop(input);
    Var hc = lstm_cell(input, state.h[l], state.c[l], *p.layers[l].w, *p.layers[l].b);
    next.h.push_back(slice(hc, 0, H));
    next.c.push_back(slice(hc, H, H));
    input = next.h.back();
  }
  return {input, std::move(next)};
}

ComposerParams make_composer(ParamStore& store, const std::string& prefix, int dim, int hidden,
                             std::mt19937_64& rng) {
  ComposerParams p;
  p.dim = dim;
  p.hidden = hidden;
  p.forward.w = &store.add(prefix + ".fwd.w", 4 * hidden, dim + hidden, Init::kUniform, rng);
  p.forward.b = &store.add(prefix + ".fwd.b", 4 * hidden, 1, Init::kUniform, rng);
  p.backward.w = &store.add(prefix + ".bwd.w", 4 * hidden, dim + hidden, Init::kUniform, rng);
  p.backward.b = &store.add(prefix + ".bwd.b", 4 * hidden, 1, Init::kUniform, rng);
  p.proj_w = &store.add(prefix + ".proj.w", dim, 2 * hidden, Init::kUniform, rng);
  p.proj_b = &store.add(prefix + ".proj.b", dim, 1, Init::kUniform, rng);
  return p;
}

Var compose(const std::vector<Var>& span, const ComposerParams& p) {
  if (span.size() < 2) throw ContractError("compose: span needs a label and at least one child");
  for (const auto& v : span)
    if (v->value.size() != p.dim) throw ContractError("compose: vector dimension mismatch");
  const Eigen::Index H = p.hidden;
  Var h = constant(Vec::Zero(H));
  Var c = constant(Vec::Zero(H));
  for (const auto& v : span) {
    Var hc = lstm_cell(v, h, c, *p.forward.w, *p.forward.b);
    h = slice(hc, 0, H);
    c = slice(hc, H, H);
  }
  Var fwd = h;
  h = constant(Vec::Zero(H));
  c = constant(Vec::Zero(H));
  for (auto it = span.rbegin(); it != span.rend(); ++it) {
    Var hc = lstm_cell(*it, h, c, *p.backward.w, *p.backward.b);
    h = slice(hc, 0, H);
    c = slice(hc, H, H);
  }
  return tanh(affine(*p.proj_w, p.proj_b, concat({fwd, h})));
}

TransformerParams make_transformer(ParamStore& store, const std::string& prefix, int dim, int layers,
                                   int heads, int max_positions, std::mt19937_64& rng) {
  if (heads <= 0 || dim % heads != 0) throw ContractError("transformer: heads must divide dim");
  TransformerParams p;
  p.dim = dim;
  p.heads = heads;
  p.positions = &store.add(prefix + ".pos", dim, max_positions, Init::kUniform, rng);
  for (int l = 0; l < layers; ++l) {
    std::string n = prefix + ".l" + std::to_string(l);
    BlockParams b{};
    b.ln1_g = &store.add(n + ".ln1.g", dim, 1, Init::kOnes, rng);
    b.ln1_b = &store.add(n + ".ln1.b", dim, 1, Init::kZeros, rng);
    b.qkv_w = &store.add(n + ".qkv.w", 3 * dim, dim, Init::kUniform, rng);
    b.qkv_b = &store.add(n + ".qkv.b", 3 * dim, 1, Init::kZeros, rng);
    b.out_w = &store.add(n + ".out.w", dim, dim, Init::kUniform, rng);
    b.out_b = &store.add(n + ".out.b", dim, 1, Init::kZeros, rng);
    b.ln2_g = &store.add(n + ".ln2.g", dim, 1, Init::kOnes, rng);
    b.ln2_b = &store.add(n + ".ln2.b", dim, 1, Init::kZeros, rng);
    b.ff1_w = &store.add(n + ".ff1.w", 4 * dim, dim, Init::kUniform, rng);
    b.ff1_b = &store.add(n + ".ff1.b", 4 * dim, 1, Init::kZeros, rng);
    b.ff2_w = &store.add(n + ".ff2.w", dim, 4 * dim, Init::kUniform, rng);
    b.ff2_b = &store.add(n + ".ff2.b", dim, 1, Init::kZeros, rng);
    p.blocks.push_back(b);
  }
  p.final_g = &store.add(prefix + ".lnf.g", dim, 1, Init::kOnes, rng);
  p.final_b = &store.add(prefix + ".lnf.b", dim, 1, Init::kZeros, rng);
  return p;
}

PositionKV transformer_position(const TransformerParams& p, std::size_t position, const Var& x,
                                const std::vector<const PositionKV*>& previous,
                                const std::vector<KeyMask>& masks, const Dropout& drop) {
  if (x->value.size() != p.dim) throw ContractError("transformer: input dimension mismatch");
  position = std::min(position, p.max_positions() - 1);
  const Eigen::Index d = p.dim;
  PositionKV out;
  Var h = drop(add(x, lookup(*p.positions, static_cast<int>(position))));
  std::vector<Var> keys, values;
  keys.reserve(previous.size() + 1);
  values.reserve(previous.size() + 1);
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const BlockParams& b = p.blocks[l];
    Var qkv = affine(*b.qkv_w, b.qkv_b, layer_norm(h, *b.ln1_g, *b.ln1_b));
    keys.clear();
    values.clear();
    for (const PositionKV* e : previous) {
      keys.push_back(e->keys[l]);
      values.push_back(e->values[l]);
    }
    out.keys.push_back(slice(qkv, d, d));
    out.values.push_back(slice(qkv, 2 * d, d));
    keys.push_back(out.keys.back());
    values.push_back(out.values.back());
    Var att = attention(slice(qkv, 0, d), keys, values, p.heads, masks);
    h = add(h, drop(affine(*b.out_w, b.out_b, att)));
    Var f = affine(*b.ff2_w, b.ff2_b, gelu(affine(*b.ff1_w, b.ff1_b, layer_norm(h, *b.ln2_g, *b.ln2_b))));
    h = add(h, drop(f));
  }
  out.output = layer_norm(h, *p.final_g, *p.final_b);
  return out;
}

Var transformer_step(const TransformerParams& p, AttentionCache& cache, const Var& x,
                     const std::vector<KeyMask>& masks, const Dropout& drop) {
  std::vector<const PositionKV*> previous;
  for (std::size_t i = 0; i < cache.size(); ++i) previous.push_back(&cache.entry(i));
  cache.push(transformer_position(p, cache.size(), x, previous, masks, drop));
  return cache.output(cache.size() - 1);
}

Var stack_attention(const std::vector<Var>& stack, AttentionCache& cache, const TransformerParams& p,
                    const Dropout& drop) {
  if (stack.empty()) throw ContractError("stack_attention: empty stack");
  cache.truncate(stack.size());
  for (std::size_t i = cache.size(); i < stack.size(); ++i) transformer_step(p, cache, stack[i], {}, drop);
  return cache.output(stack.size() - 1);
}

}  // namespace cag::nn
