#pragma once

#include <random>
#include <vector>

#include "cag/nn/autograd.hpp"
#include "cag/nn/params.hpp"

// Differentiable primitives. Each records its own backward closure; fused
// kernels (LSTM cell, attention, layer norm) keep graphs small.
namespace cag::nn {

// Column `index` of an embedding matrix stored as (dim x rows).
Var lookup(Param& table, int index);

// W x (+ b).
Var affine(Param& w, Param* b, const Var& x);
// W^T x (+ b), for output layers tied to an input embedding table.
Var affine_transposed(Param& w, Param* b, const Var& x);

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var sum(const std::vector<Var>& xs);  // elementwise sum of equal-size vectors

Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var gelu(const Var& x);

Var concat(const std::vector<Var>& xs);
Var slice(const Var& x, Eigen::Index offset, Eigen::Index length);

Var layer_norm(const Var& x, Param& gain, Param& bias, double eps = 1e-5);

// One LSTM step. W is (4H x (I+H)) with gate order input, forget, cell,
// output; b is (4H). Returns [h; c] of size 2H.
Var lstm_cell(const Var& x, const Var& h, const Var& c, Param& w, Param& b);

// Which key positions a head may read, or empty for "all given keys".
using KeyMask = std::vector<bool>;

// Multi-head scaled dot-product attention of one query over `keys` and
// `values`. `head_masks` is empty or has one (possibly empty) mask per head.
// Every head must admit at least one key.
Var attention(const Var& query, const std::vector<Var>& keys, const std::vector<Var>& values,
              int heads, const std::vector<KeyMask>& head_masks = {});
// The softmax weights per head for the same inputs (no graph).
std::vector<Vec> attention_weights(const Vec& query, const std::vector<Vec>& keys, int heads,
                                   const std::vector<KeyMask>& head_masks = {});

// Inverted dropout; identity when rng is null or p == 0.
Var dropout(const Var& x, double p, std::mt19937_64* rng);

// Log-softmax over entries where mask is true (others -inf). Empty mask
// means all entries. Throws ContractError if nothing is allowed.
Var log_softmax(const Var& x, const std::vector<bool>& mask = {});
Var pick(const Var& x, Eigen::Index index);

// Stable log(sum(exp(v))) over finite entries; -inf when none.
double log_sum_exp(const Vec& v);

}  // namespace cag::nn
