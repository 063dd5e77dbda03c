#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cag/errors.hpp"
#include "cag/nn/layers.hpp"
#include "cag/nn/ops.hpp"
#include "cag/nn/optim.hpp"
#include "doctest.h"

using namespace cag;
using namespace cag::nn;

namespace {

Vec random_vec(std::mt19937_64& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, -1.0, 1.0);
  return v;
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("backward on a small expression") {
  Var x = constant(Vec::Constant(1, 3.0));
  ParamStore store;
  std::mt19937_64 rng(1);
  Param& p = store.add("p", 1, 1, Init::kOnes, rng);
  p.value(0, 0) = 2.0;
  Var px = param_var(p);
  Var y = mul(mul(px, px), x);  // 3 p^2
  backward(y);
  CHECK(p.grad(0, 0) == doctest::Approx(12.0));
}

TEST_CASE("NoGradGuard drops graph edges") {
  ParamStore store;
  std::mt19937_64 rng(1);
  Param& p = store.add("p", 3, 1, Init::kUniform, rng);
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    Var y = tanh(param_var(p));
    CHECK(y->inputs.empty());
  }
  CHECK(grad_enabled());
}

TEST_CASE("initialization is reproducible and in range") {
  ParamStore a, b;
  std::mt19937_64 r1(42), r2(42);
  Param& pa = a.add("w", 5, 7, Init::kUniform, r1);
  Param& pb = b.add("w", 5, 7, Init::kUniform, r2);
  CHECK(pa.value == pb.value);
  CHECK(pa.value.maxCoeff() < 0.1);
  CHECK(pa.value.minCoeff() >= -0.1);
  CHECK(a.parameter_count() == 35);
  CHECK_THROWS_AS(a.add("w", 1, 1, Init::kZeros, r1), ContractError);
}

TEST_CASE("log_softmax normalizes over the mask") {
  Var x = constant((Vec(4) << 1.0, 2.0, 3.0, 4.0).finished());
  Var l = log_softmax(x, {true, false, true, true});
  double z = std::log(std::exp(1.0) + std::exp(3.0) + std::exp(4.0));
  CHECK(l->value(0) == doctest::Approx(1.0 - z));
  CHECK(std::isinf(l->value(1)));
  CHECK(l->value(1) < 0);
  CHECK_THROWS_AS(log_softmax(x, {false, false, false, false}), ContractError);
  CHECK(log_sum_exp(l->value) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("attention weights obey head masks") {
  std::mt19937_64 rng(3);
  std::vector<Vec> keys;
  for (int i = 0; i < 4; ++i) keys.push_back(random_vec(rng, 8));
  Vec q = random_vec(rng, 8);
  auto w = attention_weights(q, keys, 2, {{true, false, false, true}, {}});
  REQUIRE(w.size() == 2);
  CHECK(w[0](1) == 0.0);
  CHECK(w[0](2) == 0.0);
  CHECK(w[0].sum() == doctest::Approx(1.0));
  CHECK(w[1].minCoeff() > 0.0);
  CHECK(w[1].sum() == doctest::Approx(1.0));
  // Manual head 1: scaled dot product over dims 4..7.
  Vec logits(4);
  for (int i = 0; i < 4; ++i) logits(i) = q.segment(4, 4).dot(keys[i].segment(4, 4)) / 2.0;
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  for (int i = 0; i < 4; ++i) CHECK(w[1](i) == doctest::Approx(e(i) / e.sum()));
}

TEST_CASE("gradient check: elementwise ops and layer norm") {
  ParamStore store;
  std::mt19937_64 rng(5);
  Param& a = store.add("a", 6, 1, Init::kUniform, rng, 1.0);
  Param& b = store.add("b", 6, 1, Init::kUniform, rng, 1.0);
  Param& w = store.add("w", 4, 12, Init::kUniform, rng, 1.0);
  Param& wb = store.add("wb", 4, 1, Init::kUniform, rng, 1.0);
  Param& g = store.add("g", 4, 1, Init::kUniform, rng, 1.0);
  Param& gb = store.add("gb", 4, 1, Init::kUniform, rng, 1.0);
  auto loss = [&] {
    Var x = concat({tanh(param_var(a)), mul(sigmoid(param_var(b)), gelu(param_var(a)))});
    Var h = layer_norm(affine(w, &wb, x), g, gb);
    Var r = add(relu(h), scale(slice(x, 2, 4), 0.5));
    return pick(log_softmax(r), 2);
  };
  auto res = grad_check(loss, store, 1e-6);
  INFO(res.worst);
  CHECK(res.max_relative_error < kTol);
}

TEST_CASE("gradient check: LSTM, composer, tied output") {
  ParamStore store;
  std::mt19937_64 rng(7);
  Param& emb = store.add("emb", 6, 5, Init::kUniform, rng, 1.0);
  Param& out_b = store.add("out_b", 5, 1, Init::kUniform, rng);
  LstmParams lstm = make_lstm(store, "lstm", 6, 6, 2, rng);
  ComposerParams comp = make_composer(store, "comp", 6, 4, rng);
  auto loss = [&] {
    LstmState s = lstm_zero_state(lstm);
    std::vector<Var> outs;
    for (int t : {0, 3, 1}) {
      auto [h, next] = lstm_step(lstm, s, lookup(emb, t));
      outs.push_back(h);
      s = std::move(next);
    }
    Var c = compose(outs, comp);
    Var logits = affine_transposed(emb, &out_b, c);
    return scale(pick(log_softmax(logits), 4), -1.0);
  };
  auto res = grad_check(loss, store, 1e-5, 300);
  INFO(res.worst);
  CHECK(res.max_relative_error < kTol);
}

TEST_CASE("gradient check: transformer with head masks") {
  ParamStore store;
  std::mt19937_64 rng(9);
  TransformerParams tp = make_transformer(store, "tf", 8, 2, 2, 6, rng);
  Param& emb = store.add("emb", 8, 4, Init::kUniform, rng, 1.0);
  auto loss = [&] {
    AttentionCache cache;
    Var last;
    std::vector<int> toks{1, 2, 0, 3};
    for (std::size_t i = 0; i < toks.size(); ++i) {
      KeyMask inside(i + 1, false);
      inside[i] = true;
      if (i > 0) inside[i - 1] = true;
      last = transformer_step(tp, cache, lookup(emb, toks[i]), {inside, {}});
    }
    return pick(log_softmax(last), 1);
  };
  auto res = grad_check(loss, store, 1e-5, 300);
  INFO(res.worst);
  CHECK(res.max_relative_error < kTol);
}

TEST_CASE("grad_check rejects a nonpositive epsilon") {
  ParamStore store;
  std::mt19937_64 rng(1);
  Param& p = store.add("p", 2, 1, Init::kUniform, rng);
  auto loss = [&] { return pick(param_var(p), 0); };
  CHECK_THROWS_AS(grad_check(loss, store, 0.0), ContractError);
  CHECK_THROWS_AS(grad_check(loss, store, -1e-4), ContractError);
}

TEST_CASE("grad_check notices a wrong backward") {
  ParamStore store;
  std::mt19937_64 rng(1);
  Param& p = store.add("p", 3, 1, Init::kUniform, rng, 1.0);
  auto loss = [&] {
    Var x = param_var(p);
    Var y = make_node(Vec::Constant(1, x->value.squaredNorm()), {x},
                      [](Node& n) { n.inputs[0]->accumulate(n.inputs[0]->value * n.grad(0)); });  // missing 2x
    return y;
  };
  CHECK(grad_check(loss, store, 1e-6).max_relative_error > 0.1);
}

TEST_CASE("cached stack attention matches recomputation after pops") {
  ParamStore store;
  std::mt19937_64 rng(11);
  TransformerParams tp = make_transformer(store, "tf", 8, 2, 2, 16, rng);
  NoGradGuard g;
  std::vector<Var> stack;
  AttentionCache cache;
  std::mt19937_64 walk(2);
  for (int step = 0; step < 40; ++step) {
    if (stack.size() > 2 && walk() % 3 == 0) {
      std::size_t pop = 1 + walk() % 2;
      stack.resize(stack.size() - pop);
      stack.push_back(constant(random_vec(walk, 8)));  // composed replacement
    } else {
      stack.push_back(constant(random_vec(walk, 8)));
    }
    cache.truncate(stack.size() - 1);
    Var cached = stack_attention(stack, cache, tp);
    AttentionCache fresh;
    Var full = stack_attention(stack, fresh, tp);
    CHECK((cached->value - full->value).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(cache.size() == stack.size());
  }
}

TEST_CASE("positions past the table reuse the last embedding") {
  ParamStore store;
  std::mt19937_64 rng(13);
  TransformerParams tp = make_transformer(store, "tf", 4, 1, 1, 2, rng);
  NoGradGuard g;
  AttentionCache cache;
  for (int i = 0; i < 5; ++i) transformer_step(tp, cache, constant(Vec::Zero(4)));
  CHECK(cache.size() == 5);
}

TEST_CASE("dropout is identity in evaluation and unbiased in training") {
  Var x = constant(Vec::Ones(20000));
  CHECK(dropout(x, 0.1, nullptr)->value == x->value);
  std::mt19937_64 rng(3);
  Var y = dropout(x, 0.1, &rng);
  CHECK(y->value.mean() == doctest::Approx(1.0).epsilon(0.02));
  long zeros = (y->value.array() == 0.0).count();
  CHECK(zeros > 1700);
  CHECK(zeros < 2300);
}

TEST_CASE("adam_step matches a hand-computed update") {
  ParamStore store;
  std::mt19937_64 rng(1);
  Param& p = store.add("p", 2, 1, Init::kZeros, rng);
  p.value << 1.0, -2.0;
  Mat g(2, 1);
  g << 0.5, -0.25;
  AdamConfig cfg;
  adam_step(store, {g}, cfg);
  // First step: m_hat = g, v_hat = g^2, so the update is lr * sign(g).
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
  CHECK(p.value(1, 0) == doctest::Approx(-2.0 + 1e-3).epsilon(1e-9));
  Mat g2(2, 1);
  g2 << 1.0, 0.0;
  adam_step(store, {g2}, cfg);
  double m = 0.9 * (0.1 * 0.5) + 0.1 * 1.0;  // m_2 for coordinate 0
  double v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
  double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 1e-3 - 1e-3 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-9));
  CHECK(store.step == 2);
  CHECK_THROWS_AS(adam_step(store, {}, cfg), ContractError);
  CHECK_THROWS_AS(adam_step(store, {Mat::Zero(3, 1)}, cfg), ContractError);
}

TEST_CASE("adam drives a quadratic to its minimum") {
  ParamStore store;
  std::mt19937_64 rng(1);
  Param& p = store.add("p", 3, 1, Init::kUniform, rng, 1.0);
  Vec target = (Vec(3) << 0.3, -0.7, 0.1).finished();
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    store.zero_grad();
    Var d = add(param_var(p), constant(-target));
    backward(make_node(Vec::Constant(1, d->value.squaredNorm()), {d},
                       [](Node& n) { n.inputs[0]->accumulate(2.0 * n.inputs[0]->value * n.grad(0)); }));
    adam_step(store, cfg);
  }
  CHECK((Vec(p.value.col(0)) - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("checkpoint round trip and validation") {
  auto dir = std::filesystem::temp_directory_path() / "cag_test_ckpt";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "m.ckpt").string();
  std::mt19937_64 r1(1), r2(2);
  ParamStore a, b;
  make_lstm(a, "lstm", 3, 4, 1, r1);
  a.add("out", 4, 1, Init::kUniform, r1);
  make_lstm(b, "lstm", 3, 4, 1, r2);
  b.add("out", 4, 1, Init::kUniform, r2);
  save_checkpoint(a, "digest-1", path);
  CHECK_THROWS_AS(load_checkpoint(b, "digest-2", path), DataError);
  load_checkpoint(b, "digest-1", path);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    Mat diff = a.params()[i]->value - b.params()[i]->value;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-7);
  }
  ParamStore c;
  make_lstm(c, "lstm", 3, 5, 1, r2);
  c.add("out", 4, 1, Init::kUniform, r2);
  CHECK_THROWS_AS(load_checkpoint(c, "digest-1", path), DataError);
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(b, "digest-1", (dir / "bad.ckpt").string()), DataError);
  std::filesystem::remove_all(dir);
}
