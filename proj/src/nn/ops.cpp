#include "cag/nn/ops.hpp"

#include <cmath>
#include <limits>

#include "cag/errors.hpp"

namespace cag::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

}  // namespace

Var lookup(Param& table, int index) {
  require(index >= 0 && index < table.value.cols(), "lookup: index out of range");
  Param* t = &table;
  return make_node(table.value.col(index), {}, [t, index](Node& self) {
    t->grad_buffer().col(index) += self.grad;
  });
}

Var affine(Param& w, Param* b, const Var& x) {
  require(w.value.cols() == x->value.size(), "affine: dimension mismatch");
  require(!b || b->value.size() == w.value.rows(), "affine: bias dimension mismatch");
  Vec y = w.value * x->value;
  if (b) y += b->value.col(0);
  Param* wp = &w;
  return make_node(std::move(y), {x}, [wp, b](Node& self) {
    Node& in = *self.inputs[0];
    wp->grad_buffer().noalias() += self.grad * in.value.transpose();
    if (b) b->grad_buffer().col(0) += self.grad;
    in.accumulate(wp->value.transpose() * self.grad);
  });
}

Var affine_transposed(Param& w, Param* b, const Var& x) {
  require(w.value.rows() == x->value.size(), "affine_transposed: dimension mismatch");
  require(!b || b->value.size() == w.value.cols(), "affine_transposed: bias dimension mismatch");
  Vec y = w.value.transpose() * x->value;
  if (b) y += b->value.col(0);
  Param* wp = &w;
  return make_node(std::move(y), {x}, [wp, b](Node& self) {
    Node& in = *self.inputs[0];
    wp->grad_buffer().noalias() += in.value * self.grad.transpose();
    if (b) b->grad_buffer().col(0) += self.grad;
    in.accumulate(wp->value * self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  require(a->value.size() == b->value.size(), "add: dimension mismatch");
  return make_node(a->value + b->value, {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require(a->value.size() == b->value.size(), "mul: dimension mismatch");
  return make_node(a->value.cwiseProduct(b->value), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    x.accumulate(self.grad.cwiseProduct(y.value));
    y.accumulate(self.grad.cwiseProduct(x.value));
  });
}

Var scale(const Var& a, double s) {
  return make_node(a->value * s, {a}, [s](Node& self) { self.inputs[0]->accumulate(self.grad * s); });
}

Var sum(const std::vector<Var>& xs) {
  require(!xs.empty(), "sum: no inputs");
  Vec total = xs[0]->value;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require(xs[i]->value.size() == total.size(), "sum: dimension mismatch");
    total += xs[i]->value;
  }
  return make_node(std::move(total), xs, [](Node& self) {
    for (auto& in : self.inputs) in->accumulate(self.grad);
  });
}

Var tanh(const Var& x) {
  Vec y = x->value.array().tanh();
  return make_node(y, {x}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad.cwiseProduct((1.0 - self.value.array().square()).matrix()));
  });
}

Var sigmoid(const Var& x) {
  Vec y = (1.0 / (1.0 + (-x->value.array()).exp())).matrix();
  return make_node(y, {x}, [](Node& self) {
    auto s = self.value.array();
    self.inputs[0]->accumulate((self.grad.array() * s * (1.0 - s)).matrix());
  });
}

Var relu(const Var& x) {
  Vec y = x->value.cwiseMax(0.0);
  return make_node(y, {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate((self.grad.array() * (in.value.array() > 0.0).cast<double>()).matrix());
  });
}

Var gelu(const Var& x) {
  static constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  static constexpr double c = 0.044715;
  auto xv = x->value.array();
  Eigen::ArrayXd t = (k * (xv + c * xv.cube())).tanh();
  Vec y = (0.5 * xv * (1.0 + t)).matrix();
  return make_node(std::move(y), {x}, [t](Node& self) {
    Node& in = *self.inputs[0];
    auto xa = in.value.array();
    Eigen::ArrayXd dt = k * (1.0 + 3.0 * c * xa.square()) * (1.0 - t.square());
    Eigen::ArrayXd d = 0.5 * (1.0 + t) + 0.5 * xa * dt;
    in.accumulate((self.grad.array() * d).matrix());
  });
}

Var concat(const std::vector<Var>& xs) {
  Eigen::Index n = 0;
  for (const auto& x : xs) n += x->value.size();
  Vec y(n);
  Eigen::Index off = 0;
  for (const auto& x : xs) {
    y.segment(off, x->value.size()) = x->value;
    off += x->value.size();
  }
  return make_node(std::move(y), xs, [](Node& self) {
    Eigen::Index o = 0;
    for (auto& in : self.inputs) {
      Eigen::Index len = in->value.size();
      in->accumulate(self.grad.segment(o, len));
      o += len;
    }
  });
}

Var slice(const Var& x, Eigen::Index offset, Eigen::Index length) {
  require(offset >= 0 && length >= 0 && offset + length <= x->value.size(), "slice: out of range");
  return make_node(x->value.segment(offset, length), {x}, [offset, length](Node& self) {
    Node& in = *self.inputs[0];
    Vec g = Vec::Zero(in.value.size());
    g.segment(offset, length) = self.grad;
    in.accumulate(g);
  });
}

Var layer_norm(const Var& x, Param& gain, Param& bias, double eps) {
  const Eigen::Index n = x->value.size();
  require(gain.value.size() == n && bias.value.size() == n, "layer_norm: dimension mismatch");
  double mean = x->value.mean();
  Vec centered = x->value.array() - mean;
  double var = centered.squaredNorm() / static_cast<double>(n);
  double inv_std = 1.0 / std::sqrt(var + eps);
  Vec xhat = centered * inv_std;
  Vec y = xhat.cwiseProduct(gain.value.col(0)) + bias.value.col(0);
  Param* g = &gain;
  Param* b = &bias;
  return make_node(std::move(y), {x}, [g, b, xhat, inv_std, n](Node& self) {
    g->grad_buffer().col(0) += self.grad.cwiseProduct(xhat);
    b->grad_buffer().col(0) += self.grad;
    Vec gx = self.grad.cwiseProduct(g->value.col(0));
    double mean_gx = gx.mean();
    double mean_gx_xhat = gx.dot(xhat) / static_cast<double>(n);
    Vec dx = inv_std * (gx.array() - mean_gx - xhat.array() * mean_gx_xhat).matrix();
    self.inputs[0]->accumulate(dx);
  });
}

Var lstm_cell(const Var& x, const Var& h, const Var& c, Param& w, Param& b) {
  const Eigen::Index H = h->value.size();
  const Eigen::Index I = x->value.size();
  require(c->value.size() == H, "lstm_cell: cell/hidden size mismatch");
  require(w.value.rows() == 4 * H && w.value.cols() == I + H, "lstm_cell: weight shape mismatch");
  require(b.value.size() == 4 * H, "lstm_cell: bias shape mismatch");
  Vec xh(I + H);
  xh << x->value, h->value;
  Vec z = w.value * xh + b.value.col(0);
  auto sig = [](const Eigen::VectorBlock<Vec>& v) -> Vec {
    return (1.0 / (1.0 + (-v.array()).exp())).matrix();
  };
  Vec gi = sig(z.segment(0, H));
  Vec gf = sig(z.segment(H, H));
  Vec gg = z.segment(2 * H, H).array().tanh();
  Vec go = sig(z.segment(3 * H, H));
  Vec c_new = gf.cwiseProduct(c->value) + gi.cwiseProduct(gg);
  Vec tc = c_new.array().tanh();
  Vec out(2 * H);
  out << go.cwiseProduct(tc), c_new;
  Param* wp = &w;
  Param* bp = &b;
  return make_node(std::move(out), {x, h, c},
                   [wp, bp, xh, gi, gf, gg, go, tc, H, I](Node& self) {
                     Vec dh = self.grad.segment(0, H);
                     Vec dc = self.grad.segment(H, H) +
                              (dh.array() * go.array() * (1.0 - tc.array().square())).matrix();
                     Node& cin = *self.inputs[2];
                     Vec dz(4 * H);
                     dz.segment(0, H) = (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
                     dz.segment(H, H) = (dc.array() * cin.value.array() * gf.array() * (1.0 - gf.array())).matrix();
                     dz.segment(2 * H, H) = (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();
                     dz.segment(3 * H, H) = (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
                     wp->grad_buffer().noalias() += dz * xh.transpose();
                     bp->grad_buffer().col(0) += dz;
                     Vec dxh = wp->value.transpose() * dz;
                     self.inputs[0]->accumulate(dxh.segment(0, I));
                     self.inputs[1]->accumulate(dxh.segment(I, H));
                     cin.accumulate(dc.cwiseProduct(gf));
                   });
}

namespace {

bool admits(const std::vector<KeyMask>& masks, int head, std::size_t j) {
  if (masks.empty()) return true;
  const KeyMask& m = masks[static_cast<std::size_t>(head)];
  return m.empty() || (j < m.size() && m[j]);
}

// Softmax weights for one head; entries outside the mask are zero.
Vec head_weights(const Vec& q, const std::vector<const Vec*>& keys, int head, Eigen::Index hd,
                 const std::vector<KeyMask>& masks) {
  const std::size_t n = keys.size();
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  Vec s = Vec::Constant(static_cast<Eigen::Index>(n), -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (!admits(masks, head, j)) continue;
    s(static_cast<Eigen::Index>(j)) = q.segment(head * hd, hd).dot(keys[j]->segment(head * hd, hd)) * inv;
    mx = std::max(mx, s(static_cast<Eigen::Index>(j)));
  }
  if (!std::isfinite(mx)) throw ContractError("attention: a head admits no key");
  Vec w = Vec::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    if (admits(masks, head, j)) w(static_cast<Eigen::Index>(j)) = std::exp(s(static_cast<Eigen::Index>(j)) - mx);
  return w / w.sum();
}

}  // namespace

std::vector<Vec> attention_weights(const Vec& query, const std::vector<Vec>& keys, int heads,
                                   const std::vector<KeyMask>& head_masks) {
  require(heads > 0 && query.size() % heads == 0, "attention: heads must divide the dimension");
  require(head_masks.empty() || head_masks.size() == static_cast<std::size_t>(heads),
          "attention: one mask per head");
  std::vector<const Vec*> kp;
  for (const auto& k : keys) kp.push_back(&k);
  std::vector<Vec> out;
  for (int h = 0; h < heads; ++h) out.push_back(head_weights(query, kp, h, query.size() / heads, head_masks));
  return out;
}

Var attention(const Var& query, const std::vector<Var>& keys, const std::vector<Var>& values,
              int heads, const std::vector<KeyMask>& head_masks) {
  const Eigen::Index d = query->value.size();
  require(!keys.empty() && keys.size() == values.size(), "attention: need matching keys and values");
  require(heads > 0 && d % heads == 0, "attention: heads must divide the dimension");
  require(head_masks.empty() || head_masks.size() == static_cast<std::size_t>(heads),
          "attention: one mask per head");
  const Eigen::Index hd = d / heads;
  std::vector<const Vec*> kp;
  for (std::size_t j = 0; j < keys.size(); ++j) {
    require(keys[j]->value.size() == d && values[j]->value.size() == d, "attention: dimension mismatch");
    kp.push_back(&keys[j]->value);
  }
  std::vector<Vec> weights;
  Vec out = Vec::Zero(d);
  for (int h = 0; h < heads; ++h) {
    weights.push_back(head_weights(query->value, kp, h, hd, head_masks));
    for (std::size_t j = 0; j < values.size(); ++j) {
      double a = weights.back()(static_cast<Eigen::Index>(j));
      if (a != 0.0) out.segment(h * hd, hd) += a * values[j]->value.segment(h * hd, hd);
    }
  }
  std::vector<Var> inputs;
  inputs.reserve(1 + 2 * keys.size());
  inputs.push_back(query);
  inputs.insert(inputs.end(), keys.begin(), keys.end());
  inputs.insert(inputs.end(), values.begin(), values.end());
  const std::size_t n = keys.size();
  return make_node(std::move(out), std::move(inputs), [weights, heads, hd, n, d](Node& self) {
    Node& q = *self.inputs[0];
    const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
    Vec dq = Vec::Zero(d);
    std::vector<Vec> dk(n, Vec::Zero(d));
    std::vector<Vec> dv(n, Vec::Zero(d));
    for (int h = 0; h < heads; ++h) {
      const Vec& a = weights[static_cast<std::size_t>(h)];
      auto go = self.grad.segment(h * hd, hd);
      Vec da(static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) {
        const Node& v = *self.inputs[1 + n + j];
        double aj = a(static_cast<Eigen::Index>(j));
        dv[j].segment(h * hd, hd) += aj * go;
        da(static_cast<Eigen::Index>(j)) = go.dot(v.value.segment(h * hd, hd));
      }
      double mean = a.dot(da);
      for (std::size_t j = 0; j < n; ++j) {
        double aj = a(static_cast<Eigen::Index>(j));
        if (aj == 0.0) continue;
        double ds = aj * (da(static_cast<Eigen::Index>(j)) - mean) * inv;
        const Node& k = *self.inputs[1 + j];
        dq.segment(h * hd, hd) += ds * k.value.segment(h * hd, hd);
        dk[j].segment(h * hd, hd) += ds * q.value.segment(h * hd, hd);
      }
    }
    q.accumulate(dq);
    for (std::size_t j = 0; j < n; ++j) {
      self.inputs[1 + j]->accumulate(dk[j]);
      self.inputs[1 + n + j]->accumulate(dv[j]);
    }
  });
}

Var dropout(const Var& x, double p, std::mt19937_64* rng) {
  if (!rng || p <= 0.0) return x;
  require(p < 1.0, "dropout: rate must be below 1");
  const double keep = 1.0 - p;
  Vec mask(x->value.size());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = uniform(*rng, 0.0, 1.0) < keep ? 1.0 / keep : 0.0;
  return make_node(x->value.cwiseProduct(mask), {x}, [mask](Node& self) {
    self.inputs[0]->accumulate(self.grad.cwiseProduct(mask));
  });
}

double log_sum_exp(const Vec& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) > mx) mx = v(i);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v(i))) s += std::exp(v(i) - mx);
  return mx + std::log(s);
}

Var log_softmax(const Var& x, const std::vector<bool>& mask) {
  const Eigen::Index n = x->value.size();
  require(mask.empty() || mask.size() == static_cast<std::size_t>(n), "log_softmax: mask size mismatch");
  const double ninf = -std::numeric_limits<double>::infinity();
  Vec masked = x->value;
  if (!mask.empty())
    for (Eigen::Index i = 0; i < n; ++i)
      if (!mask[static_cast<std::size_t>(i)]) masked(i) = ninf;
  double lse = log_sum_exp(masked);
  require(std::isfinite(lse), "log_softmax: no admissible entry");
  Vec y = masked.array() - lse;
  return make_node(std::move(y), {x}, [](Node& self) {
    Vec p(self.value.size());
    double gsum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      bool ok = std::isfinite(self.value(i));
      p(i) = ok ? std::exp(self.value(i)) : 0.0;
      if (ok) gsum += self.grad(i);
    }
    Vec dx(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i)
      dx(i) = std::isfinite(self.value(i)) ? self.grad(i) - p(i) * gsum : 0.0;
    self.inputs[0]->accumulate(dx);
  });
}

Var pick(const Var& x, Eigen::Index index) {
  require(index >= 0 && index < x->value.size(), "pick: index out of range");
  Vec y(1);
  y(0) = x->value(index);
  return make_node(std::move(y), {x}, [index](Node& self) {
    Node& in = *self.inputs[0];
    Vec g = Vec::Zero(in.value.size());
    g(index) = self.grad(0);
    in.accumulate(g);
  });
}

}  // namespace cag::nn
