#include "cag/nn/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "cag/errors.hpp"

namespace cag::nn {

void adam_step(ParamStore& store, const std::vector<Mat>& grads, const AdamConfig& cfg) {
  auto params = store.params();
  if (grads.size() != params.size()) throw ContractError("adam_step: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].rows() != params[i]->value.rows() || grads[i].cols() != params[i]->value.cols())
      throw ContractError("adam_step: gradient shape mismatch for " + params[i]->name);
  ++store.step;
  const double t = static_cast<double>(store.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.first_moment.size() != p.value.size()) {
      p.first_moment = Mat::Zero(p.value.rows(), p.value.cols());
      p.second_moment = Mat::Zero(p.value.rows(), p.value.cols());
    }
    p.first_moment = cfg.beta1 * p.first_moment + (1.0 - cfg.beta1) * grads[i];
    p.second_moment = cfg.beta2 * p.second_moment + (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
    p.value.array() -= cfg.lr * (p.first_moment.array() / c1) /
                       ((p.second_moment.array() / c2).sqrt() + cfg.eps);
  }
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  std::vector<Mat> grads;
  for (Param* p : store.params()) grads.push_back(p->grad_buffer());
  adam_step(store, grads, cfg);
}

GradCheckResult grad_check(const std::function<Var()>& loss_fn, ParamStore& store, double epsilon,
                           std::size_t samples, std::uint64_t seed, double floor) {
  if (!(epsilon > 0.0)) throw ContractError("grad_check: epsilon must be positive");
  store.zero_grad();
  backward(loss_fn());

  struct Coord {
    Param* p;
    Eigen::Index i;
  };
  std::vector<Coord> all, nonzero;
  for (Param* p : store.params()) {
    Mat& g = p->grad_buffer();
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      all.push_back({p, i});
      if (g.data()[i] != 0.0) nonzero.push_back({p, i});
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<Coord> picked;
  auto draw = [&](std::vector<Coord>& pool, std::size_t n) {
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < std::min(n, pool.size()); ++k) picked.push_back(pool[k]);
  };
  if (all.size() <= samples) {
    picked = all;
  } else {
    draw(nonzero, samples / 2);
    draw(all, samples - picked.size());
  }

  GradCheckResult r;
  NoGradGuard guard;
  for (const Coord& c : picked) {
    double& x = c.p->value.data()[c.i];
    const double saved = x;
    x = saved + epsilon;
    double up = loss_fn()->scalar();
    x = saved - epsilon;
    double down = loss_fn()->scalar();
    x = saved;
    double numeric = (up - down) / (2.0 * epsilon);
    double analytic = c.p->grad.data()[c.i];
    double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    double rel = std::abs(analytic - numeric) / denom;
    ++r.coordinates;
    if (rel >= r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst = c.p->name + "[" + std::to_string(c.i) + "]";
    }
  }
  store.zero_grad();
  return r;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& in) {
  std::uint64_t n = get_uint(in, 4);
  if (n > (1u << 20)) throw DataError("checkpoint: implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: truncated file");
  return s;
}

constexpr char kMagic[8] = {'C', 'A', 'G', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& config_digest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(config_digest.size()));
  out.write(config_digest.data(), static_cast<std::streamsize>(config_digest.size()));
  auto params = store.params();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, 2);
    put_u64(out, static_cast<std::uint64_t>(p->value.rows()));
    put_u64(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c)
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p->value(r, c))));
  }
  if (!out) throw DataError("error writing checkpoint " + path);
}

void load_checkpoint(ParamStore& store, const std::string& config_digest, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw DataError("checkpoint: bad magic in " + path);
  std::string digest = get_string(in);
  if (digest != config_digest)
    throw DataError("checkpoint: config digest " + digest + " does not match " + config_digest);
  std::uint64_t count = get_uint(in, 4);
  auto params = store.params();
  if (count != params.size()) throw DataError("checkpoint: tensor count mismatch");
  std::set<std::string> seen;
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name = get_string(in);
    if (!store.contains(name) || !seen.insert(name).second) throw DataError("checkpoint: unexpected tensor " + name);
    Param& p = store.get(name);
    if (get_uint(in, 4) != 2) throw DataError("checkpoint: tensor " + name + " is not 2-d");
    std::uint64_t rows = get_uint(in, 8), cols = get_uint(in, 8);
    if (rows != static_cast<std::uint64_t>(p.value.rows()) || cols != static_cast<std::uint64_t>(p.value.cols()))
      throw DataError("checkpoint: shape mismatch for " + name);
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c)
        p.value(r, c) = std::bit_cast<float>(static_cast<std::uint32_t>(get_uint(in, 4)));
  }
}

}  // namespace cag::nn
