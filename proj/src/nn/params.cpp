#include "cag/nn/params.hpp"

#include <cmath>

#include "cag/errors.hpp"

namespace cag::nn {

Mat& Param::grad_buffer() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols())
    grad = Mat::Zero(value.rows(), value.cols());
  return grad;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Param& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
                       std::mt19937_64& rng, double scale) {
  if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  switch (init) {
    case Init::kZeros:
      p->value = Mat::Zero(rows, cols);
      break;
    case Init::kOnes:
      p->value = Mat::Ones(rows, cols);
      break;
    case Init::kUniform:
      p->value.resize(rows, cols);
      for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) p->value(i, j) = uniform(rng, -scale, scale);
      break;
  }
  Param& ref = *p;
  index_.emplace(name, p.get());
  params_.push_back(std::move(p));
  return ref;
}

Param& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

std::vector<Param*> ParamStore::params() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::params() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::int64_t ParamStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_)
    if (p->grad.size() != 0) p->grad.setZero();
}

double ParamStore::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (auto& p : params_)
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    double s = max_norm / norm;
    for (auto& p : params_)
      if (p->grad.size() != 0) p->grad *= s;
  }
  return norm;
}

Var param_var(Param& p) {
  Param* target = &p;
  Vec flat = Eigen::Map<const Vec>(p.value.data(), p.value.size());
  return make_node(std::move(flat), {}, [target](Node& self) {
    Mat& g = target->grad_buffer();
    Eigen::Map<Vec>(g.data(), g.size()) += self.grad;
  });
}

}  // namespace cag::nn
