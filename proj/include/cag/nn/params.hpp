#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cag/nn/autograd.hpp"

namespace cag::nn {

// A named trainable tensor (vectors are n x 1). Gradient and moment buffers
// are allocated on first use so that building a large model only to count
// its parameters stays cheap.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat first_moment;
  Mat second_moment;

  Eigen::Index size() const { return value.size(); }
  Mat& grad_buffer();
};

enum class Init { kUniform, kZeros, kOnes };

// Portable uniform draw in [lo, hi) from a 64-bit Mersenne Twister; used for
// all initialization so that seeds reproduce bit-for-bit across platforms.
double uniform(std::mt19937_64& rng, double lo, double hi);

class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  // Registers a parameter in creation order. Throws ContractError on a
  // duplicate name.
  Param& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
             std::mt19937_64& rng, double scale = 0.1);

  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  std::int64_t parameter_count() const;
  void zero_grad();
  // Scales all gradients so their joint L2 norm is at most max_norm; returns
  // the norm before clipping.
  double clip_grad_norm(double max_norm);

  std::int64_t step = 0;  // optimizer steps taken

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param*> index_;
};

// Wraps a whole parameter (flattened) as a graph input.
Var param_var(Param& p);

}  // namespace cag::nn
