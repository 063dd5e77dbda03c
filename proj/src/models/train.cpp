#include "cag/models/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "cag/errors.hpp"
#include "cag/nn/optim.hpp"

namespace cag::models {

double mean_loss(const Model& model, const std::vector<Sequence>& data) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : data) {
    total -= model.sequence_logprob(s);
    n += s.size();
  }
  return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

TrainResult train(Model& model, const std::vector<Sequence>& train_set, const std::vector<Sequence>& dev_set,
                  const TrainConfig& config, const std::function<void(const EpochStats&)>& on_epoch) {
  if (train_set.empty()) throw DataError("train: empty training set");
  if (config.batch_size < 1 || config.epochs < 1) throw ConfigError("train: batch size and epochs must be positive");
  if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);

  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 drop_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  nn::Dropout drop{model.config().dropout, &drop_rng};
  nn::AdamConfig adam;
  adam.lr = config.lr;
  nn::ParamStore& store = model.params();

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  int steps = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_actions = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      std::size_t actions = 0;
      for (std::size_t i = b; i < e; ++i) actions += train_set[order[i]].size();
      store.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        nn::Var loss = nn::scale(model.sequence_loss(train_set[order[i]], drop), 1.0 / static_cast<double>(actions));
        batch_loss += loss->scalar();
        nn::backward(loss);
      }
      if (config.clip_norm > 0.0) store.clip_grad_norm(config.clip_norm);
      nn::adam_step(store, adam);
      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss * static_cast<double>(actions);
      epoch_actions += actions;
      if (config.max_steps > 0 && ++steps >= config.max_steps) break;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(epoch_actions);
    stats.dev_loss = dev_set.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_loss(model, dev_set);
    double score = dev_set.empty() ? stats.train_loss : stats.dev_loss;
    if (score < best) {
      best = score;
      stats.best = true;
      result.best_epoch = epoch;
    }
    if (!config.checkpoint_dir.empty()) {
      std::filesystem::path dir(config.checkpoint_dir);
      nn::save_checkpoint(store, config.config_digest, (dir / ("epoch_" + std::to_string(epoch) + ".ckpt")).string());
      if (stats.best) nn::save_checkpoint(store, config.config_digest, (dir / "best.ckpt").string());
    }
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (config.max_steps > 0 && steps >= config.max_steps) break;
  }
  return result;
}

Sequence with_eos(const std::vector<int>& tokens, int eos) {
  Sequence s;
  for (int t : tokens) s.push_back(Action::gen(t));
  s.push_back(Action::gen(eos));
  return s;
}

std::string model_card(const Model& model, std::uint64_t seed, const std::map<std::string, std::string>& digests) {
  std::ostringstream s;
  s << "# model card\n" << model.config().describe() << "seed=" << seed << '\n'
    << "parameters=" << model.parameter_count() << '\n';
  for (const auto& [k, v] : digests) s << "digest." << k << '=' << v << '\n';
  return s.str();
}

}  // namespace cag::models
