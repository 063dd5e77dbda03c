#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cag/models/model.hpp"

namespace cag::models {

using Sequence = std::vector<Action>;

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 256;
  int epochs = 15;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;        // 0 disables clipping
  std::string checkpoint_dir;    // empty: no checkpoints
  std::string config_digest;     // stamped into checkpoints
  int max_steps = 0;             // 0: no limit
};

struct EpochStats {
  int epoch = 0;        // 1-based
  double train_loss = 0.0;  // mean NLL per action over the epoch
  double dev_loss = 0.0;    // mean NLL per action, no dropout (NaN without dev data)
  bool best = false;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::vector<double> step_losses;  // per minibatch, mean NLL per action
  int best_epoch = 0;
};

// Adam on mean per-action NLL over shuffled minibatches; dropout from the
// model config. Deterministic given the seed. The best epoch has the lowest
// dev loss (train loss without dev data); with a checkpoint directory,
// writes epoch_<n>.ckpt each epoch and best.ckpt. Throws DataError for an
// empty training set.
TrainResult train(Model& model, const std::vector<Sequence>& train_set, const std::vector<Sequence>& dev_set,
                  const TrainConfig& config, const std::function<void(const EpochStats&)>& on_epoch = {});

// Mean NLL per action without dropout.
double mean_loss(const Model& model, const std::vector<Sequence>& data);

// Token sequences (plus EOS) for sequence models.
Sequence with_eos(const std::vector<int>& tokens, int eos);

// Text describing config, seed, parameter count and data digests.
std::string model_card(const Model& model, std::uint64_t seed, const std::map<std::string, std::string>& digests);

}  // namespace cag::models
