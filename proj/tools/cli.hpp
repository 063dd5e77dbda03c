#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cag/decoder/decoder.hpp"
#include "cag/models/model.hpp"
#include "cag/models/train.hpp"

namespace cag::cli {

// Flat "section.key" -> value settings, INI file first, flags on top.
using Settings = std::map<std::string, std::string>;

struct RunConfig {
  Settings settings;  // effective values, every known key present
  std::map<std::string, std::string> paths;
  models::ModelConfig model;
  models::TrainConfig train;
  decoder::BeamParams beam;
  std::vector<std::uint64_t> seeds;
  decoder::Unit unit = decoder::Unit::kBits;
  std::size_t merges = 0;
  int audit_terminals = 0;
  int audit_nonterminals = 0;
  bool audit_untied = true;
  std::uint64_t synth_seed = 1;
  int synth_train = 0, synth_dev = 0, synth_test = 0, synth_items = 0;

  std::string digest() const;  // over the canonical settings text
  const std::string& path(const std::string& key) const;  // ConfigError when unset
};

// Every recognised key with its default.
const Settings& default_settings();

// Merges defaults, the INI file (if non-empty) and overrides, then parses and
// validates. Unknown keys and bad values throw ConfigError.
RunConfig load_config(const std::string& ini_path, const Settings& overrides);

// One trained model: a directory holding model.ini and best.ckpt.
struct TrainedRun {
  std::string dir;
  models::ModelConfig config;
  std::uint64_t seed = 0;
  std::unique_ptr<models::Model> model;
};

// `root` is a run directory or a directory tree containing run directories
// (sorted by path). Throws DataError when none is found.
std::vector<TrainedRun> load_runs(const std::string& root);

// Subcommands. Each validates inputs before writing into paths.output and
// leaves a manifest.json there.
void cmd_synth(const RunConfig& c);
void cmd_vocab(const RunConfig& c);
void cmd_train(const RunConfig& c);
void cmd_ppl(const RunConfig& c);
void cmd_surprisal(const RunConfig& c);
void cmd_suite(const RunConfig& c);
void cmd_report(const RunConfig& c, const std::vector<std::string>& result_dirs);
void cmd_audit(const RunConfig& c);
void cmd_parse(const RunConfig& c);

// Recomputes the data digests recorded in dir/manifest.json; false on any
// mismatch or missing file.
bool verify_manifest(const std::string& dir);

// argv entry point with exit codes 0, 2 (config), 3 (data), 4 (decode).
int run(int argc, char** argv);

}  // namespace cag::cli
