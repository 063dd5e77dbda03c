#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "CLI11.hpp"
#include "cag/errors.hpp"
#include "cag/eval/parsing.hpp"
#include "cag/eval/report.hpp"
#include "cag/eval/scoring.hpp"
#include "cag/eval/synthetic.hpp"
#include "cag/models/audit.hpp"
#include "cag/nn/optim.hpp"
#include "cag/treebank/bpe.hpp"
#include "cag/treebank/tree.hpp"
#include "cag/util/digest.hpp"
#include "json.hpp"

#ifndef CAG_VERSION
#define CAG_VERSION "0.0.0"
#endif
#ifndef CAG_REVISION
#define CAG_REVISION "unknown"
#endif

namespace cag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- settings

const Settings& default_settings() {
  static const Settings s{
      {"paths.train", ""},
      {"paths.dev", ""},
      {"paths.test", ""},
      {"paths.vocab", ""},
      {"paths.checkpoints", ""},
      {"paths.suites", ""},
      {"paths.sentences", ""},
      {"paths.output", "out"},
      {"model.architecture", "CAG"},
      {"model.layers", "3"},
      {"model.hidden", "256"},
      {"model.heads", "4"},
      {"model.dropout", "0.1"},
      {"model.composer_hidden", "0"},
      {"model.max_positions", "256"},
      {"model.factored_head", "true"},
      {"model.tie_embeddings", "true"},
      {"model.max_open_nts", "100"},
      {"model.max_consecutive_nts", "8"},
      {"train.lr", "0.001"},
      {"train.batch", "256"},
      {"train.epochs", "15"},
      {"train.clip", "0"},
      {"train.max_steps", "0"},
      {"beam.action", "100"},
      {"beam.word", "10"},
      {"beam.fast_track", "5"},
      {"run.seeds", "1"},
      {"run.unit", "bits"},
      {"run.merges", "1000"},
      {"audit.terminals", std::to_string(models::kAuditTerminals)},
      {"audit.nonterminals", std::to_string(models::kAuditNonterminals)},
      {"audit.untied", "true"},
      {"synth.seed", "1"},
      {"synth.train", "2000"},
      {"synth.dev", "200"},
      {"synth.test", "200"},
      {"synth.items", "200"},
  };
  return s;
}

namespace {

long long to_int(const Settings& s, const std::string& key, long long lo = 0) {
  const std::string& v = s.at(key);
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  if (x < lo) throw ConfigError(key + ": must be at least " + std::to_string(lo));
  return x;
}

double to_double(const Settings& s, const std::string& key) {
  const std::string& v = s.at(key);
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const Settings& s, const std::string& key) {
  std::string v = s.at(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + s.at(key) + "'");
}

models::ModelConfig model_from(const Settings& s) {
  models::ModelConfig m;
  m.architecture = models::parse_architecture(s.at("model.architecture"));
  m.layers = static_cast<int>(to_int(s, "model.layers", 1));
  m.hidden_dim = m.input_dim = static_cast<int>(to_int(s, "model.hidden", 1));
  m.heads = static_cast<int>(to_int(s, "model.heads", 1));
  m.dropout = to_double(s, "model.dropout");
  m.composer_hidden = static_cast<int>(to_int(s, "model.composer_hidden", 0));
  m.max_positions = static_cast<int>(to_int(s, "model.max_positions", 1));
  m.factored_head = to_bool(s, "model.factored_head");
  m.tie_embeddings = to_bool(s, "model.tie_embeddings");
  m.legality.max_open_nts = static_cast<int>(to_int(s, "model.max_open_nts", 1));
  m.legality.max_consecutive_nts = static_cast<int>(to_int(s, "model.max_consecutive_nts", 1));
  if (s.count("model.terminals")) m.terminals = static_cast<int>(to_int(s, "model.terminals", 1));
  if (s.count("model.nonterminals")) m.nonterminals = static_cast<int>(to_int(s, "model.nonterminals", 0));
  return m;
}

Settings read_ini(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  Settings out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) out[section + "." + key] = value.get_value<std::string>();
  }
  return out;
}

std::string canonical(const Settings& s) {
  std::string out;
  for (const auto& [k, v] : s) out += k + "=" + v + "\n";
  return out;
}

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void require_file(const RunConfig& c, const std::string& key) {
  const std::string& p = c.path(key);
  if (!fs::exists(p)) throw ConfigError("paths." + key + ": '" + p + "' does not exist");
}

// Collects outputs and input digests, then writes manifest.json.
class Output {
 public:
  Output(const RunConfig& c, std::string command) : c_(c), command_(std::move(command)), started_(now_iso()) {
    dir_ = c.path("output");
  }

  void input(const std::string& path) {
    if (fs::is_directory(path)) {
      std::vector<std::string> files;
      for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path().string());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) data_[f] = util::file_sha256(f);
    } else {
      data_[path] = util::file_sha256(path);
    }
  }

  void open() { fs::create_directories(dir_); }
  std::string file(const std::string& name) {
    fs::path p = fs::path(dir_) / name;
    fs::create_directories(p.parent_path());
    outputs_.push_back(name);
    return p.string();
  }
  // CSV with the digest comment line already written.
  std::ofstream csv(const std::string& name) {
    std::ofstream out(file(name));
    if (!out) throw DataError("cannot write '" + name + "' in '" + dir_ + "'");
    out << "# config_digest=" << c_.digest() << '\n';
    return out;
  }
  void text(const std::string& name, const std::string& body) {
    std::ofstream out(file(name));
    if (!out) throw DataError("cannot write '" + name + "' in '" + dir_ + "'");
    out << body;
  }

  void finish() {
    json m;
    m["tool"] = "cag";
    m["version"] = CAG_VERSION;
    m["revision"] = CAG_REVISION;
    m["command"] = command_;
    m["config_digest"] = c_.digest();
    m["settings"] = c_.settings;
    m["data"] = data_;
    m["seeds"] = c_.seeds;
    m["started"] = started_;
    m["finished"] = now_iso();
    m["outputs"] = outputs_;
    std::ofstream out(fs::path(dir_) / "manifest.json");
    out << m.dump(2) << '\n';
  }

  const std::string& dir() const { return dir_; }

 private:
  const RunConfig& c_;
  std::string command_;
  std::string started_;
  std::string dir_;
  std::map<std::string, std::string> data_;
  std::vector<std::string> outputs_;
};

std::vector<treebank::Tree> read_trees(const std::string& path) {
  auto trees = treebank::read_treebank(path);
  if (trees.empty()) throw DataError("treebank '" + path + "' is empty");
  return trees;
}

std::vector<models::Sequence> sequences(const models::Model& m, const std::vector<treebank::Tree>& trees,
                                        const treebank::SubwordVocab& vocab) {
  std::vector<models::Sequence> out;
  for (const auto& t : trees) {
    auto tok = treebank::tokenize_tree(t, vocab);
    if (m.syntactic()) {
      out.push_back(treebank::encode_actions(tok, vocab));
    } else {
      std::vector<int> ids;
      for (const auto* leaf : tok.leaf_nodes()) ids.push_back(leaf->id);
      out.push_back(models::with_eos(ids, m.eos_id()));
    }
  }
  return out;
}

std::string run_name(const TrainedRun& r) {
  return lower(models::architecture_name(r.config.architecture)) + "/seed" + std::to_string(r.seed);
}

std::string checkpoint_digest(const models::ModelConfig& m) { return util::sha256_hex(m.describe()); }

std::vector<std::string> suite_files(const std::string& path) {
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".json") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  if (files.empty()) throw DataError("no suite files under '" + path + "'");
  return files;
}

// Comment lines skipped; header row -> column index.
std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string RunConfig::digest() const { return util::sha256_hex(canonical(settings)); }

const std::string& RunConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end() || it->second.empty()) throw ConfigError("paths." + key + " is required for this command");
  return it->second;
}

RunConfig load_config(const std::string& ini_path, const Settings& overrides) {
  RunConfig c;
  c.settings = default_settings();
  auto apply = [&](const Settings& src, const std::string& origin) {
    for (const auto& [k, v] : src) {
      if (!c.settings.count(k)) throw ConfigError(origin + ": unknown key '" + k + "'");
      c.settings[k] = v;
    }
  };
  if (!ini_path.empty()) {
    if (!fs::exists(ini_path)) throw ConfigError("config file '" + ini_path + "' does not exist");
    apply(read_ini(ini_path), ini_path);
  }
  apply(overrides, "flags");
  const Settings& s = c.settings;
  for (const auto& [k, v] : s)
    if (k.rfind("paths.", 0) == 0) c.paths[k.substr(6)] = v;
  c.model = model_from(s);
  c.train.lr = to_double(s, "train.lr");
  if (!(c.train.lr > 0)) throw ConfigError("train.lr: must be positive");
  c.train.batch_size = static_cast<int>(to_int(s, "train.batch", 1));
  c.train.epochs = static_cast<int>(to_int(s, "train.epochs", 1));
  c.train.clip_norm = to_double(s, "train.clip");
  c.train.max_steps = static_cast<int>(to_int(s, "train.max_steps", 0));
  c.beam.action_beam = static_cast<int>(to_int(s, "beam.action", 1));
  c.beam.word_beam = static_cast<int>(to_int(s, "beam.word", 1));
  c.beam.fast_track = static_cast<int>(to_int(s, "beam.fast_track", 0));
  c.beam.validate();
  std::stringstream seeds(s.at("run.seeds"));
  for (std::string tok; std::getline(seeds, tok, ',');) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok.empty()) continue;
    Settings one{{"run.seeds", tok}};
    c.seeds.push_back(static_cast<std::uint64_t>(to_int(one, "run.seeds", 0)));
  }
  if (c.seeds.empty()) throw ConfigError("run.seeds: at least one seed is required");
  c.unit = decoder::parse_unit(s.at("run.unit"));
  c.merges = static_cast<std::size_t>(to_int(s, "run.merges", 0));
  c.audit_terminals = static_cast<int>(to_int(s, "audit.terminals", 1));
  c.audit_nonterminals = static_cast<int>(to_int(s, "audit.nonterminals", 1));
  c.audit_untied = to_bool(s, "audit.untied");
  c.synth_seed = static_cast<std::uint64_t>(to_int(s, "synth.seed", 0));
  c.synth_train = static_cast<int>(to_int(s, "synth.train", 1));
  c.synth_dev = static_cast<int>(to_int(s, "synth.dev", 1));
  c.synth_test = static_cast<int>(to_int(s, "synth.test", 1));
  c.synth_items = static_cast<int>(to_int(s, "synth.items", 1));
  return c;
}

std::vector<TrainedRun> load_runs(const std::string& root) {
  std::vector<std::string> dirs;
  if (fs::exists(fs::path(root) / "model.ini")) {
    dirs.push_back(root);
  } else if (fs::is_directory(root)) {
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.path().filename() == "model.ini") dirs.push_back(e.path().parent_path().string());
    std::sort(dirs.begin(), dirs.end());
  }
  if (dirs.empty()) throw DataError("no trained model (model.ini) under '" + root + "'");
  std::vector<TrainedRun> runs;
  for (const auto& d : dirs) {
    Settings s = default_settings();
    Settings saved = read_ini((fs::path(d) / "model.ini").string());
    for (const auto& [k, v] : saved) s[k] = v;
    TrainedRun r;
    r.dir = d;
    r.config = model_from(s);
    r.seed = static_cast<std::uint64_t>(to_int(s, "run.seed", 0));
    r.model = models::build_model(r.config, r.seed);
    nn::load_checkpoint(r.model->params(), checkpoint_digest(r.config), (fs::path(d) / "best.ckpt").string());
    runs.push_back(std::move(r));
  }
  return runs;
}

// ---------------------------------------------------------------- commands

void cmd_synth(const RunConfig& c) {
  eval::SyntheticConfig sc;
  sc.seed = c.synth_seed;
  sc.train = c.synth_train;
  sc.dev = c.synth_dev;
  sc.test = c.synth_test;
  sc.suite_items = c.synth_items;
  Output out(c, "synth");
  eval::SyntheticData d = eval::generate_agreement_data(sc);
  out.open();
  treebank::write_treebank(out.file("train.trees"), d.train);
  treebank::write_treebank(out.file("dev.trees"), d.dev);
  treebank::write_treebank(out.file("test.trees"), d.test);
  out.text("agreement_synthetic.json", eval::suite_to_json(d.suite).dump(2) + "\n");
  out.finish();
}

void cmd_vocab(const RunConfig& c) {
  require_file(c, "train");
  Output out(c, "vocab");
  out.input(c.path("train"));
  auto trees = read_trees(c.path("train"));
  auto vocab = treebank::build_vocab(trees, c.merges);
  out.open();
  vocab.save(out.file("vocab.bpe"));
  out.finish();
}

void cmd_train(const RunConfig& c) {
  require_file(c, "train");
  require_file(c, "vocab");
  if (!c.paths.at("dev").empty()) require_file(c, "dev");
  Output out(c, "train");
  out.input(c.path("train"));
  out.input(c.path("vocab"));
  auto vocab = treebank::SubwordVocab::load(c.path("vocab"));
  auto train_trees = read_trees(c.path("train"));
  std::vector<treebank::Tree> dev_trees;
  if (!c.paths.at("dev").empty()) {
    out.input(c.path("dev"));
    dev_trees = read_trees(c.path("dev"));
  }
  models::ModelConfig mc = c.model;
  mc.terminals = static_cast<int>(vocab.token_count());
  mc.nonterminals = static_cast<int>(vocab.label_count());
  mc.validate();
  out.open();
  for (std::uint64_t seed : c.seeds) {
    auto model = models::build_model(mc, seed);
    auto tr = sequences(*model, train_trees, vocab);
    auto dv = sequences(*model, dev_trees, vocab);
    const std::string rel = lower(models::architecture_name(mc.architecture)) + "/seed" + std::to_string(seed);
    const fs::path dir = fs::path(out.dir()) / rel;
    fs::create_directories(dir);
    models::TrainConfig tc = c.train;
    tc.seed = seed;
    tc.checkpoint_dir = dir.string();
    tc.config_digest = checkpoint_digest(mc);
    auto loss = out.csv(rel + "/loss.csv");
    loss << "epoch,train_loss,dev_loss,best\n";
    models::train(*model, tr, dv, tc, [&](const models::EpochStats& e) {
      loss << e.epoch << ',' << fmt(e.train_loss) << ',' << (std::isnan(e.dev_loss) ? "" : fmt(e.dev_loss)) << ','
           << (e.best ? 1 : 0) << '\n';
    });
    std::vector<std::string> ckpts;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".ckpt") ckpts.push_back(rel + "/" + e.path().filename().string());
    std::sort(ckpts.begin(), ckpts.end());
    for (const auto& f : ckpts) out.file(f);
    boost::property_tree::ptree ini;
    for (const auto& [k, v] : c.settings)
      if (k.rfind("model.", 0) == 0) ini.put(boost::property_tree::ptree::path_type(k, '/'), v);
    ini.put(boost::property_tree::ptree::path_type("model.terminals", '/'), mc.terminals);
    ini.put(boost::property_tree::ptree::path_type("model.nonterminals", '/'), mc.nonterminals);
    ini.put(boost::property_tree::ptree::path_type("run.seed", '/'), seed);
    boost::property_tree::ptree nested;
    for (const auto& [k, v] : ini) {
      auto dot = k.find('.');
      nested.put(boost::property_tree::ptree::path_type(k.substr(0, dot) + "/" + k.substr(dot + 1), '/'),
                 v.get_value<std::string>());
    }
    boost::property_tree::write_ini(out.file(rel + "/model.ini"), nested);
    out.text(rel + "/model_card.txt",
             models::model_card(*model, seed, {{"train", util::file_sha256(c.path("train"))},
                                               {"vocab", util::file_sha256(c.path("vocab"))}}));
  }
  out.finish();
}

void cmd_ppl(const RunConfig& c) {
  require_file(c, "vocab");
  require_file(c, "checkpoints");
  std::vector<std::string> splits;
  for (const char* k : {"dev", "test"})
    if (!c.paths.at(k).empty()) {
      require_file(c, k);
      splits.push_back(k);
    }
  if (splits.empty()) throw ConfigError("ppl needs paths.dev or paths.test");
  Output out(c, "ppl");
  out.input(c.path("vocab"));
  out.input(c.path("checkpoints"));
  auto vocab = treebank::SubwordVocab::load(c.path("vocab"));
  std::map<std::string, std::vector<treebank::Tree>> data;
  for (const auto& s : splits) {
    out.input(c.path(s));
    for (const auto& t : read_trees(c.path(s))) data[s].push_back(treebank::tokenize_tree(t, vocab));
  }
  auto runs = load_runs(c.path("checkpoints"));
  out.open();
  auto csv = out.csv("ppl.csv");
  csv << "architecture,seed,split,sentences,tokens,total_logprob,perplexity,denominator\n";
  for (const auto& r : runs)
    for (const auto& s : splits) {
      auto p = decoder::perplexity_gold(*r.model, data[s], vocab);
      csv << models::architecture_name(r.config.architecture) << ',' << r.seed << ',' << s << ',' << data[s].size()
          << ',' << p.tokens << ',' << fmt(p.total_logprob) << ',' << fmt(p.perplexity) << ",terminal_subwords\n";
    }
  out.finish();
}

void cmd_surprisal(const RunConfig& c) {
  require_file(c, "vocab");
  require_file(c, "checkpoints");
  require_file(c, "sentences");
  Output out(c, "surprisal");
  out.input(c.path("vocab"));
  out.input(c.path("checkpoints"));
  out.input(c.path("sentences"));
  auto vocab = treebank::SubwordVocab::load(c.path("vocab"));
  std::vector<std::vector<std::string>> sentences;
  {
    std::ifstream in(c.path("sentences"));
    for (std::string line; std::getline(in, line);) {
      std::istringstream ws(line);
      std::vector<std::string> words;
      for (std::string w; ws >> w;) words.push_back(w);
      if (!words.empty()) sentences.push_back(std::move(words));
    }
  }
  if (sentences.empty()) throw DataError("no sentences in '" + c.path("sentences") + "'");
  auto runs = load_runs(c.path("checkpoints"));
  out.open();
  for (const auto& r : runs) {
    auto csv = out.csv(run_name(r) + "/surprisal.csv");
    csv << "sentence_id,region,token_span,surprisal,unit,beam_params\n";
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      std::vector<decoder::RegionSpan> spans;
      for (std::size_t k = 0; k < sentences[i].size(); ++k) spans.push_back({sentences[i][k], k, k + 1});
      auto t = decoder::surprisals(*r.model, decoder::encode_words(sentences[i], vocab), spans, c.beam, c.unit);
      for (const auto& reg : t.regions)
        csv << i << ',' << (reg.span.name.find_first_of(",\"") == std::string::npos ? reg.span.name : "\"" + reg.span.name + "\"")
            << ',' << reg.span.begin << ':' << reg.span.end << ',' << fmt(reg.surprisal) << ','
            << decoder::unit_name(c.unit) << ',' << c.beam.describe() << '\n';
    }
  }
  out.finish();
}

void cmd_suite(const RunConfig& c) {
  require_file(c, "vocab");
  require_file(c, "checkpoints");
  require_file(c, "suites");
  Output out(c, "suite");
  out.input(c.path("vocab"));
  out.input(c.path("checkpoints"));
  out.input(c.path("suites"));
  auto vocab = treebank::SubwordVocab::load(c.path("vocab"));
  std::vector<eval::TestSuite> suites;
  for (const auto& f : suite_files(c.path("suites"))) suites.push_back(eval::load_suite_file(f));
  auto runs = load_runs(c.path("checkpoints"));
  out.open();
  auto acc = out.csv("accuracy.csv");
  acc << "architecture,seed,suite,circuit,items,successes,errors,accuracy\n";
  auto overall = out.csv("overall.csv");
  overall << "architecture,seed,overall_accuracy\n";
  for (const auto& r : runs) {
    auto scorer = eval::model_scorer(*r.model, vocab, c.beam, c.unit);
    std::vector<eval::SuiteResult> results;
    for (const auto& s : suites) results.push_back(eval::evaluate_suite(scorer, s));
    auto rc = out.csv(run_name(r) + "/results.csv");
    eval::write_results_csv(rc, results);
    const std::string arch = models::architecture_name(r.config.architecture);
    for (const auto& s : results)
      acc << arch << ',' << r.seed << ",\"" << s.suite << "\"," << s.circuit << ',' << s.items.size() << ','
          << s.successes << ',' << s.errors << ',' << fmt(s.accuracy) << '\n';
    overall << arch << ',' << r.seed << ',' << fmt(eval::overall_accuracy(results)) << '\n';
  }
  out.finish();
}

void cmd_report(const RunConfig& c, const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw ConfigError("report needs at least one result directory");
  for (const auto& d : dirs)
    if (!fs::exists(fs::path(d) / "overall.csv")) throw ConfigError("'" + d + "' has no overall.csv");
  Output out(c, "report");
  std::map<std::pair<models::Architecture, int>, double> acc;
  std::map<models::Architecture, std::pair<double, int>> ppl;
  for (const auto& d : dirs) {
    out.input((fs::path(d) / "overall.csv").string());
    for (auto& row : read_csv((fs::path(d) / "overall.csv").string()))
      acc[{models::parse_architecture(row["architecture"]), std::stoi(row["seed"])}] = std::stod(row["overall_accuracy"]);
    fs::path p = fs::path(d) / "ppl.csv";
    if (fs::exists(p)) {
      out.input(p.string());
      for (auto& row : read_csv(p.string())) {
        if (row["split"] != "test") continue;
        auto& slot = ppl[models::parse_architecture(row["architecture"])];
        slot.first += std::stod(row["perplexity"]);
        slot.second += 1;
      }
    }
  }
  if (acc.empty()) throw DataError("no accuracy rows in the result directories");
  auto report = eval::controlled_report(acc);
  out.open();
  auto csv = out.csv("report.csv");
  eval::write_report_csv(csv, report);
  out.text("accuracy.svg", eval::accuracy_bar_svg(report));
  std::vector<std::pair<std::string, std::pair<double, double>>> points;
  for (const auto& [a, cell] : report.cells)
    if (auto it = ppl.find(a); it != ppl.end())
      points.push_back({models::architecture_name(a), {it->second.first / it->second.second, cell.mean}});
  out.text("accuracy_ppl.svg", eval::accuracy_perplexity_svg(points));
  out.finish();
}

void cmd_audit(const RunConfig& c) {
  Output out(c, "audit");
  auto report = models::size_audit(c.audit_terminals, c.audit_nonterminals, c.audit_untied);
  out.open();
  auto csv = out.csv("audit.csv");
  csv << "architecture,layers,hidden,heads,tied,parameters,reference_millions,relative_error,within\n";
  for (const auto& r : report.rows)
    csv << models::architecture_name(r.entry.architecture) << ',' << r.entry.layers << ',' << r.entry.hidden << ','
        << r.entry.heads << ',' << (r.tied ? 1 : 0) << ',' << r.parameters << ',' << r.entry.reference_millions << ','
        << fmt(r.relative_error) << ',' << (r.within ? 1 : 0) << '\n';
  std::ostringstream summary;
  summary << "terminals=" << report.terminals << "\nnonterminals=" << report.nonterminals
          << "\ntolerance=" << report.tolerance << "\ntied_all_within=" << report.tied_all_within
          << "\nuntied_all_within=" << report.untied_all_within << "\nembedding_tying=" << report.choice << '\n';
  out.text("audit.txt", summary.str());
  out.finish();
}

void cmd_parse(const RunConfig& c) {
  require_file(c, "vocab");
  require_file(c, "checkpoints");
  require_file(c, "test");
  Output out(c, "parse");
  out.input(c.path("vocab"));
  out.input(c.path("checkpoints"));
  out.input(c.path("test"));
  auto vocab = treebank::SubwordVocab::load(c.path("vocab"));
  auto gold = read_trees(c.path("test"));
  auto runs = load_runs(c.path("checkpoints"));
  out.open();
  auto csv = out.csv("f1.csv");
  csv << "architecture,seed,sentences,failures,precision,recall,f1\n";
  for (const auto& r : runs) {
    if (!r.model->syntactic()) continue;
    auto run = eval::parse_corpus(*r.model, gold, vocab, c.beam);
    std::ostringstream trees;
    for (const auto& t : run.predicted) trees << treebank::render(t) << '\n';
    out.text(run_name(r) + "/parses.trees", trees.str());
    csv << models::architecture_name(r.config.architecture) << ',' << r.seed << ',' << gold.size() << ','
        << run.failures << ',' << fmt(run.brackets.precision) << ',' << fmt(run.brackets.recall) << ','
        << fmt(run.brackets.f1) << '\n';
  }
  out.finish();
}

bool verify_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) return false;
  json m = json::parse(in, nullptr, false);
  if (m.is_discarded() || !m.contains("data")) return false;
  for (const auto& [path, digest] : m["data"].items()) {
    try {
      if (util::file_sha256(path) != digest.get<std::string>()) return false;
    } catch (const DataError&) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- entry

int run(int argc, char** argv) {
  CLI::App app{"Syntactic language modeling toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "INI configuration file");
  app.add_option("-s,--set", sets, "section.key=value override (repeatable)");
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, def] : default_settings()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '.', '-');
    std::replace(flag.begin(), flag.end(), '_', '-');
    app.add_option("--" + flag, flag_values[key], "overrides " + key);
  }
  app.fallthrough();

  std::string command;
  std::vector<std::string> result_dirs;
  for (const char* name : {"synth", "vocab", "train", "ppl", "surprisal", "suite", "audit", "parse"})
    app.add_subcommand(name)->callback([&command, name] { command = name; });
  auto* report = app.add_subcommand("report", "controlled report over suite result directories");
  report->add_option("dirs", result_dirs, "result directories")->required();
  report->callback([&command] { command = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto fail = [](const char* kind, const std::exception& e, int code) {
    json err{{"error", kind}, {"message", e.what()}, {"exit_code", code}};
    std::cerr << err.dump() << '\n';
    return code;
  };
  try {
    Settings overrides;
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [key, value] : flag_values) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '.', '-');
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app.count("--" + flag)) overrides[key] = value;
    }
    RunConfig c = load_config(config_path, overrides);
    if (command == "synth") cmd_synth(c);
    else if (command == "vocab") cmd_vocab(c);
    else if (command == "train") cmd_train(c);
    else if (command == "ppl") cmd_ppl(c);
    else if (command == "surprisal") cmd_surprisal(c);
    else if (command == "suite") cmd_suite(c);
    else if (command == "report") cmd_report(c, result_dirs);
    else if (command == "audit") cmd_audit(c);
    else if (command == "parse") cmd_parse(c);
  } catch (const ConfigError& e) {
    return fail("config", e, 2);
  } catch (const DecodeError& e) {
    return fail("decode", e, 4);
  } catch (const Error& e) {
    return fail("data", e, 3);
  } catch (const std::exception& e) {
    return fail("data", e, 3);
  }
  return 0;
}

}  // namespace cag::cli
