#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSuites = std::string(CAG_DATA_DIR) + "/suites/";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cag_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cag");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cag::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents, manifests excluded.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[fs::relative(e.path(), root).string()] = slurp(e.path().string());
  return out;
}

void toy_pipeline(const TempDir& t, const std::string& tag) {
  const std::string d = t / tag;
  REQUIRE(invoke({"synth", "--synth-train", "200", "--synth-dev", "20", "--synth-test", "20", "--synth-items", "10",
               "--paths-output", d + "/data"}) == 0);
  REQUIRE(invoke({"vocab", "--paths-train", d + "/data/train.trees", "--run-merges", "100", "--paths-output",
               d + "/vocab"}) == 0);
  REQUIRE(invoke({"train", "--paths-train", d + "/data/train.trees", "--paths-dev", d + "/data/dev.trees",
               "--paths-vocab", d + "/vocab/vocab.bpe", "--model-hidden", "16", "--model-layers", "1",
               "--model-heads", "2", "--train-epochs", "2", "--train-batch", "16", "--paths-output", d + "/runs"}) ==
          0);
  REQUIRE(invoke({"suite", "--paths-suites", kSuites + "agreement_pp.json", "--paths-vocab", d + "/vocab/vocab.bpe",
               "--paths-checkpoints", d + "/runs", "--paths-output", d + "/suite"}) == 0);
}

}  // namespace

TEST_CASE("audit command reproduces the size grid within one percent") {
  TempDir t("audit");
  REQUIRE(invoke({"audit", "--paths-output", t / "a"}) == 0);
  std::string txt = slurp(t / "a/audit.txt");
  CHECK(txt.find("tied_all_within=1") != std::string::npos);
  CHECK(txt.find("embedding_tying=tied") != std::string::npos);
  CHECK(slurp(t / "a/audit.csv").rfind("# config_digest=", 0) == 0);
  CHECK(cag::cli::verify_manifest(t / "a"));
}

TEST_CASE("report over two equal architectures gives zero deltas and two bars") {
  TempDir t("report");
  for (auto [dir, arch] : {std::pair{"lstm", "LSTM"}, std::pair{"tf", "Transformer"}}) {
    fs::create_directories(t.path / dir);
    std::ofstream(t / (std::string(dir) + "/overall.csv"))
        << "# config_digest=x\narchitecture,seed,overall_accuracy\n" << arch << ",1,0.5\n";
  }
  REQUIRE(invoke({"report", t / "lstm", t / "tf", "--paths-output", t / "out"}) == 0);
  std::string csv = slurp(t / "out/report.csv");
  CHECK(csv.find("delta,\"Transformer - LSTM\",attn,0.000000,0.000000,") != std::string::npos);
  std::string svg = slurp(t / "out/accuracy.svg");
  std::size_t bars = 0;
  for (std::size_t at = svg.find("class=\"bar\""); at != std::string::npos; at = svg.find("class=\"bar\"", at + 1))
    ++bars;
  CHECK(bars == 2);
  CHECK(fs::exists(t / "out/accuracy_ppl.svg"));
}

TEST_CASE("toy pipeline writes every artifact and reruns byte-identically") {
  TempDir t("pipeline");
  toy_pipeline(t, "one");
  for (const char* f : {"data/train.trees", "data/agreement_synthetic.json", "vocab/vocab.bpe", "runs/cag/seed1/best.ckpt",
                        "runs/cag/seed1/model.ini", "runs/cag/seed1/loss.csv", "runs/cag/seed1/model_card.txt",
                        "suite/accuracy.csv", "suite/overall.csv", "suite/cag/seed1/results.csv"})
    CHECK_MESSAGE(fs::exists(t / (std::string("one/") + f)), f);
  for (const char* d : {"data", "vocab", "runs", "suite"}) {
    const std::string dir = t / (std::string("one/") + d);
    CHECK_MESSAGE(cag::cli::verify_manifest(dir), dir);
    json m = json::parse(slurp(dir + "/manifest.json"));
    for (const char* key : {"tool", "version", "revision", "command", "config_digest", "settings", "data", "seeds",
                            "started", "finished"})
      CHECK_MESSAGE(m.contains(key), key);
  }
  toy_pipeline(t, "two");
  auto a = snapshot(t.path / "one");
  auto b = snapshot(t.path / "two");
  REQUIRE(a.size() == b.size());
  for (const auto& [rel, body] : a) {
    if (rel.find("data/") == 0 || rel.find("vocab/") == 0 || rel.find(".ckpt") != std::string::npos) {
      CHECK_MESSAGE(b[rel] == body, rel);
    } else if (rel.find(".csv") != std::string::npos && rel.find("suite/") == 0) {
      // paths differ in the digest line only through settings
      CHECK_MESSAGE(b[rel].substr(b[rel].find('\n')) == body.substr(body.find('\n')), rel);
    }
  }
}

TEST_CASE("a tampered input fails manifest verification") {
  TempDir t("tamper");
  REQUIRE(invoke({"synth", "--synth-train", "20", "--synth-dev", "5", "--synth-test", "5", "--synth-items", "2",
               "--paths-output", t / "d"}) == 0);
  REQUIRE(invoke({"vocab", "--paths-train", t / "d/train.trees", "--paths-output", t / "v"}) == 0);
  CHECK(cag::cli::verify_manifest(t / "v"));
  std::ofstream(t / "d/train.trees", std::ios::app) << "(S x)\n";
  CHECK_FALSE(cag::cli::verify_manifest(t / "v"));
}

TEST_CASE("configuration errors exit with code 2 and write nothing") {
  TempDir t("config");
  CHECK(invoke({"audit", "--beam-word", "500", "--paths-output", t / "a"}) == 2);
  CHECK(invoke({"audit", "--model-layers", "two", "--paths-output", t / "b"}) == 2);
  CHECK(invoke({"suite", "--paths-suites", t / "missing.json", "--paths-vocab", t / "missing.bpe",
             "--paths-checkpoints", t / "none", "--paths-output", t / "c"}) == 2);
  CHECK(invoke({"audit", "--no-such-flag", "1"}) == 2);
  std::ofstream(t / "bad.ini") << "[model]\nbogus = 1\n";
  CHECK(invoke({"audit", "--config", t / "bad.ini", "--paths-output", t / "d"}) == 2);
  for (const char* d : {"a", "b", "c", "d"}) CHECK_FALSE(fs::exists(t / d));
}

TEST_CASE("flags take precedence over the configuration file") {
  TempDir t("precedence");
  std::ofstream(t / "run.ini") << "[beam]\naction = 20\nword = 4\nfast_track = 1\n[paths]\noutput = "
                               << (t / "ini_out") << "\n";
  auto c = cag::cli::load_config(t / "run.ini", {{"beam.word", "8"}});
  CHECK(c.beam.action_beam == 20);
  CHECK(c.beam.word_beam == 8);
  CHECK(c.beam.fast_track == 1);
  CHECK(c.path("output") == t / "ini_out");
  REQUIRE(invoke({"audit", "--config", t / "run.ini", "--paths-output", t / "flag_out"}) == 0);
  CHECK(fs::exists(t / "flag_out/audit.csv"));
  CHECK_FALSE(fs::exists(t / "ini_out"));
}

TEST_CASE("loss log and model card accompany each trained seed") {
  TempDir t("seeds");
  REQUIRE(invoke({"synth", "--synth-train", "40", "--synth-dev", "5", "--synth-test", "5", "--synth-items", "2",
               "--paths-output", t / "d"}) == 0);
  REQUIRE(invoke({"vocab", "--paths-train", t / "d/train.trees", "--run-merges", "20", "--paths-output", t / "v"}) == 0);
  REQUIRE(invoke({"train", "--paths-train", t / "d/train.trees", "--paths-vocab", t / "v/vocab.bpe", "--model-architecture",
               "LSTM", "--model-hidden", "8", "--model-layers", "1", "--train-epochs", "1", "--train-batch", "8",
               "--run-seeds", "3,4", "--paths-output", t / "r"}) == 0);
  auto runs = cag::cli::load_runs(t / "r");
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].seed == 3);
  CHECK(runs[1].seed == 4);
  CHECK(slurp(t / "r/lstm/seed3/loss.csv").find("epoch,train_loss,dev_loss,best\n1,") != std::string::npos);
  REQUIRE(invoke({"ppl", "--paths-test", t / "d/test.trees", "--paths-vocab", t / "v/vocab.bpe", "--paths-checkpoints",
               t / "r", "--paths-output", t / "p"}) == 0);
  std::string ppl = slurp(t / "p/ppl.csv");
  CHECK(ppl.find("LSTM,3,test,5,") != std::string::npos);
  CHECK(ppl.find("LSTM,4,test,5,") != std::string::npos);
}
