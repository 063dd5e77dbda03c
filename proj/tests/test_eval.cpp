#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "cag/errors.hpp"
#include "cag/eval/report.hpp"
#include "cag/eval/scoring.hpp"
#include "cag/eval/suite.hpp"
#include "cag/treebank/bpe.hpp"
#include "doctest.h"
#include "support/model_fixtures.hpp"

using namespace cag;
using namespace cag::eval;
using nlohmann::json;

namespace {

const std::string kSuites = std::string(CAG_DATA_DIR) + "/suites/";

json minimal_suite() {
  return json::parse(R"J({
    "name": "s", "circuit": "Agreement",
    "criterion": "surprisal(match, critical) < surprisal(mismatch, critical)",
    "items": [{"conditions": {
      "match": {"regions": [{"name": "pre", "tokens": "The author next to the senators"},
                            {"name": "critical", "tokens": "is"}, {"name": "end", "tokens": "good ."}]},
      "mismatch": {"regions": [{"name": "pre", "tokens": "The author next to the senators"},
                               {"name": "critical", "tokens": "are"}, {"name": "end", "tokens": "good ."}]}}}]})J");
}

// Surprisal of a region = sum of per-word values from a table (default 0).
Scorer lookup_scorer(std::map<std::string, double> per_word) {
  return [per_word](const Condition& c) {
    std::map<std::string, double> out;
    for (const auto& r : c.regions) {
      double s = 0.0;
      for (const auto& w : r.words)
        if (auto it = per_word.find(w); it != per_word.end()) s += it->second;
      out[r.name] = s;
    }
    return out;
  };
}

std::string schema_path(const json& doc) {
  try {
    load_suite(doc);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<none>";
}

SuiteResult fixed_result(const std::string& circuit, double accuracy) {
  SuiteResult r;
  r.circuit = circuit;
  r.accuracy = accuracy;
  return r;
}

}  // namespace

TEST_CASE("criterion grammar") {
  Criterion c = parse_criterion(
      "surprisal(a, x) + surprisal(a,y) > surprisal(b, x)  AND surprisal(c, gap) < surprisal(d, gap)");
  REQUIRE(c.conjuncts.size() == 2);
  CHECK(c.conjuncts[0].lhs.size() == 2);
  CHECK(c.conjuncts[0].relation == Relation::kGreater);
  CHECK(c.conjuncts[1].rhs[0] == Term{"d", "gap"});
  CHECK(c.terms().size() == 5);
  for (const char* bad : {"", "surprisal(a, x)", "surprisal(a x) < surprisal(b, x)", "surprisal(a, x) = surprisal(b, x)",
                          "surprisal(a, x) < surprisal(b, x) OR surprisal(a, x) < surprisal(b, x)",
                          "surprise(a, x) < surprisal(b, x)", "surprisal(a, x) < surprisal(b, x) AND"})
    CHECK_THROWS_AS(parse_criterion(bad), SchemaError);

  SurprisalMap t{{"a", {{"x", 1.0}, {"y", 1.0}}}, {"b", {{"x", 1.5}}}, {"c", {{"gap", 2.0}}}, {"d", {{"gap", 3.0}}}};
  CHECK(evaluate_criterion(c, t));
  t["d"]["gap"] = 2.0;
  CHECK_FALSE(evaluate_criterion(c, t));
  t.erase("d");
  CHECK_THROWS_AS(evaluate_criterion(c, t), ContractError);
}

TEST_CASE("shipped agreement suite starts with the attractor example") {
  TestSuite s = load_suite_file(kSuites + "agreement_pp.json");
  CHECK(s.circuit == "Agreement");
  CHECK(s.items.size() == 4);
  const Item& first = s.items.front();
  REQUIRE(first.conditions.count("match"));
  REQUIRE(first.conditions.count("mismatch"));
  using W = std::vector<std::string>;
  CHECK(first.conditions.at("match").words() == W{"The", "author", "next", "to", "the", "senators", "is", "good", "."});
  CHECK(first.conditions.at("mismatch").words() == W{"The", "author", "next", "to", "the", "senators", "are", "good", "."});
  auto spans = first.conditions.at("match").spans();
  CHECK(spans[2] == std::pair<std::size_t, std::size_t>{6, 7});
}

TEST_CASE("all shipped suites load, one per circuit") {
  std::set<std::string> circuits;
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(kSuites)) {
    TestSuite s = load_suite_file(e.path().string());
    circuits.insert(s.circuit);
    CHECK(load_suite(suite_to_json(s)).items.size() == s.items.size());
    ++n;
  }
  CHECK(n == 6);
  CHECK(circuits == std::set<std::string>{"Agreement", "Licensing", "Garden-Path Effects", "Gross Syntactic State",
                                          "Center Embedding", "Long-Distance Dependencies"});
}

TEST_CASE("schema errors carry a path") {
  CHECK(schema_path(minimal_suite()) == "<none>");
  json d = minimal_suite();
  d["items"] = json::array();
  CHECK(schema_path(d) == "/items");
  d = minimal_suite();
  d["criterion"] = "surprisal(match, critical) < surprisal(other, critical)";
  CHECK(schema_path(d) == "/items/0/conditions");
  d = minimal_suite();
  d["criterion"] = "surprisal(match, verb) < surprisal(mismatch, verb)";
  CHECK(schema_path(d) == "/items/0/conditions/match/regions");
  d = minimal_suite();
  d["items"][0]["conditions"]["mismatch"]["regions"][1]["name"] = "verb";
  CHECK(schema_path(d) == "/items/0/conditions/mismatch/regions");
  d = minimal_suite();
  d["items"][0]["conditions"]["match"]["regions"][0].erase("tokens");
  CHECK(schema_path(d) == "/items/0/conditions/match/regions/0");
  d = minimal_suite();
  d["items"][0]["conditions"]["match"]["regions"][2]["tokens"] = " ";
  CHECK(schema_path(d) == "/items/0/conditions/match/regions/2/tokens");
  d = minimal_suite();
  d.erase("circuit");
  CHECK(schema_path(d) == "");
  d = minimal_suite();
  d["criterion"] = "surprisal(match critical)";
  CHECK(schema_path(d) == "/criterion");
  CHECK_THROWS_AS(load_suite_file(kSuites + "missing.json"), DataError);
}

TEST_CASE("lookup scorer decides the attractor item") {
  TestSuite s = load_suite(minimal_suite());
  ItemResult r = eval_item(lookup_scorer({{"is", 1.0}, {"are", 2.0}}), s.items[0], s.criterion);
  CHECK(r.success);
  CHECK_FALSE(r.failed_with_error());
  CHECK(r.surprisals.at("match").at("critical") == 1.0);
  CHECK(r.surprisals.at("mismatch").at("critical") == 2.0);
  ItemResult tie = eval_item(lookup_scorer({{"is", 1.0}, {"are", 1.0}}), s.items[0], s.criterion);
  CHECK_FALSE(tie.success);
}

TEST_CASE("suite accuracy and circuit means") {
  TestSuite s = load_suite_file(kSuites + "agreement_pp.json");
  SuiteResult all = evaluate_suite(lookup_scorer({{"is", 1.0}, {"are", 2.0}}), s);
  // Items alternate singular and plural subjects, so this scorer gets half right.
  CHECK(all.items.size() == 4);
  CHECK(all.accuracy == doctest::Approx(0.5));
  SuiteResult blank = evaluate_suite(lookup_scorer({}), s);
  CHECK(blank.accuracy == 0.0);

  TestSuite single = load_suite(minimal_suite());
  SuiteResult one = evaluate_suite(lookup_scorer({{"is", 1.0}, {"are", 2.0}}), single);
  CHECK(one.accuracy == 1.0);
  auto circuits = circuit_accuracy({one});
  CHECK(circuits.at("Agreement") == one.accuracy);

  std::vector<SuiteResult> rs{fixed_result("A", 0.2), fixed_result("A", 0.6), fixed_result("B", 1.0)};
  circuits = circuit_accuracy(rs);
  CHECK(circuits.at("A") == doctest::Approx(0.4));
  CHECK(circuits.at("B") == 1.0);
  CHECK(overall_accuracy(rs) == doctest::Approx(0.7));
}

TEST_CASE("decode errors are counted, not dropped") {
  TestSuite s = load_suite_file(kSuites + "agreement_pp.json");
  Scorer flaky = [](const Condition& c) -> std::map<std::string, double> {
    for (const auto& w : c.words())
      if (w == "pilots") throw DecodeError("no hypothesis", 0);
    return lookup_scorer({{"is", 1.0}, {"are", 2.0}})(c);
  };
  SuiteResult r = evaluate_suite(flaky, s);
  CHECK(r.items.size() == 4);
  CHECK(r.errors == 1);
  CHECK(r.items[3].failed_with_error());
  CHECK_FALSE(r.items[3].success);
  CHECK(r.accuracy == doctest::Approx(0.5));  // items 0 and 2 succeed; denominator still 4

  SuiteResult again = rescore(s, r.items);
  CHECK(again.accuracy == r.accuracy);
  CHECK(again.errors == r.errors);
  std::ostringstream a, b;
  write_results_csv(a, {r});
  write_results_csv(b, {again});
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("suite,circuit,item,surprisals,success,error\n", 0) == 0);
}

TEST_CASE("model scorer evaluates the shipped suites without error") {
  std::vector<std::vector<std::string>> corpus;
  std::vector<TestSuite> suites;
  for (const char* name : {"agreement_pp.json", "reflexive_pp.json", "filler_gap_object.json"}) {
    suites.push_back(load_suite_file(kSuites + name));
    for (const auto& item : suites.back().items)
      for (const auto& [n, c] : item.conditions) corpus.push_back(c.words());
  }
  auto vocab = treebank::train_bpe(corpus, 20);
  for (auto arch : {models::Architecture::kCag, models::Architecture::kLstm}) {
    auto cfg = testing::tiny_config(arch, 16, static_cast<int>(vocab.token_count()), 2);
    auto m = models::build_model(cfg, 5);
    Scorer scorer = model_scorer(*m, vocab, {20, 4, 2});
    for (const auto& s : suites) {
      SuiteResult r = evaluate_suite(scorer, s);
      CHECK(r.errors == 0);
      CHECK(r.accuracy >= 0.0);
      CHECK(r.accuracy <= 1.0);
      SuiteResult again = evaluate_suite(scorer, s);
      std::ostringstream a, b;
      write_results_csv(a, {r});
      write_results_csv(b, {again});
      CHECK(a.str() == b.str());
    }
  }
}

TEST_CASE("controlled report arithmetic") {
  using A = models::Architecture;
  ControlledReport even = controlled_report({{{A::kActionLstm, 1}, 0.5}, {{A::kRnng, 1}, 0.5}});
  CHECK(even.cells.at(A::kRnng).single_seed);
  CHECK(even.cells.at(A::kRnng).stdev == 0.0);
  int available = 0;
  for (const auto& d : even.deltas) {
    if (!d.available) continue;
    ++available;
    CHECK(d.label() == "RNNG - ActionLSTM");
    CHECK(d.mean == 0.0);
  }
  CHECK(available == 1);

  ControlledReport seeds = controlled_report({{{A::kLstm, 1}, 0.5}, {{A::kLstm, 2}, 0.6}, {{A::kLstm, 3}, 0.7}});
  CHECK(seeds.cells.at(A::kLstm).mean == doctest::Approx(0.6));
  CHECK(seeds.cells.at(A::kLstm).stdev == doctest::Approx(0.1));
  CHECK_FALSE(seeds.cells.at(A::kLstm).single_seed);

  ControlledReport pair = controlled_report_from_stats({{A::kActionLstm, 0.725, 0.018, 3, false}, {A::kRnng, 0.811, 0.028, 3, false}});
  const Delta& d = pair.deltas[3];
  REQUIRE(d.available);
  CHECK(d.mean == doctest::Approx(0.086));
  CHECK(d.stdev == doctest::Approx(std::sqrt(0.018 * 0.018 + 0.028 * 0.028)));
  CHECK(std::round(d.stdev * 1000) == 33);
}

TEST_CASE("report outputs") {
  using A = models::Architecture;
  ControlledReport r = controlled_report({{{A::kCag, 1}, 0.5}, {{A::kPlm, 1}, 0.5}});
  std::ostringstream csv;
  write_report_csv(csv, r);
  CHECK(csv.str().find("delta,\"CAG - PLM\",comp,0.000000,0.000000,,") != std::string::npos);
  CHECK(csv.str().find("unavailable") != std::string::npos);
  std::string svg = accuracy_bar_svg(r);
  std::size_t bars = 0;
  for (std::size_t at = svg.find("class=\"bar\""); at != std::string::npos; at = svg.find("class=\"bar\"", at + 1)) ++bars;
  CHECK(bars == 2);
  CHECK(svg.rfind("<svg", 0) == 0);
  std::string scatter = accuracy_perplexity_svg({{"CAG", {30.0, 0.8}}, {"PLM", {28.0, 0.7}}});
  CHECK(scatter.find("class=\"point\"") != std::string::npos);
  CHECK(accuracy_bar_svg(r) == svg);
}
