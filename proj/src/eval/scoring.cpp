#include "cag/eval/scoring.hpp"

#include <cstdio>
#include <set>

#include "cag/errors.hpp"

namespace cag::eval {

Scorer model_scorer(const models::Model& model, const treebank::SubwordVocab& vocab,
                    const decoder::BeamParams& params, decoder::Unit unit) {
  return [&model, &vocab, params, unit](const Condition& c) {
    std::vector<decoder::Word> words = decoder::encode_words(c.words(), vocab);
    std::vector<decoder::RegionSpan> spans;
    auto ranges = c.spans();
    for (std::size_t i = 0; i < c.regions.size(); ++i) spans.push_back({c.regions[i].name, ranges[i].first, ranges[i].second});
    decoder::SurprisalTable t = decoder::surprisals(model, words, spans, params, unit);
    std::map<std::string, double> out;
    for (const auto& r : t.regions) out[r.span.name] = r.surprisal;
    return out;
  };
}

ItemResult eval_item(const Scorer& scorer, const Item& item, const Criterion& criterion, std::size_t index) {
  ItemResult r;
  r.index = index;
  std::set<std::string> conditions;
  for (const Term& t : criterion.terms()) conditions.insert(t.condition);
  for (const auto& name : conditions) {
    auto it = item.conditions.find(name);
    if (it == item.conditions.end()) throw ContractError("item has no condition '" + name + "'");
    try {
      r.surprisals[name] = scorer(it->second);
    } catch (const DecodeError& e) {
      r.error = name + ": " + e.what();
      r.success = false;
      return r;
    }
  }
  r.success = evaluate_criterion(criterion, r.surprisals);
  return r;
}

namespace {

SuiteResult summarize(const TestSuite& suite, std::vector<ItemResult> items) {
  SuiteResult s;
  s.suite = suite.name;
  s.circuit = suite.circuit;
  for (const auto& i : items) {
    s.successes += i.success ? 1 : 0;
    s.errors += i.failed_with_error() ? 1 : 0;
  }
  s.accuracy = items.empty() ? 0.0 : static_cast<double>(s.successes) / static_cast<double>(items.size());
  s.items = std::move(items);
  return s;
}

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

SuiteResult evaluate_suite(const Scorer& scorer, const TestSuite& suite) {
  std::vector<ItemResult> items;
  for (std::size_t i = 0; i < suite.items.size(); ++i) items.push_back(eval_item(scorer, suite.items[i], suite.criterion, i));
  return summarize(suite, std::move(items));
}

SuiteResult rescore(const TestSuite& suite, const std::vector<ItemResult>& cached) {
  std::vector<ItemResult> items = cached;
  for (auto& i : items) i.success = !i.failed_with_error() && evaluate_criterion(suite.criterion, i.surprisals);
  return summarize(suite, std::move(items));
}

std::map<std::string, double> circuit_accuracy(const std::vector<SuiteResult>& results) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : results) {
    acc[r.circuit].first += r.accuracy;
    acc[r.circuit].second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [c, v] : acc) out[c] = v.first / v.second;
  return out;
}

double overall_accuracy(const std::vector<SuiteResult>& results) {
  auto circuits = circuit_accuracy(results);
  if (circuits.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [c, v] : circuits) s += v;
  return s / static_cast<double>(circuits.size());
}

void write_results_csv(std::ostream& out, const std::vector<SuiteResult>& results) {
  out << "suite,circuit,item,surprisals,success,error\n";
  for (const auto& r : results)
    for (const auto& i : r.items) {
      std::string s;
      for (const auto& [cond, regions] : i.surprisals)
        for (const auto& [region, v] : regions) s += (s.empty() ? "" : ";") + cond + "/" + region + "=" + number(v);
      out << csv_field(r.suite) << ',' << csv_field(r.circuit) << ',' << i.index << ',' << csv_field(s) << ','
          << (i.success ? 1 : 0) << ',' << csv_field(i.error) << '\n';
    }
}

}  // namespace cag::eval
