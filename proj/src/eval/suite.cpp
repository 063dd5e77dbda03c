#include "cag/eval/suite.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "cag/errors.hpp"

namespace cag::eval {

using nlohmann::json;

std::vector<std::string> Condition::words() const {
  std::vector<std::string> out;
  for (const auto& r : regions) out.insert(out.end(), r.words.begin(), r.words.end());
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Condition::spans() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t at = 0;
  for (const auto& r : regions) {
    out.emplace_back(at, at + r.words.size());
    at += r.words.size();
  }
  return out;
}

std::vector<Term> Criterion::terms() const {
  std::vector<Term> out;
  auto add = [&](const Term& t) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  };
  for (const auto& c : conjuncts) {
    for (const auto& t : c.lhs) add(t);
    for (const auto& t : c.rhs) add(t);
  }
  return out;
}

namespace {

class CriterionParser {
 public:
  explicit CriterionParser(const std::string& text) : s_(text) {}

  Criterion parse() {
    Criterion c;
    c.conjuncts.push_back(comparison());
    while (true) {
      skip();
      if (at_end()) break;
      expect_word("AND");
      c.conjuncts.push_back(comparison());
    }
    return c;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaError("criterion: " + what + " at character " + std::to_string(i_), "/criterion");
  }
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool at_end() const { return i_ >= s_.size(); }
  std::string name() {
    skip();
    std::size_t b = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' || s_[i_] == '-' || s_[i_] == '.'))
      ++i_;
    if (b == i_) fail("expected a name");
    return s_.substr(b, i_ - b);
  }
  void expect(char ch) {
    skip();
    if (at_end() || s_[i_] != ch) fail(std::string("expected '") + ch + "'");
    ++i_;
  }
  void expect_word(const std::string& w) {
    if (name() != w) fail("expected '" + w + "'");
  }
  Term term() {
    expect_word("surprisal");
    expect('(');
    Term t;
    t.condition = name();
    expect(',');
    t.region = name();
    expect(')');
    return t;
  }
  std::vector<Term> sum() {
    std::vector<Term> out{term()};
    while (true) {
      skip();
      if (at_end() || s_[i_] != '+') break;
      ++i_;
      out.push_back(term());
    }
    return out;
  }
  Comparison comparison() {
    Comparison c;
    c.lhs = sum();
    skip();
    if (at_end()) fail("expected '<' or '>'");
    if (s_[i_] == '<')
      c.relation = Relation::kLess;
    else if (s_[i_] == '>')
      c.relation = Relation::kGreater;
    else
      fail("expected '<' or '>'");
    ++i_;
    c.rhs = sum();
    return c;
  }

  const std::string& s_;
  std::size_t i_ = 0;
};

double total(const std::vector<Term>& terms, const SurprisalMap& table) {
  double s = 0.0;
  for (const auto& t : terms) {
    auto c = table.find(t.condition);
    if (c == table.end()) throw ContractError("no surprisal for condition '" + t.condition + "'");
    auto r = c->second.find(t.region);
    if (r == c->second.end())
      throw ContractError("no surprisal for region '" + t.region + "' of condition '" + t.condition + "'");
    s += r->second;
  }
  return s;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError("expected an object", path);
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "'", path);
  return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_string() || v.get<std::string>().empty())
    throw SchemaError("must be a non-empty string", path + "/" + key);
  return v.get<std::string>();
}

Condition load_condition(const json& doc, const std::string& path) {
  const json& regions = field(doc, "regions", path);
  const std::string rpath = path + "/regions";
  if (!regions.is_array() || regions.empty()) throw SchemaError("must be a non-empty array", rpath);
  Condition c;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string p = rpath + "/" + std::to_string(i);
    Region r;
    r.name = string_field(regions[i], "name", p);
    if (!seen.insert(r.name).second) throw SchemaError("duplicate region '" + r.name + "'", p + "/name");
    const json& tokens = field(regions[i], "tokens", p);
    if (tokens.is_string()) {
      r.words = split_words(tokens.get<std::string>());
    } else if (tokens.is_array()) {
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (!tokens[k].is_string()) throw SchemaError("must be a string", p + "/tokens/" + std::to_string(k));
        auto ws = split_words(tokens[k].get<std::string>());
        r.words.insert(r.words.end(), ws.begin(), ws.end());
      }
    } else {
      throw SchemaError("must be a string or an array of strings", p + "/tokens");
    }
    if (r.words.empty()) throw SchemaError("region has no tokens", p + "/tokens");
    c.regions.push_back(std::move(r));
  }
  return c;
}

std::set<std::string> region_names(const Condition& c) {
  std::set<std::string> out;
  for (const auto& r : c.regions) out.insert(r.name);
  return out;
}

}  // namespace

Criterion parse_criterion(const std::string& text) { return CriterionParser(text).parse(); }

bool evaluate_criterion(const Criterion& c, const SurprisalMap& table) {
  bool ok = true;
  for (const auto& cmp : c.conjuncts) {
    double l = total(cmp.lhs, table), r = total(cmp.rhs, table);
    ok = ok && (cmp.relation == Relation::kLess ? l < r : l > r);
  }
  return ok;
}

TestSuite load_suite(const json& doc) {
  if (!doc.is_object()) throw SchemaError("suite must be an object", "");
  TestSuite s;
  s.name = string_field(doc, "name", "");
  s.circuit = string_field(doc, "circuit", "");
  s.criterion_text = string_field(doc, "criterion", "");
  s.criterion = parse_criterion(s.criterion_text);
  const json& items = field(doc, "items", "");
  if (!items.is_array() || items.empty()) throw SchemaError("must be a non-empty array", "/items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string ipath = "/items/" + std::to_string(i);
    const json& conds = field(items[i], "conditions", ipath);
    const std::string cpath = ipath + "/conditions";
    if (!conds.is_object() || conds.empty()) throw SchemaError("must be a non-empty object", cpath);
    Item item;
    for (auto it = conds.begin(); it != conds.end(); ++it)
      item.conditions[it.key()] = load_condition(it.value(), cpath + "/" + it.key());
    const auto names = region_names(item.conditions.begin()->second);
    for (const auto& [cname, cond] : item.conditions)
      if (region_names(cond) != names)
        throw SchemaError("conditions of one item must share region names", cpath + "/" + cname + "/regions");
    for (const Term& t : s.criterion.terms()) {
      auto c = item.conditions.find(t.condition);
      if (c == item.conditions.end())
        throw SchemaError("criterion names unknown condition '" + t.condition + "'", cpath);
      if (!names.count(t.region))
        throw SchemaError("criterion names unknown region '" + t.region + "'", cpath + "/" + t.condition + "/regions");
    }
    s.items.push_back(std::move(item));
  }
  return s;
}

TestSuite load_suite_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open suite file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what(), "");
  }
  return load_suite(doc);
}

json suite_to_json(const TestSuite& s) {
  json items = json::array();
  for (const auto& item : s.items) {
    json conds = json::object();
    for (const auto& [name, c] : item.conditions) {
      json regions = json::array();
      for (const auto& r : c.regions) {
        std::string text;
        for (const auto& w : r.words) text += (text.empty() ? "" : " ") + w;
        regions.push_back({{"name", r.name}, {"tokens", text}});
      }
      conds[name] = {{"regions", regions}};
    }
    items.push_back({{"conditions", conds}});
  }
  return {{"name", s.name}, {"circuit", s.circuit}, {"criterion", s.criterion_text}, {"items", items}};
}

}  // namespace cag::eval
