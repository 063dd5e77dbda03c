#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace cag::eval {

struct Region {
  std::string name;
  std::vector<std::string> words;
};

// One condition sentence, segmented into named regions.
struct Condition {
  std::vector<Region> regions;

  std::vector<std::string> words() const;
  // Word-index span [begin, end) of each region, in order.
  std::vector<std::pair<std::size_t, std::size_t>> spans() const;
};

struct Item {
  std::map<std::string, Condition> conditions;
};

// surprisal(condition, region)
struct Term {
  std::string condition;
  std::string region;
  friend bool operator==(const Term&, const Term&) = default;
};

enum class Relation { kLess, kGreater };

struct Comparison {
  std::vector<Term> lhs;
  Relation relation = Relation::kLess;
  std::vector<Term> rhs;
};

// Conjunction of comparisons between sums of region surprisals.
struct Criterion {
  std::vector<Comparison> conjuncts;
  std::vector<Term> terms() const;  // distinct, in order of appearance
};

// Grammar:  criterion := comparison ("AND" comparison)*
//           comparison := sum ("<" | ">") sum
//           sum := term ("+" term)*
//           term := "surprisal" "(" name "," name ")"
// Throws SchemaError (path "/criterion") on malformed text.
Criterion parse_criterion(const std::string& text);

// condition -> region -> surprisal
using SurprisalMap = std::map<std::string, std::map<std::string, double>>;

// Pure: strict inequalities, every conjunct must hold. Throws ContractError
// if a referenced term is missing from the table.
bool evaluate_criterion(const Criterion& c, const SurprisalMap& table);

struct TestSuite {
  std::string name;
  std::string circuit;
  std::string criterion_text;
  Criterion criterion;
  std::vector<Item> items;
};

// Validates against the suite schema; throws SchemaError with a JSON path.
TestSuite load_suite(const nlohmann::json& document);
TestSuite load_suite_file(const std::string& path);
nlohmann::json suite_to_json(const TestSuite& suite);

}  // namespace cag::eval
