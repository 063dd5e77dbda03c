#pragma once

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cag/decoder/decoder.hpp"
#include "cag/eval/suite.hpp"

namespace cag::eval {

// Region surprisals for one condition sentence. May throw DecodeError.
using Scorer = std::function<std::map<std::string, double>(const Condition&)>;

// Scores through decoder::surprisals (beam for syntactic models).
Scorer model_scorer(const models::Model& model, const treebank::SubwordVocab& vocab,
                    const decoder::BeamParams& params, decoder::Unit unit = decoder::Unit::kBits);

struct ItemResult {
  std::size_t index = 0;
  SurprisalMap surprisals;  // only the conditions the criterion references
  bool success = false;
  std::string error;        // non-empty when scoring failed
  bool failed_with_error() const { return !error.empty(); }
};

// Decode errors mark the item failed-with-error rather than propagating.
ItemResult eval_item(const Scorer& scorer, const Item& item, const Criterion& criterion, std::size_t index = 0);

struct SuiteResult {
  std::string suite;
  std::string circuit;
  std::vector<ItemResult> items;
  std::size_t successes = 0;
  std::size_t errors = 0;
  double accuracy = 0.0;  // successes / items; error items count as failures
};

SuiteResult evaluate_suite(const Scorer& scorer, const TestSuite& suite);

// Criterion re-evaluation from cached surprisals.
SuiteResult rescore(const TestSuite& suite, const std::vector<ItemResult>& cached);

// circuit -> unweighted mean of its suites' accuracies
std::map<std::string, double> circuit_accuracy(const std::vector<SuiteResult>& results);
// Mean over circuits.
double overall_accuracy(const std::vector<SuiteResult>& results);

// Columns: suite,circuit,item,surprisals,success,error. `surprisals` is
// "condition/region=value" joined by ';'.
void write_results_csv(std::ostream& out, const std::vector<SuiteResult>& results);

}  // namespace cag::eval
