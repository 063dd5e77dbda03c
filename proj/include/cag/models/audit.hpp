#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cag/models/model.hpp"

namespace cag::models {

// Published grid: layers / hidden / heads per architecture and the model
// sizes they were reported at (millions of parameters).
struct GridEntry {
  Architecture architecture;
  int layers;
  int hidden;
  int heads;  // 0 for recurrent models
  double reference_millions;
};
const std::vector<GridEntry>& reference_grid();

// Full-scale configs: tokens = GPT-2 BPE size, sequence models with 1024
// positions, CAG with 256 stack positions.
inline constexpr int kAuditTerminals = 50257;
inline constexpr int kAuditNonterminals = 26;
ModelConfig audit_config(const GridEntry& e, int terminals, int nonterminals, bool tied);

struct AuditRow {
  GridEntry entry;
  bool tied = true;
  std::int64_t parameters = 0;
  double relative_error = 0.0;  // (count - reference) / reference
  bool within = false;          // |relative_error| <= tolerance
};

struct AuditReport {
  int terminals = 0;
  int nonterminals = 0;
  double tolerance = 0.01;
  std::vector<AuditRow> rows;  // untied rows first (when requested), then tied
  bool tied_all_within = false;
  bool untied_all_within = false;
  std::string choice;  // which embedding policy reproduces the grid
};

AuditReport size_audit(int terminals = kAuditTerminals, int nonterminals = kAuditNonterminals,
                       bool include_untied = true, double tolerance = 0.01);

}  // namespace cag::models
