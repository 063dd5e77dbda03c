#include "cag/models/audit.hpp"

#include <cmath>

namespace cag::models {

const std::vector<GridEntry>& reference_grid() {
  static const std::vector<GridEntry> grid{
      {Architecture::kLstm, 2, 301, 0, 16.59},        {Architecture::kActionLstm, 2, 301, 0, 16.58},
      {Architecture::kRnng, 2, 276, 0, 16.61},        {Architecture::kTransformer, 3, 272, 4, 16.62},
      {Architecture::kPlm, 3, 272, 4, 16.63},         {Architecture::kPlmMask, 3, 272, 4, 16.63},
      {Architecture::kCag, 3, 256, 4, 16.57},
  };
  return grid;
}

ModelConfig audit_config(const GridEntry& e, int terminals, int nonterminals, bool tied) {
  ModelConfig c;
  c.architecture = e.architecture;
  c.layers = e.layers;
  c.hidden_dim = c.input_dim = e.hidden;
  c.heads = e.heads ? e.heads : 1;
  c.terminals = terminals;
  c.nonterminals = nonterminals;
  c.max_positions = e.architecture == Architecture::kCag ? 256 : 1024;
  c.tie_embeddings = tied;
  return c;
}

AuditReport size_audit(int terminals, int nonterminals, bool include_untied, double tolerance) {
  AuditReport r;
  r.terminals = terminals;
  r.nonterminals = nonterminals;
  r.tolerance = tolerance;
  r.tied_all_within = true;
  r.untied_all_within = include_untied;
  for (bool tied : {false, true}) {
    if (!tied && !include_untied) continue;
    for (const GridEntry& e : reference_grid()) {
      AuditRow row;
      row.entry = e;
      row.tied = tied;
      row.parameters = build_model(audit_config(e, terminals, nonterminals, tied), 0)->parameter_count();
      double ref = e.reference_millions * 1e6;
      row.relative_error = (static_cast<double>(row.parameters) - ref) / ref;
      row.within = std::abs(row.relative_error) <= tolerance;
      (tied ? r.tied_all_within : r.untied_all_within) &= row.within;
      r.rows.push_back(row);
    }
  }
  if (r.untied_all_within)
    r.choice = "untied";
  else if (r.tied_all_within)
    r.choice = "tied";
  else
    r.choice = "none";
  return r;
}

}  // namespace cag::models
