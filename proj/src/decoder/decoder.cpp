#include "cag/decoder/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "cag/errors.hpp"
#include "cag/nn/ops.hpp"

namespace cag::decoder {

using models::kNegInf;
using treebank::ActionKind;

void BeamParams::validate() const {
  if (action_beam < 1 || word_beam < 1 || fast_track < 0)
    throw ConfigError("beam: sizes must be positive (fast_track non-negative)");
  if (word_beam > action_beam) throw ConfigError("beam: word_beam must not exceed action_beam");
  if (fast_track > word_beam) throw ConfigError("beam: fast_track must not exceed word_beam");
}

std::string BeamParams::describe() const {
  std::ostringstream s;
  s << "action=" << action_beam << ";word=" << word_beam << ";fast_track=" << fast_track;
  return s.str();
}

std::vector<Word> encode_words(const std::vector<std::string>& words, const treebank::SubwordVocab& vocab) {
  std::vector<Word> out;
  for (const auto& w : words) out.push_back(vocab.encode(w));
  return out;
}

namespace {

double log_sum(const std::vector<double>& xs) {
  nn::Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Eigen::Index>(i)) = xs[i];
  return nn::log_sum_exp(v);
}

using CellPtr = std::shared_ptr<const BeamCell>;

// A scored successor, built only when kept: `base` followed by `last`. For a
// word, `base` already holds every subword but the last.
struct Pending {
  CellPtr base;
  Action last;
  double score = kNegInf;
  bool completes = false;
};

// Lexicographic order of base history + last action.
bool history_less(const Pending& a, const Pending& b) {
  const auto& ha = a.base->history;
  const auto& hb = b.base->history;
  const std::size_t na = ha.size() + 1, nb = hb.size() + 1;
  for (std::size_t i = 0; i < std::min(na, nb); ++i) {
    const Action& x = i < ha.size() ? ha[i] : a.last;
    const Action& y = i < hb.size() ? hb[i] : b.last;
    if (x < y) return true;
    if (y < x) return false;
  }
  return na < nb;
}

bool better(const Pending& a, const Pending& b) {
  if (a.score != b.score) return a.score > b.score;
  return history_less(a, b);
}

bool better_cell(const BeamCell& a, const BeamCell& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return std::lexicographical_compare(a.history.begin(), a.history.end(), b.history.begin(), b.history.end());
}

// Scores generating `word` from `cell`; nullopt if some subword is impossible.
std::optional<Pending> word_successor(const Model& model, const CellPtr& cell, const Word& word) {
  CellPtr base = cell;
  for (std::size_t i = 0; i + 1 < word.size(); ++i) {
    Action a = Action::gen(word[i]);
    if (base->state.finished || model.next_distribution(base->state).logprob(a) == kNegInf) return std::nullopt;
    auto next = std::make_shared<BeamCell>(*base);
    next->state = model.advance(next->state, a);
    next->history.push_back(a);
    next->logprob = next->state.logprob;
    base = std::move(next);
  }
  if (base->state.finished) return std::nullopt;
  Action last = Action::gen(word.back());
  double lp = model.next_distribution(base->state).logprob(last);
  if (lp == kNegInf) return std::nullopt;
  return Pending{base, last, base->logprob + lp, true};
}

BeamCell materialize(const Model& model, const Pending& p) {
  BeamCell next = *p.base;
  next.state = model.advance(next.state, p.last);
  next.history.push_back(p.last);
  next.logprob = next.state.logprob;
  if (p.completes) ++next.words;
  return next;
}

// Closes a cell with REDUCE only; false if that cannot finish it.
bool close_cell(const Model& model, BeamCell& cell) {
  while (!cell.state.finished) {
    if (!model.legal(cell.state).reduce) return false;
    cell.state = model.advance(cell.state, Action::reduce());
    cell.history.push_back(Action::reduce());
  }
  cell.logprob = cell.state.logprob;
  return true;
}

}  // namespace

BeamResult word_sync_beam(const Model& model, const std::vector<Word>& words, const BeamParams& params) {
  params.validate();
  if (!model.syntactic()) throw ContractError("word_sync_beam: needs a syntactic model");
  if (words.empty()) throw ContractError("word_sync_beam: empty sentence");
  for (const Word& w : words)
    if (w.empty()) throw ContractError("word_sync_beam: empty word");

  const auto& cfg = model.config();
  std::vector<BeamCell> beam(1);
  beam[0].state = model.start();
  double previous = 0.0;
  BeamResult result;

  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    std::vector<CellPtr> frontier;
    for (auto& c : beam) frontier.push_back(std::make_shared<const BeamCell>(std::move(c)));
    std::vector<Pending> pending_sync;
    while (!frontier.empty()) {
      std::vector<Pending> succ;
      for (const CellPtr& cell : frontier) {
        if (cell->state.finished) continue;
        models::NextDistribution d = model.next_distribution(cell->state);
        auto add = [&](Action a) {
          double lp = d.logprob(a);
          if (lp != kNegInf) succ.push_back({cell, a, cell->logprob + lp, false});
        };
        if (d.legal.reduce) add(Action::reduce());
        if (d.legal.nt)
          for (int l = 0; l < cfg.nonterminals; ++l) add(Action::nt(l));
        if (d.legal.gen)
          if (auto w = word_successor(model, cell, words[wi])) succ.push_back(std::move(*w));
      }
      std::sort(succ.begin(), succ.end(), better);
      std::vector<bool> taken(succ.size(), false);
      int promoted = 0;
      for (std::size_t i = 0; i < succ.size() && promoted < params.fast_track; ++i)
        if (succ[i].completes) {
          taken[i] = true;
          pending_sync.push_back(succ[i]);
          ++promoted;
        }
      std::vector<Pending> next_frontier;
      const std::size_t keep = std::min(succ.size(), static_cast<std::size_t>(params.action_beam));
      for (std::size_t i = 0; i < keep; ++i) {
        if (taken[i]) continue;
        if (succ[i].completes)
          pending_sync.push_back(succ[i]);
        else
          next_frontier.push_back(succ[i]);
      }
      // Nothing left in the frontier can outrank word_beam synced cells.
      if (!next_frontier.empty() && pending_sync.size() >= static_cast<std::size_t>(params.word_beam)) {
        std::vector<double> scores;
        for (const auto& p : pending_sync) scores.push_back(p.score);
        std::nth_element(scores.begin(), scores.begin() + (params.word_beam - 1), scores.end(), std::greater<>());
        double kth = scores[static_cast<std::size_t>(params.word_beam - 1)];
        double best_frontier = kNegInf;
        for (const auto& p : next_frontier) best_frontier = std::max(best_frontier, p.score);
        if (kth > best_frontier) break;
      }
      frontier.clear();
      for (const auto& p : next_frontier) frontier.push_back(std::make_shared<const BeamCell>(materialize(model, p)));
    }
    if (pending_sync.empty()) throw DecodeError("no hypothesis can generate the word", wi);
    std::sort(pending_sync.begin(), pending_sync.end(), better);
    if (pending_sync.size() > static_cast<std::size_t>(params.word_beam))
      pending_sync.resize(static_cast<std::size_t>(params.word_beam));
    std::vector<BeamCell> synced;
    for (const auto& p : pending_sync) synced.push_back(materialize(model, p));

    if (wi + 1 == words.size()) {
      std::vector<BeamCell> closed;
      for (BeamCell& c : synced)
        if (close_cell(model, c)) closed.push_back(std::move(c));
      if (closed.empty()) throw DecodeError("no hypothesis can be closed", wi);
      std::sort(closed.begin(), closed.end(), better_cell);
      synced = std::move(closed);
    }
    std::vector<double> scores;
    for (const auto& c : synced) scores.push_back(c.logprob);
    double now = log_sum(scores);
    result.word_logprobs.push_back(now - previous);
    previous = now;
    beam = std::move(synced);
  }
  result.total_logprob = previous;
  result.final_beam = std::move(beam);
  return result;
}

std::optional<double> exact_marginal(const Model& model, const std::vector<Word>& words, bool complete,
                                     std::size_t guard) {
  if (!model.syntactic()) throw ContractError("exact_marginal: needs a syntactic model");
  if (words.empty()) throw ContractError("exact_marginal: empty sentence");
  const int labels = model.config().nonterminals;
  std::vector<double> ends;
  std::size_t visited = 0;

  // About to generate piece `si` of word `wi`.
  auto dfs = [&](auto& self, const ModelState& s, std::size_t wi, std::size_t si) -> void {
    if (++visited > guard)
      throw ContractError("exact_marginal: search space exceeds the guard of " + std::to_string(guard));
    if (s.finished) return;
    models::NextDistribution d = model.next_distribution(s);
    if (si == 0) {
      if (d.legal.reduce && d.logprob(Action::reduce()) > kNegInf) self(self, model.advance(s, Action::reduce()), wi, 0);
      if (d.legal.nt)
        for (int l = 0; l < labels; ++l)
          if (d.logprob(Action::nt(l)) > kNegInf) self(self, model.advance(s, Action::nt(l)), wi, 0);
    }
    Action g = Action::gen(words[wi][si]);
    if (d.logprob(g) == kNegInf) return;
    ModelState next = model.advance(s, g);
    if (si + 1 < words[wi].size()) return self(self, next, wi, si + 1);
    if (wi + 1 < words.size()) return self(self, next, wi + 1, 0);
    if (!complete) {
      ends.push_back(next.logprob);
      return;
    }
    while (!next.finished) {
      if (!model.legal(next).reduce) return;
      next = model.advance(next, Action::reduce());
    }
    ends.push_back(next.logprob);
  };
  dfs(dfs, model.start(), 0, 0);
  if (ends.empty()) return std::nullopt;
  double total = log_sum(ends);
  if (total == kNegInf) return std::nullopt;
  return total;
}

std::string unit_name(Unit u) { return u == Unit::kBits ? "bits" : "nats"; }

Unit parse_unit(const std::string& name) {
  if (name == "bits") return Unit::kBits;
  if (name == "nats") return Unit::kNats;
  throw ConfigError("unknown surprisal unit '" + name + "' (bits or nats)");
}

SurprisalTable surprisals(const Model& model, const std::vector<Word>& words, const std::vector<RegionSpan>& regions,
                          const BeamParams& params, Unit unit) {
  for (const auto& r : regions)
    if (r.begin >= r.end || r.end > words.size())
      throw ContractError("surprisals: region '" + r.name + "' is outside the sentence");
  SurprisalTable t;
  t.unit = unit;
  if (model.syntactic()) {
    BeamResult b = word_sync_beam(model, words, params);
    t.word_logprobs = b.word_logprobs;
    t.total_logprob = b.total_logprob;
  } else {
    if (words.empty()) throw ContractError("surprisals: empty sentence");
    ModelState s = model.start();
    for (std::size_t wi = 0; wi < words.size(); ++wi) {
      double before = s.logprob;
      for (int piece : words[wi]) {
        try {
          s = model.advance(s, Action::gen(piece));
        } catch (const TransitionError&) {
          throw DecodeError("token cannot be generated", wi);
        }
      }
      if (wi + 1 == words.size()) s = model.advance(s, Action::gen(model.eos_id()));
      t.word_logprobs.push_back(s.logprob - before);
    }
    t.total_logprob = s.logprob;
  }
  const double scale = unit == Unit::kBits ? 1.0 / std::log(2.0) : 1.0;
  for (double lp : t.word_logprobs) t.word_surprisals.push_back(-lp * scale);
  for (const auto& r : regions) {
    double sum = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i) sum += t.word_surprisals[i];
    t.regions.push_back({r, sum});
  }
  return t;
}

Perplexity perplexity_gold(const Model& model, const std::vector<treebank::Tree>& tokenized,
                           const treebank::SubwordVocab& vocab) {
  if (tokenized.empty()) throw DataError("perplexity: empty corpus");
  Perplexity p;
  for (const auto& tree : tokenized) {
    std::vector<Action> seq;
    if (model.syntactic()) {
      seq = treebank::encode_actions(tree, vocab);
    } else {
      for (const auto* leaf : tree.leaf_nodes()) seq.push_back(Action::gen(leaf->id));
      seq.push_back(Action::gen(model.eos_id()));
    }
    p.total_logprob += model.sequence_logprob(seq);
    p.tokens += tree.leaf_count();
  }
  p.perplexity = std::exp(-p.total_logprob / static_cast<double>(p.tokens));
  return p;
}

}  // namespace cag::decoder
