#include "cag/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cag::eval {

namespace {

using A = Architecture;

std::string fmt(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<A>& as) {
  std::string s;
  for (A a : as) s += (s.empty() ? "" : ",") + models::architecture_name(a);
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else if (c == '&')
      out += "&amp;";
    else
      out += c;
  }
  return out;
}

void fill_deltas(ControlledReport& r) {
  r.deltas = delta_layout();
  for (Delta& d : r.deltas) {
    d.available = true;
    double plus = 0.0, minus = 0.0, var = 0.0;
    for (A a : d.plus) {
      auto it = r.cells.find(a);
      if (it == r.cells.end()) {
        d.available = false;
        break;
      }
      plus += it->second.mean;
      var += it->second.stdev * it->second.stdev;
    }
    for (A a : d.minus) {
      if (!d.available) break;
      auto it = r.cells.find(a);
      if (it == r.cells.end()) {
        d.available = false;
        break;
      }
      minus += it->second.mean;
      var += it->second.stdev * it->second.stdev;
    }
    if (!d.available) continue;
    d.mean = plus / static_cast<double>(d.plus.size()) - minus / static_cast<double>(d.minus.size());
    d.stdev = std::sqrt(var);
  }
}

}  // namespace

std::string Delta::label() const { return join(plus) + " - " + join(minus); }

const std::vector<Delta>& delta_layout() {
  static const std::vector<Delta> layout = [] {
    auto d = [](std::string c, std::vector<A> p, std::vector<A> m) {
      Delta x;
      x.contrast = std::move(c);
      x.plus = std::move(p);
      x.minus = std::move(m);
      return x;
    };
    return std::vector<Delta>{
        d("syn", {A::kActionLstm, A::kRnng}, {A::kLstm}),
        d("syn", {A::kPlm, A::kPlmMask}, {A::kTransformer}),
        d("syn", {A::kPlm, A::kCag}, {A::kTransformer}),
        d("comp", {A::kRnng}, {A::kActionLstm}),
        d("comp", {A::kPlmMask}, {A::kPlm}),
        d("comp", {A::kCag}, {A::kPlm}),
        d("attn", {A::kTransformer}, {A::kLstm}),
        d("attn", {A::kPlm}, {A::kActionLstm}),
        d("attn", {A::kPlmMask}, {A::kRnng}),
        d("attn", {A::kCag}, {A::kRnng}),
    };
  }();
  return layout;
}

ControlledReport controlled_report(const std::map<std::pair<Architecture, int>, double>& accuracy_by_seed) {
  std::map<A, std::vector<double>> by_arch;
  for (const auto& [key, acc] : accuracy_by_seed) by_arch[key.first].push_back(acc);
  std::vector<CellStats> cells;
  for (const auto& [a, xs] : by_arch) {
    CellStats c;
    c.architecture = a;
    c.seeds = xs.size();
    for (double x : xs) c.mean += x;
    c.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - c.mean) * (x - c.mean);
      c.stdev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    c.single_seed = xs.size() == 1;
    cells.push_back(c);
  }
  return controlled_report_from_stats(cells);
}

ControlledReport controlled_report_from_stats(const std::vector<CellStats>& cells) {
  ControlledReport r;
  for (const auto& c : cells) r.cells[c.architecture] = c;
  fill_deltas(r);
  return r;
}

void write_report_csv(std::ostream& out, const ControlledReport& r) {
  out << "kind,name,contrast,mean,stdev,seeds,note\n";
  for (A a : models::kAllArchitectures) {
    auto it = r.cells.find(a);
    if (it == r.cells.end()) continue;
    const CellStats& c = it->second;
    out << "cell," << models::architecture_name(a) << ",," << fmt(c.mean) << ',' << fmt(c.stdev) << ',' << c.seeds << ','
        << (c.single_seed ? "single_seed" : "") << '\n';
  }
  for (const Delta& d : r.deltas) {
    out << "delta,\"" << d.label() << "\"," << d.contrast << ',';
    if (d.available)
      out << fmt(d.mean) << ',' << fmt(d.stdev) << ",,\n";
    else
      out << ",,,unavailable\n";
  }
}

std::string accuracy_bar_svg(const ControlledReport& r) {
  std::vector<const CellStats*> cells;
  for (A a : models::kAllArchitectures)
    if (auto it = r.cells.find(a); it != r.cells.end()) cells.push_back(&it->second);
  const int bar = 60, gap = 20, left = 60, top = 30, plot_h = 240;
  const int width = left + static_cast<int>(cells.size()) * (bar + gap) + gap;
  const int height = top + plot_h + 60;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">Accuracy by architecture</text>\n";
  auto y_of = [&](double acc) { return top + plot_h * (1.0 - std::clamp(acc, 0.0, 1.0)); };
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - gap << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double v = tick / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << fmt(y_of(v) + 4, 1)
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(v, 2) << "</text>\n";
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellStats& c = *cells[i];
    double x = left + gap + static_cast<double>(i) * (bar + gap);
    double y = y_of(c.mean);
    s << "<rect class=\"bar\" x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y, 1) << "\" width=\"" << bar << "\" height=\""
      << fmt(top + plot_h - y, 1) << "\" fill=\"#4c72b0\"/>\n";
    if (c.stdev > 0) {
      double cx = x + bar / 2.0;
      s << "<line x1=\"" << fmt(cx, 1) << "\" y1=\"" << fmt(y_of(c.mean - c.stdev), 1) << "\" x2=\"" << fmt(cx, 1)
        << "\" y2=\"" << fmt(y_of(c.mean + c.stdev), 1) << "\" stroke=\"black\"/>\n";
    }
    s << "<text x=\"" << fmt(x + bar / 2.0, 1) << "\" y=\"" << top + plot_h + 16
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
      << escape(models::architecture_name(c.architecture)) << "</text>\n";
    s << "<text x=\"" << fmt(x + bar / 2.0, 1) << "\" y=\"" << fmt(y - 4, 1)
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << fmt(100 * c.mean, 1) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string accuracy_perplexity_svg(const std::vector<std::pair<std::string, std::pair<double, double>>>& points) {
  const int left = 60, top = 30, w = 360, h = 240;
  double lo = 0.0, hi = 1.0;
  if (!points.empty()) {
    lo = hi = points.front().second.first;
    for (const auto& p : points) {
      lo = std::min(lo, p.second.first);
      hi = std::max(hi, p.second.first);
    }
    if (hi - lo < 1e-9) {
      lo -= 1.0;
      hi += 1.0;
    }
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  auto x_of = [&](double ppl) { return left + w * (ppl - lo) / (hi - lo); };
  auto y_of = [&](double acc) { return top + h * (1.0 - std::clamp(acc, 0.0, 1.0)); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + w + 120 << "\" height=\"" << top + h + 50 << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">Accuracy vs perplexity</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + h << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + h << "\" x2=\"" << left + w << "\" y2=\"" << top + h
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left + w / 2 << "\" y=\"" << top + h + 36
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">perplexity</text>\n";
  s << "<text x=\"" << left << "\" y=\"" << top + h + 16 << "\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(lo, 1)
    << "</text>\n";
  s << "<text x=\"" << left + w << "\" y=\"" << top + h + 16
    << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(hi, 1) << "</text>\n";
  for (const auto& [label, xy] : points) {
    double x = x_of(xy.first), y = y_of(xy.second);
    s << "<circle class=\"point\" cx=\"" << fmt(x, 1) << "\" cy=\"" << fmt(y, 1) << "\" r=\"4\" fill=\"#dd8452\"/>\n";
    s << "<text x=\"" << fmt(x + 6, 1) << "\" y=\"" << fmt(y + 4, 1) << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << escape(label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace cag::eval
