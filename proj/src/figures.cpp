#include "icprobe/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "icprobe/error.hpp"
#include "icprobe/records.hpp"
#include "icprobe/report.hpp"
#include "icprobe/stats.hpp"

namespace icprobe {

namespace {

constexpr FigureKind kAllKinds[] = {FigureKind::pronoun_surprisal, FigureKind::pronoun_similarity,
                                    FigureKind::rc_similarity_who, FigureKind::rc_surprisal,
                                    FigureKind::rc_similarity_verb};

}  // namespace

std::string_view to_string(FigureKind k) {
  switch (k) {
    case FigureKind::pronoun_surprisal: return "pronoun_surprisal";
    case FigureKind::pronoun_similarity: return "pronoun_similarity";
    case FigureKind::rc_similarity_who: return "rc_similarity_who";
    case FigureKind::rc_surprisal: return "rc_surprisal";
    case FigureKind::rc_similarity_verb: return "rc_similarity_verb";
  }
  return "?";
}

FigureKind parse_figure_kind(std::string_view s) {
  for (auto k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  std::string list;
  for (auto k : kAllKinds) list += (list.empty() ? "" : ", ") + std::string(to_string(k));
  throw ValidationError("unknown figure kind '" + std::string(s) + "' (expected one of " + list + ")");
}

FigureLayout figure_layout(FigureKind k) {
  FigureLayout l;
  switch (k) {
    case FigureKind::pronoun_surprisal:
      l.filters = {{"measure", {"surprisal"}}, {"region_role", {"pronoun"}}, {"antecedent", {"subject", "object"}}};
      l.category = {"antecedent", "pronoun_gender"};
      l.series = {"bias_category"};
      l.y_label = "surprisal (bits)";
      break;
    case FigureKind::pronoun_similarity:
      l.filters = {{"measure", {"similarity"}}, {"anchor_role", {"pronoun"}}};
      l.x = "layer";
      l.series = {"target_role", "bias_category"};
      l.y_label = "similarity (Pearson r)";
      l.lines = true;
      break;
    case FigureKind::rc_similarity_who:
      l.filters = {{"measure", {"similarity"}}, {"anchor_role", {"relativizer"}}};
      l.x = "layer";
      l.series = {"target_role", "verb_type"};
      l.y_label = "similarity (Pearson r)";
      l.lines = true;
      break;
    case FigureKind::rc_surprisal:
      l.filters = {{"measure", {"surprisal"}}, {"region_role", {"rc_verb"}}, {"agreement_location", {"higher", "lower"}}};
      l.category = {"agreement_location"};
      l.series = {"verb_type"};
      l.y_label = "surprisal (bits)";
      break;
    case FigureKind::rc_similarity_verb:
      l.filters = {{"measure", {"similarity"}}, {"anchor_role", {"rc_verb"}}, {"agreement_location", {"higher", "lower"}}};
      l.panel = {"agreement_location"};
      l.x = "layer";
      l.series = {"target_role", "verb_type"};
      l.y_label = "similarity (Pearson r)";
      l.lines = true;
      break;
  }
  return l;
}

namespace {

std::vector<std::string> group_columns(const FigureLayout& l, const std::string& facet) {
  std::vector<std::string> g{facet};
  g.insert(g.end(), l.panel.begin(), l.panel.end());
  if (!l.x.empty()) g.push_back(l.x);
  g.insert(g.end(), l.category.begin(), l.category.end());
  g.insert(g.end(), l.series.begin(), l.series.end());
  return g;
}

void require(const Table& t, const std::string& col, FigureKind kind) {
  if (!t.find_column(col)) {
    throw ValidationError(std::string(to_string(kind)) + ": input table lacks required column '" + col + "'");
  }
}

}  // namespace

Table aggregate_figure(const Table& records, FigureKind kind, const std::string& facet, int layer_stride) {
  if (layer_stride < 1) throw ValidationError("layer_stride must be >= 1");
  const auto layout = figure_layout(kind);
  for (auto& [col, values] : layout.filters) require(records, col, kind);
  const auto groups = group_columns(layout, facet);
  for (auto& g : groups) require(records, g, kind);
  require(records, "value", kind);

  Table t = records;
  for (auto& [col, values] : layout.filters) t = t.filter(col, std::set<std::string>(values.begin(), values.end()));
  if (layout.x == "layer" && layer_stride > 1) {
    std::set<std::string> keep;
    for (size_t i = 0; i < t.size(); ++i) {
      auto v = parse_double(t.at(i, "layer"));
      if (v && !std::isnan(*v) && static_cast<long>(*v) % layer_stride == 0) keep.insert(t.at(i, "layer"));
    }
    t = t.filter("layer", keep);
  }
  if (t.empty()) throw ValidationError(std::string(to_string(kind)) + ": no rows match the figure's selection");
  auto summary = condition_summary(t, groups);
  // Layers sort numerically, not as text.
  if (layout.x == "layer") {
    const size_t li = 1 + layout.panel.size();
    auto prefix = [&](const CellSummary& c) { return std::vector(c.key.begin(), c.key.begin() + static_cast<long>(li)); };
    auto suffix = [&](const CellSummary& c) { return std::vector(c.key.begin() + static_cast<long>(li) + 1, c.key.end()); };
    std::stable_sort(summary.cells.begin(), summary.cells.end(), [&](const CellSummary& a, const CellSummary& b) {
      const auto pa = prefix(a), pb = prefix(b);
      if (pa != pb) return pa < pb;
      const long la = std::stol(a.key[li]), lb = std::stol(b.key[li]);
      if (la != lb) return la < lb;
      return suffix(a) < suffix(b);
    });
  }
  return to_table(summary);
}

namespace {

std::string fmt(double v, int decimals = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s.rfind("-0.", 0) == 0 && std::stod(s) == 0.0) s.erase(0, 1);
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string join_cells(const std::vector<std::string>& row, const std::vector<size_t>& cols) {
  std::string s;
  for (size_t c : cols) s += (s.empty() ? "" : " / ") + row[c];
  return s;
}

struct Point {
  std::string x;
  double mean;
  double half;
};

}  // namespace

std::string render_svg(const Table& agg, FigureKind kind, const std::string& facet) {
  const auto layout = figure_layout(kind);
  const size_t c_facet = agg.column(facet);
  std::vector<size_t> c_panel, c_cat, c_series;
  for (auto& p : layout.panel) c_panel.push_back(agg.column(p));
  for (auto& p : layout.category) c_cat.push_back(agg.column(p));
  if (!layout.x.empty()) c_cat.push_back(agg.column(layout.x));
  for (auto& p : layout.series) c_series.push_back(agg.column(p));
  const size_t c_mean = agg.column("mean");
  const size_t c_half = agg.column("half_width");

  // subplot -> series -> points, in table order.
  std::vector<std::string> subplot_order, series_order;
  std::map<std::string, std::vector<std::string>> x_order;
  std::map<std::string, std::map<std::string, std::vector<Point>>> data;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (size_t i = 0; i < agg.size(); ++i) {
    const auto& row = agg.row(i);
    std::string sub = row[c_facet];
    if (!c_panel.empty()) sub += " | " + join_cells(row, c_panel);
    const std::string ser = join_cells(row, c_series);
    const std::string x = join_cells(row, c_cat);
    if (std::find(subplot_order.begin(), subplot_order.end(), sub) == subplot_order.end()) subplot_order.push_back(sub);
    if (std::find(series_order.begin(), series_order.end(), ser) == series_order.end()) series_order.push_back(ser);
    auto& xs = x_order[sub];
    if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    const double mean = *parse_double(row[c_mean]);
    double half = *parse_double(row[c_half]);
    if (std::isnan(half)) half = 0.0;
    data[sub][ser].push_back({x, mean, half});
    const double a = mean - half, b = mean + half;
    if (first) {
      lo = a;
      hi = b;
      first = false;
    }
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  if (!layout.lines) lo = std::min(lo, 0.0);
  if (hi - lo < 1e-9) {
    hi += 0.5;
    lo -= 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  std::string x_label = layout.x;
  for (auto& c : layout.category) x_label += (x_label.empty() ? "" : " / ") + c;

  const double W = 640, H = 300, ml = 70, mr = 190, mt = 40, mb = 60;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const double total_h = H * static_cast<double>(std::max<size_t>(subplot_order.size(), 1));
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W, 0) << "\" height=\"" << fmt(total_h, 0)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto ypos = [&](double v, double top) { return top + mt + ph * (hi - v) / (hi - lo); };

  for (size_t si = 0; si < subplot_order.size(); ++si) {
    const std::string& sub = subplot_order[si];
    const double top = H * static_cast<double>(si);
    const auto& xs = x_order[sub];
    s << "<g>\n<text x=\"" << fmt(ml) << "\" y=\"" << fmt(top + 20) << "\" font-size=\"13\">"
      << escape(std::string(to_string(kind)) + ": " + sub) << "</text>\n";
    s << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(top + mt) << "\" x2=\"" << fmt(ml) << "\" y2=\""
      << fmt(top + mt + ph) << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(top + mt + ph) << "\" x2=\"" << fmt(ml + pw) << "\" y2=\""
      << fmt(top + mt + ph) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = lo + (hi - lo) * t / 4.0;
      s << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(ypos(v, top) + 4) << "\" text-anchor=\"end\">" << fmt(v)
        << "</text>\n";
    }
    s << "<text transform=\"translate(" << fmt(18) << "," << fmt(top + mt + ph / 2) << ") rotate(-90)\" "
      << "text-anchor=\"middle\">" << escape(layout.y_label) << "</text>\n";
    s << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(top + H - 12) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
    const double slot = pw / static_cast<double>(std::max<size_t>(xs.size(), 1));
    auto xcenter = [&](size_t xi) { return ml + slot * (static_cast<double>(xi) + 0.5); };
    for (size_t xi = 0; xi < xs.size(); ++xi) {
      s << "<text x=\"" << fmt(xcenter(xi)) << "\" y=\"" << fmt(top + mt + ph + 16) << "\" text-anchor=\"middle\">"
        << escape(xs[xi]) << "</text>\n";
    }
    const auto& by_series = data[sub];
    const double bw = slot * 0.8 / static_cast<double>(std::max<size_t>(series_order.size(), 1));
    for (size_t k = 0; k < series_order.size(); ++k) {
      auto it = by_series.find(series_order[k]);
      if (it == by_series.end()) continue;
      const char* color = kPalette[k % std::size(kPalette)];
      std::string poly;
      for (auto& p : it->second) {
        const size_t xi = static_cast<size_t>(std::find(xs.begin(), xs.end(), p.x) - xs.begin());
        double cx = xcenter(xi);
        if (layout.lines) {
          poly += (poly.empty() ? "" : " ") + fmt(cx) + "," + fmt(ypos(p.mean, top));
        } else {
          cx = ml + slot * static_cast<double>(xi) + slot * 0.1 + bw * (static_cast<double>(k) + 0.5);
          const double y0 = ypos(0.0, top), y1 = ypos(p.mean, top);
          s << "<rect x=\"" << fmt(cx - bw / 2) << "\" y=\"" << fmt(std::min(y0, y1)) << "\" width=\"" << fmt(bw)
            << "\" height=\"" << fmt(std::abs(y1 - y0)) << "\" fill=\"" << color << "\"/>\n";
        }
        if (p.half > 0.0) {
          s << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(ypos(p.mean - p.half, top)) << "\" x2=\"" << fmt(cx)
            << "\" y2=\"" << fmt(ypos(p.mean + p.half, top)) << "\" stroke=\"black\"/>\n";
        }
      }
      if (layout.lines) {
        s << "<polyline points=\"" << poly << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      }
      const double ly = top + mt + 14.0 * static_cast<double>(k);
      s << "<rect x=\"" << fmt(ml + pw + 12) << "\" y=\"" << fmt(ly) << "\" width=\"10\" height=\"10\" fill=\"" << color
        << "\"/>\n<text x=\"" << fmt(ml + pw + 26) << "\" y=\"" << fmt(ly + 9) << "\">" << escape(series_order[k])
        << "</text>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

FigureOutput emit_figure(const FigureSpec& spec) {
  auto records = read_table(spec.input);
  auto agg = aggregate_figure(records_to_table(records), spec.kind, spec.facet, spec.layer_stride);
  FigureOutput out{spec.output, spec.output};
  out.table.replace_extension(".tsv");
  write_text_table(agg, out.table, "figure " + std::string(to_string(spec.kind)));
  const auto svg = render_svg(agg, spec.kind, spec.facet);
  if (spec.output.has_parent_path()) std::filesystem::create_directories(spec.output.parent_path());
  std::ofstream img(spec.output, std::ios::binary);
  if (!img) throw IoError("cannot write " + spec.output.string());
  img << svg;
  if (!(img << std::flush)) throw IoError("error writing " + spec.output.string());
  return out;
}

}  // namespace icprobe
