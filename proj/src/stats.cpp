#include "icprobe/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "icprobe/error.hpp"

namespace icprobe {

std::string_view to_string(Coding c) { return c == Coding::sum ? "sum" : "continuous"; }

Coding parse_coding(std::string_view s) {
  if (s == "sum" || s == "categorical") return Coding::sum;
  if (s == "continuous") return Coding::continuous;
  throw ValidationError("unknown coding '" + std::string(s) + "' (expected sum or continuous)");
}

double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw UsageError("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw UsageError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

bool significance(double p, double threshold) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("p-value outside [0, 1]");
  return p < threshold;
}

std::string_view significance_label(double p, double threshold) {
  if (significance(p, threshold)) return "significant";
  if (p < kMarginalAlpha) return "marginal";
  return "ns";
}

void apply_bonferroni(std::vector<StatResult>& results, double threshold) {
  const double m = static_cast<double>(results.size());
  for (auto& r : results) {
    r.p_value = std::min(1.0, r.p_value * m);
    r.significant = significance(r.p_value, threshold);
  }
}

namespace {

struct Block {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
};

Block code_factor(const std::vector<std::string>& cells, const FactorSpec& f) {
  Block b;
  const size_t n = cells.size();
  if (f.coding == Coding::continuous) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = *parse_double(cells[i]);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    for (auto& v : x) v -= mean;
    b.names.push_back(f.column);
    b.cols.push_back(std::move(x));
    return b;
  }
  std::set<std::string> level_set(cells.begin(), cells.end());
  std::vector<std::string> levels(level_set.begin(), level_set.end());
  if (levels.size() < 2) throw ValidationError("factor '" + f.column + "' has a single level");
  for (size_t j = 0; j + 1 < levels.size(); ++j) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = cells[i] == levels[j] ? 1.0 : (cells[i] == levels.back() ? -1.0 : 0.0);
    }
    b.names.push_back(f.column + "[" + levels[j] + "]");
    b.cols.push_back(std::move(x));
  }
  return b;
}

Block product(const Block& a, const Block& b) {
  Block out;
  for (size_t i = 0; i < a.cols.size(); ++i) {
    for (size_t j = 0; j < b.cols.size(); ++j) {
      std::vector<double> x(a.cols[i].size());
      for (size_t r = 0; r < x.size(); ++r) x[r] = a.cols[i][r] * b.cols[j][r];
      out.names.push_back(a.names[i] + ":" + b.names[j]);
      out.cols.push_back(std::move(x));
    }
  }
  return out;
}

void combinations(size_t n, size_t k, size_t start, std::vector<size_t>& cur, std::vector<std::vector<size_t>>& out) {
  if (cur.size() == k) {
    out.push_back(cur);
    return;
  }
  for (size_t i = start; i < n; ++i) {
    cur.push_back(i);
    combinations(n, k, i + 1, cur, out);
    cur.pop_back();
  }
}

std::vector<std::string> aliased_terms(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  std::vector<std::string> aliased;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    Eigen::MatrixXd sub(X.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
    for (size_t k = 0; k < kept.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = X.col(kept[k]);
    sub.col(sub.cols() - 1) = X.col(c);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    if (qr.rank() == sub.cols()) kept.push_back(c);
    else aliased.push_back(names[static_cast<size_t>(c)]);
  }
  return aliased;
}

}  // namespace

std::vector<StatResult> fit_linear(const Table& table, const ModelSpec& spec) {
  if (table.empty()) throw UsageError("fit_linear: empty table");
  if (spec.factors.empty()) throw UsageError("fit_linear: no factors");
  if (spec.interaction_order < 1 || static_cast<size_t>(spec.interaction_order) > spec.factors.size()) {
    throw ValidationError("fit_linear: interaction order must be between 1 and the number of factors");
  }
  const size_t ycol = table.column(spec.response);
  std::vector<size_t> fcols;
  for (auto& f : spec.factors) fcols.push_back(table.column(f.column));
  std::optional<size_t> icol;
  if (spec.item_effects) icol = table.column(spec.item_column);

  // Rows with a missing or non-numeric response or continuous factor are skipped.
  std::vector<size_t> rows;
  for (size_t r = 0; r < table.size(); ++r) {
    auto y = parse_double(table.at(r, ycol));
    if (!y || std::isnan(*y)) continue;
    bool ok = true;
    for (size_t k = 0; k < fcols.size() && ok; ++k) {
      const auto& cell = table.at(r, fcols[k]);
      if (cell == kMissing) ok = false;
      if (spec.factors[k].coding == Coding::continuous) {
        auto v = parse_double(cell);
        ok = ok && v && std::isfinite(*v);
      }
    }
    if (ok) rows.push_back(r);
  }
  const size_t n = rows.size();
  if (n == 0) throw UsageError("fit_linear: no usable rows");

  auto cells_of = [&](size_t col) {
    std::vector<std::string> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = table.at(rows[i], col);
    return out;
  };

  std::vector<Block> mains;
  for (size_t k = 0; k < fcols.size(); ++k) mains.push_back(code_factor(cells_of(fcols[k]), spec.factors[k]));

  std::vector<std::string> names{"(Intercept)"};
  std::vector<std::vector<double>> cols{std::vector<double>(n, 1.0)};
  auto add = [&](const Block& b) {
    names.insert(names.end(), b.names.begin(), b.names.end());
    cols.insert(cols.end(), b.cols.begin(), b.cols.end());
  };
  for (auto& b : mains) add(b);
  for (int k = 2; k <= spec.interaction_order; ++k) {
    std::vector<std::vector<size_t>> combos;
    std::vector<size_t> cur;
    combinations(mains.size(), static_cast<size_t>(k), 0, cur, combos);
    for (auto& c : combos) {
      Block b = mains[c[0]];
      for (size_t i = 1; i < c.size(); ++i) b = product(b, mains[c[i]]);
      add(b);
    }
  }
  const size_t n_reported = names.size();
  if (icol) add(code_factor(cells_of(*icol), FactorSpec{spec.item_column, Coding::sum}));

  const auto p = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (size_t r = 0; r < n; ++r) X(static_cast<Eigen::Index>(r), c) = cols[static_cast<size_t>(c)][r];
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (size_t r = 0; r < n; ++r) y(static_cast<Eigen::Index>(r)) = *parse_double(table.at(rows[r], ycol));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    auto aliased = aliased_terms(X, names);
    std::string list;
    for (auto& a : aliased) list += (list.empty() ? "" : ", ") + a;
    throw ValidationError("fit_linear: rank-deficient design; aliased terms: " + list);
  }
  if (static_cast<Eigen::Index>(n) <= p) {
    throw UsageError("fit_linear: " + std::to_string(n) + " rows cannot support " + std::to_string(p) + " parameters");
  }
  const double df = static_cast<double>(static_cast<Eigen::Index>(n) - p);

  std::vector<StatResult> results;
  const double ymin = y.minCoeff(), ymax = y.maxCoeff();
  if (ymin == ymax) {
    for (size_t c = 0; c < n_reported; ++c) {
      StatResult s;
      s.term = names[c];
      s.estimate = c == 0 ? ymin : 0.0;
      s.std_error = 0.0;
      s.t_value = c == 0 && ymin != 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), ymin) : 0.0;
      s.df = df;
      s.p_value = std::isinf(s.t_value) ? 0.0 : 1.0;
      s.significant = significance(s.p_value, spec.threshold);
      results.push_back(std::move(s));
    }
  } else {
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;
    const double sigma2 = resid.squaredNorm() / df;
    // (X'X)^-1 = P R^-1 R^-T P'
    Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd inner = Rinv * Rinv.transpose();
    Eigen::MatrixXd cov = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
    for (size_t c = 0; c < n_reported; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      StatResult s;
      s.term = names[c];
      s.estimate = beta(ci);
      s.std_error = std::sqrt(std::max(0.0, sigma2 * cov(ci, ci)));
      s.df = df;
      if (s.std_error > 0.0) s.t_value = s.estimate / s.std_error;
      else s.t_value = s.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), s.estimate);
      s.p_value = t_two_sided_p(s.t_value, df);
      s.significant = significance(s.p_value, spec.threshold);
      results.push_back(std::move(s));
    }
  }
  if (spec.bonferroni) apply_bonferroni(results, spec.threshold);
  return results;
}

namespace {

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_var(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

StatResult posthoc_ttest(std::span<const double> a, std::span<const double> b, bool paired, double threshold) {
  if (a.size() < 2 || b.size() < 2) throw UsageError("t-test: each group needs at least two values");
  StatResult s;
  s.term = "B-A";
  if (paired) {
    if (a.size() != b.size()) throw UsageError("paired t-test: groups differ in length");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = b[i] - a[i];
    const double md = mean_of(d);
    const double var = sample_var(d, md);
    if (!(var > 0.0)) throw DegenerateTest("paired t-test: differences have zero variance");
    s.estimate = md;
    s.std_error = std::sqrt(var / static_cast<double>(d.size()));
    s.df = static_cast<double>(d.size() - 1);
  } else {
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = sample_var(a, ma) / static_cast<double>(a.size());
    const double vb = sample_var(b, mb) / static_cast<double>(b.size());
    if (!(va + vb > 0.0)) throw DegenerateTest("Welch t-test: both groups have zero variance");
    s.estimate = mb - ma;
    s.std_error = std::sqrt(va + vb);
    s.df = (va + vb) * (va + vb) /
           (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  }
  s.t_value = s.estimate / s.std_error;
  s.p_value = t_two_sided_p(s.t_value, s.df);
  s.significant = significance(s.p_value, threshold);
  return s;
}

SummaryResult condition_summary(const Table& table, const std::vector<std::string>& group_by,
                                std::string_view value_column) {
  std::vector<size_t> gcols;
  for (auto& g : group_by) gcols.push_back(table.column(g));
  const size_t vcol = table.column(value_column);

  SummaryResult out;
  out.group_by = group_by;
  std::map<std::vector<std::string>, std::vector<double>> cells;
  for (size_t r = 0; r < table.size(); ++r) {
    std::vector<std::string> key;
    for (size_t c : gcols) key.push_back(table.at(r, c));
    auto& values = cells[key];
    auto v = parse_double(table.at(r, vcol));
    if (!v || std::isnan(*v)) {
      out.log.push_back("row " + std::to_string(r + 1) + ": missing " + std::string(value_column) + "; skipped");
      continue;
    }
    values.push_back(*v);
  }
  for (auto& [key, values] : cells) {
    if (values.empty()) {
      std::string k;
      for (auto& part : key) k += (k.empty() ? "" : "/") + part;
      out.log.push_back("cell " + k + " is empty; omitted");
      continue;
    }
    CellSummary c;
    c.key = key;
    c.n = values.size();
    c.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(c.n);
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (c.n < 2) c.half_width = std::numeric_limits<double>::quiet_NaN();
    else if (*lo == *hi) c.half_width = 0.0;
    else c.half_width = 1.959963984540054 * std::sqrt(sample_var(values, c.mean) / static_cast<double>(c.n));
    out.cells.push_back(std::move(c));
  }
  return out;
}

Table to_table(const SummaryResult& s) {
  auto cols = s.group_by;
  cols.insert(cols.end(), {"n", "mean", "half_width"});
  Table t(cols);
  for (auto& c : s.cells) {
    auto row = c.key;
    row.push_back(std::to_string(c.n));
    row.push_back(format_fixed(c.mean));
    row.push_back(format_fixed(c.half_width));
    t.add_row(std::move(row));
  }
  return t;
}

Table to_table(std::span<const StatResult> results, double threshold) {
  Table t({"term", "estimate", "std_error", "t_value", "df", "p_value", "significant", "label"});
  for (auto& r : results) {
    char p[32];
    std::snprintf(p, sizeof p, "%.6g", r.p_value);
    t.add_row({r.term, format_fixed(r.estimate), format_fixed(r.std_error), format_fixed(r.t_value),
               format_fixed(r.df), p, r.significant ? "yes" : "no",
               std::string(significance_label(r.p_value, threshold))});
  }
  return t;
}

}  // namespace icprobe
