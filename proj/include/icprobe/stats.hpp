#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icprobe/table.hpp"

namespace icprobe {

inline constexpr double kDefaultAlpha = 0.005;
inline constexpr double kMarginalAlpha = 0.05;

enum class Coding { sum, continuous };

std::string_view to_string(Coding c);
Coding parse_coding(std::string_view s);

struct FactorSpec {
  std::string column;
  Coding coding = Coding::sum;
};

struct ModelSpec {
  std::string response = "value";
  std::vector<FactorSpec> factors;
  int interaction_order = 1;
  bool item_effects = false;
  std::string item_column = "item";
  double threshold = kDefaultAlpha;
  bool bonferroni = false;
};

struct StatResult {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

/// Two-sided p-value of a t statistic.
double t_two_sided_p(double t, double df);

/// Ordinary least squares with sum-coded categorical factors (the first level
/// in sorted order is +1, the last -1), centered continuous factors, all
/// interactions up to the requested order and, optionally, sum-coded item
/// indicator columns. Item terms are fitted but not reported.
/// Throws ValidationError on missing columns and on a rank-deficient design,
/// naming the aliased terms.
std::vector<StatResult> fit_linear(const Table& table, const ModelSpec& spec);

/// Welch (unpaired) or paired t-test of mean(b) - mean(a).
/// Throws UsageError on too few values and DegenerateTest on zero variance.
StatResult posthoc_ttest(std::span<const double> a, std::span<const double> b, bool paired,
                         double threshold = kDefaultAlpha);

/// p < threshold.
bool significance(double p, double threshold = kDefaultAlpha);
/// "significant", "marginal" (threshold <= p < 0.05) or "ns".
std::string_view significance_label(double p, double threshold = kDefaultAlpha);

/// Multiplies p-values by the number of tests (capped at 1) and recomputes significance.
void apply_bonferroni(std::vector<StatResult>& results, double threshold = kDefaultAlpha);

struct CellSummary {
  std::vector<std::string> key;  // one value per group column
  size_t n = 0;
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * sd / sqrt(n); NaN when n < 2
};

struct SummaryResult {
  std::vector<std::string> group_by;
  std::vector<CellSummary> cells;  // sorted by key
  std::vector<std::string> log;
};

/// Per-cell mean and normal-approximation 95% half-width. Rows with a
/// missing value are skipped and logged.
SummaryResult condition_summary(const Table& table, const std::vector<std::string>& group_by,
                                std::string_view value_column = "value");

Table to_table(const SummaryResult& s);
Table to_table(std::span<const StatResult> results, double threshold = kDefaultAlpha);

}  // namespace icprobe
