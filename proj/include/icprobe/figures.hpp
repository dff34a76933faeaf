#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "icprobe/table.hpp"

namespace icprobe {

enum class FigureKind { pronoun_surprisal, pronoun_similarity, rc_similarity_who, rc_surprisal, rc_similarity_verb };

std::string_view to_string(FigureKind k);
/// Throws ValidationError on an unknown name.
FigureKind parse_figure_kind(std::string_view s);

struct FigureSpec {
  FigureKind kind = FigureKind::pronoun_surprisal;
  std::filesystem::path input;
  std::filesystem::path output;  // .svg; the aggregated table goes next to it as .tsv
  std::string facet = "model_id";
  int layer_stride = 1;  // keep layers 0, s, 2s, ...
};

/// Columns of the aggregated table before n/mean/half_width: facet, panel
/// (if any), x axis (layer or category), series.
struct FigureLayout {
  std::vector<std::pair<std::string, std::vector<std::string>>> filters;
  std::vector<std::string> panel;
  std::string x;  // "layer" for line plots
  std::vector<std::string> category;
  std::vector<std::string> series;
  std::string y_label;
  bool lines = false;
};

FigureLayout figure_layout(FigureKind k);

/// Filters a record table and summarizes it per figure cell.
/// Throws ValidationError naming the first missing column.
Table aggregate_figure(const Table& records, FigureKind kind, const std::string& facet = "model_id",
                       int layer_stride = 1);

/// SVG drawing of an aggregated table; uses nothing but the table.
std::string render_svg(const Table& aggregated, FigureKind kind, const std::string& facet = "model_id");

struct FigureOutput {
  std::filesystem::path image;
  std::filesystem::path table;
};

FigureOutput emit_figure(const FigureSpec& spec);

}  // namespace icprobe
