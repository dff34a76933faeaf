#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icprobe/backend.hpp"
#include "icprobe/measures.hpp"
#include "icprobe/table.hpp"

namespace icprobe {

inline constexpr std::string_view kToolkitVersion = "0.3.0";

enum class TableFormat { tsv, json_lines };

std::string_view to_string(TableFormat f);
TableFormat parse_table_format(std::string_view s);
/// json_lines for .jsonl/.json paths, tsv otherwise.
TableFormat format_for(const std::filesystem::path& path);

/// Throws IoError when the path cannot be written.
void write_table(std::span<const MeasurementRecord> records, const std::filesystem::path& path, TableFormat format);
/// Detects the format from the file contents.
std::vector<MeasurementRecord> read_table(const std::filesystem::path& path);

void write_text_table(const Table& t, const std::filesystem::path& path, std::string_view comment = {});
Table read_text_table(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct InputFile {
  std::string path;
  std::string sha256;

  friend bool operator==(const InputFile&, const InputFile&) = default;
};

struct RunManifest {
  std::string toolkit_version{kToolkitVersion};
  std::string command;
  uint64_t seed = 0;
  std::vector<BackendDescriptor> backends;
  std::map<std::string, InputFile> inputs;
  std::map<std::string, std::string> spec;
  std::map<std::string, size_t> counts;
  std::map<std::string, size_t> drops;  // reason category -> count
  std::string created;                   // UTC, ISO 8601
};

/// Hash an input file and record it under `label`.
void add_input(RunManifest& m, const std::string& label, const std::filesystem::path& path);
/// Groups drop reasons by the text before the first ':'.
std::map<std::string, size_t> summarize_drops(std::span<const DropRecord> drops);
std::string utc_timestamp();

void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace icprobe
