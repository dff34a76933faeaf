#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "icprobe/experiments.hpp"
#include "icprobe/measures.hpp"
#include "icprobe/table.hpp"

namespace icprobe {

inline constexpr std::string_view kRecordSchema = "icprobe-records/1";

/// Fixed columns stim_id, model_id, measure, region_role, anchor_role,
/// target_role, layer, value, aux, then one column per condition key
/// (sorted). Values use six decimals; absent cells are NA.
Table records_to_table(std::span<const MeasurementRecord> records);
std::vector<MeasurementRecord> table_to_records(const Table& t);

Table preferences_to_table(std::span<const PreferenceRecord> prefs);
std::vector<PreferenceRecord> table_to_preferences(const Table& t);

Table drops_to_table(std::span<const DropRecord> drops);
std::vector<DropRecord> table_to_drops(const Table& t);

// One JSON object per record, full double precision.
void write_record_json_lines(std::ostream& out, std::span<const MeasurementRecord> records);
std::vector<MeasurementRecord> read_record_json_lines(std::istream& in, std::string_view source);

}  // namespace icprobe
