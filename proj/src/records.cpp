#include "icprobe/records.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "icprobe/error.hpp"

namespace icprobe {

namespace {

const std::vector<std::string> kRecordColumns{"stim_id",     "model_id", "measure", "region_role", "anchor_role",
                                              "target_role", "layer",    "value",   "aux"};

std::string or_missing(const std::string& s) { return s.empty() ? std::string(kMissing) : s; }
std::string from_missing(const std::string& s) { return s == kMissing ? std::string{} : s; }

double number(const std::string& cell, std::string_view col, size_t row) {
  auto v = parse_double(cell);
  if (!v) throw ValidationError("row " + std::to_string(row + 1) + ", column '" + std::string(col) + "': '" + cell + "' is not a number");
  return *v;
}

}  // namespace

Table records_to_table(std::span<const MeasurementRecord> records) {
  std::set<std::string> keys;
  for (auto& r : records) {
    for (auto& [k, v] : r.conditions) keys.insert(k);
  }
  auto cols = kRecordColumns;
  for (auto& k : keys) {
    if (std::find(cols.begin(), cols.end(), k) != cols.end()) {
      throw ValidationError("condition key '" + k + "' clashes with a record column");
    }
    cols.push_back(k);
  }
  Table t(cols);
  for (auto& r : records) {
    std::vector<std::string> row{r.stim_id,
                                 or_missing(r.model_id),
                                 std::string(to_string(r.measure)),
                                 or_missing(r.region_role),
                                 or_missing(r.anchor_role),
                                 or_missing(r.target_role),
                                 r.layer < 0 ? std::string(kMissing) : std::to_string(r.layer),
                                 format_fixed(r.value),
                                 format_fixed(r.aux)};
    for (auto& k : keys) {
      auto it = r.conditions.find(k);
      row.push_back(it == r.conditions.end() ? std::string(kMissing) : it->second);
    }
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<MeasurementRecord> table_to_records(const Table& t) {
  std::vector<size_t> fixed;
  for (auto& c : kRecordColumns) fixed.push_back(t.column(c));
  std::vector<size_t> cond_cols;
  for (size_t c = 0; c < t.columns().size(); ++c) {
    if (std::find(kRecordColumns.begin(), kRecordColumns.end(), t.columns()[c]) == kRecordColumns.end()) {
      cond_cols.push_back(c);
    }
  }
  std::vector<MeasurementRecord> out;
  out.reserve(t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    MeasurementRecord r;
    r.stim_id = t.at(i, fixed[0]);
    r.model_id = from_missing(t.at(i, fixed[1]));
    r.measure = parse_measure(t.at(i, fixed[2]));
    r.region_role = from_missing(t.at(i, fixed[3]));
    r.anchor_role = from_missing(t.at(i, fixed[4]));
    r.target_role = from_missing(t.at(i, fixed[5]));
    const auto& layer = t.at(i, fixed[6]);
    r.layer = layer == kMissing ? -1 : static_cast<int>(number(layer, "layer", i));
    r.value = number(t.at(i, fixed[7]), "value", i);
    r.aux = number(t.at(i, fixed[8]), "aux", i);
    for (size_t c : cond_cols) {
      if (t.at(i, c) != kMissing) r.conditions[t.columns()[c]] = t.at(i, c);
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

const std::vector<std::string> kPreferenceColumns{"pair_id", "model_id", "preferred", "margin"};

}  // namespace

Table preferences_to_table(std::span<const PreferenceRecord> prefs) {
  std::set<std::string> keys;
  for (auto& p : prefs) {
    for (auto& [k, v] : p.conditions) keys.insert(k);
  }
  auto cols = kPreferenceColumns;
  cols.insert(cols.end(), keys.begin(), keys.end());
  Table t(cols);
  for (auto& p : prefs) {
    std::vector<std::string> row{p.pair_id, or_missing(p.model_id), std::string(to_string(p.preferred)),
                                 format_fixed(p.margin)};
    for (auto& k : keys) {
      auto it = p.conditions.find(k);
      row.push_back(it == p.conditions.end() ? std::string(kMissing) : it->second);
    }
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<PreferenceRecord> table_to_preferences(const Table& t) {
  for (auto& c : kPreferenceColumns) t.column(c);
  std::vector<PreferenceRecord> out;
  for (size_t i = 0; i < t.size(); ++i) {
    PreferenceRecord p;
    p.pair_id = t.at(i, "pair_id");
    p.model_id = from_missing(t.at(i, "model_id"));
    p.preferred = parse_location(t.at(i, "preferred"));
    p.margin = number(t.at(i, "margin"), "margin", i);
    for (size_t c = kPreferenceColumns.size(); c < t.columns().size(); ++c) {
      if (t.at(i, c) != kMissing) p.conditions[t.columns()[c]] = t.at(i, c);
    }
    out.push_back(std::move(p));
  }
  return out;
}

Table drops_to_table(std::span<const DropRecord> drops) {
  Table t({"stim_id", "model_id", "reason"});
  for (auto& d : drops) t.add_row({d.stim_id, or_missing(d.model_id), d.reason});
  return t;
}

std::vector<DropRecord> table_to_drops(const Table& t) {
  std::vector<DropRecord> out;
  for (size_t i = 0; i < t.size(); ++i) {
    out.push_back({t.at(i, "stim_id"), t.at(i, "reason"), from_missing(t.at(i, "model_id"))});
  }
  return out;
}

void write_record_json_lines(std::ostream& out, std::span<const MeasurementRecord> records) {
  for (auto& r : records) {
    nlohmann::ordered_json j;
    j["stim_id"] = r.stim_id;
    j["model_id"] = r.model_id;
    j["measure"] = to_string(r.measure);
    j["region_role"] = r.region_role;
    j["anchor_role"] = r.anchor_role;
    j["target_role"] = r.target_role;
    j["layer"] = r.layer;
    j["value"] = r.value;
    j["aux"] = std::isnan(r.aux) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.aux);
    j["conditions"] = r.conditions;
    out << j.dump() << '\n';
  }
}

std::vector<MeasurementRecord> read_record_json_lines(std::istream& in, std::string_view source) {
  std::vector<MeasurementRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      MeasurementRecord r;
      r.stim_id = j.at("stim_id").get<std::string>();
      r.model_id = j.at("model_id").get<std::string>();
      r.measure = parse_measure(j.at("measure").get<std::string>());
      r.region_role = j.at("region_role").get<std::string>();
      r.anchor_role = j.at("anchor_role").get<std::string>();
      r.target_role = j.at("target_role").get<std::string>();
      r.layer = j.at("layer").get<int>();
      r.value = j.at("value").get<double>();
      if (!j.at("aux").is_null()) r.aux = j.at("aux").get<double>();
      r.conditions = j.at("conditions").get<ConditionMap>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(std::string(source) + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace icprobe
