#include "icprobe/report.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "icprobe/error.hpp"
#include "icprobe/records.hpp"

namespace icprobe {

using ojson = nlohmann::ordered_json;

std::string_view to_string(TableFormat f) { return f == TableFormat::tsv ? "tsv" : "json_lines"; }

TableFormat parse_table_format(std::string_view s) {
  if (s == "tsv") return TableFormat::tsv;
  if (s == "json_lines" || s == "jsonl") return TableFormat::json_lines;
  throw ValidationError("unknown table format '" + std::string(s) + "'");
}

TableFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  return ext == ".jsonl" || ext == ".json" ? TableFormat::json_lines : TableFormat::tsv;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace

void write_table(std::span<const MeasurementRecord> records, const std::filesystem::path& path, TableFormat format) {
  auto out = open_out(path);
  if (format == TableFormat::tsv) write_tsv(out, records_to_table(records), kRecordSchema);
  else write_record_json_lines(out, records);
  close_checked(out, path);
}

std::vector<MeasurementRecord> read_table(const std::filesystem::path& path) {
  auto in = open_in(path);
  const int first = in.peek();
  if (first == '{') return read_record_json_lines(in, path.string());
  if (first == std::char_traits<char>::eof()) return {};
  std::vector<std::string> comments;
  auto t = read_tsv(in, path.string(), &comments);
  if (comments.empty() || comments.front() != kRecordSchema) {
    throw LoadError(path.string() + ": not a record table (missing '# " + std::string(kRecordSchema) + "' line)");
  }
  return table_to_records(t);
}

void write_text_table(const Table& t, const std::filesystem::path& path, std::string_view comment) {
  auto out = open_out(path);
  write_tsv(out, t, comment);
  close_checked(out, path);
}

Table read_text_table(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tsv(in, path.string());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void add_input(RunManifest& m, const std::string& label, const std::filesystem::path& path) {
  m.inputs[label] = InputFile{path.string(), sha256_file(path)};
}

std::map<std::string, size_t> summarize_drops(std::span<const DropRecord> drops) {
  std::map<std::string, size_t> out;
  for (auto& d : drops) ++out[d.reason.substr(0, d.reason.find(':'))];
  return out;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  ojson j;
  j["toolkit_version"] = m.toolkit_version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["backends"] = ojson::array();
  for (auto& b : m.backends) {
    ojson d;
    d["name"] = b.name;
    d["vocab_kind"] = b.vocab_kind;
    d["vocab_size"] = b.vocab_size;
    d["n_layers"] = b.n_layers;
    d["hidden_dim"] = b.hidden_dim;
    d["deterministic"] = b.deterministic;
    d["seed"] = b.seed;
    d["params"] = b.params;
    j["backends"].push_back(std::move(d));
  }
  j["inputs"] = ojson::object();
  for (auto& [label, f] : m.inputs) j["inputs"][label] = {{"path", f.path}, {"sha256", f.sha256}};
  j["spec"] = m.spec;
  j["counts"] = m.counts;
  j["drops"] = m.drops;
  j["created"] = m.created;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  close_checked(out, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    auto j = nlohmann::json::parse(in);
    RunManifest m;
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    for (auto& d : j.at("backends")) {
      BackendDescriptor b;
      b.name = d.at("name").get<std::string>();
      b.vocab_kind = d.at("vocab_kind").get<std::string>();
      b.vocab_size = d.at("vocab_size").get<size_t>();
      b.n_layers = d.at("n_layers").get<int>();
      b.hidden_dim = d.at("hidden_dim").get<int>();
      b.deterministic = d.at("deterministic").get<bool>();
      b.seed = d.at("seed").get<uint64_t>();
      b.params = d.at("params").get<std::map<std::string, std::string>>();
      m.backends.push_back(std::move(b));
    }
    for (auto& [label, f] : j.at("inputs").items()) {
      m.inputs[label] = InputFile{f.at("path").get<std::string>(), f.at("sha256").get<std::string>()};
    }
    m.spec = j.at("spec").get<std::map<std::string, std::string>>();
    m.counts = j.at("counts").get<std::map<std::string, size_t>>();
    m.drops = j.at("drops").get<std::map<std::string, size_t>>();
    m.created = j.at("created").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace icprobe
