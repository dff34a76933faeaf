#include "icprobe/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <fstream>

#include "icprobe/error.hpp"

namespace icprobe {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  Config cfg;
  for (auto& [name, node] : tree) {
    if (node.empty()) throw ValidationError(source + ": key '" + name + "' outside any section");
    auto& sec = cfg.sections_[name];
    for (auto& [key, value] : node) sec[key] = trim(value.data());
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse(in, path.string());
}

const Config::Section& Config::section(const std::string& name) const {
  static const Section empty;
  auto it = sections_.find(name);
  return it == sections_.end() ? empty : it->second;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
  sections_[section][key] = std::move(value);
}

void Config::check_keys(const std::string& section, const std::vector<std::string>& allowed) const {
  for (auto& [key, value] : this->section(section)) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ValidationError("[" + section + "]: unknown key '" + key + "' (known: " + list + ")");
    }
  }
}

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
  auto& sec = this->section(section);
  auto it = sec.find(key);
  if (it == sec.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& section, const std::string& key, std::string fallback) const {
  auto v = get(section, key);
  return v ? *v : std::move(fallback);
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ValidationError("'" + s + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(sep, start);
    if (end == std::string::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

}  // namespace icprobe
