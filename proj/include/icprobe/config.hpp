#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace icprobe {

/// Flat INI configuration: [section] headers, key = value lines, ';' comments.
class Config {
 public:
  using Section = std::map<std::string, std::string>;

  static Config parse(std::istream& in, const std::string& source);
  static Config load(const std::filesystem::path& path);

  bool has_section(const std::string& name) const { return sections_.contains(name); }
  /// Empty section when absent.
  const Section& section(const std::string& name) const;
  void set(const std::string& section, const std::string& key, std::string value);
  const std::map<std::string, Section>& sections() const noexcept { return sections_; }

  /// Throws ValidationError for keys of `section` not in `allowed`.
  void check_keys(const std::string& section, const std::vector<std::string>& allowed) const;

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key, std::string fallback) const;

 private:
  std::map<std::string, Section> sections_;
};

bool parse_bool(const std::string& s);
std::vector<std::string> split_list(const std::string& s, char sep = ',');

}  // namespace icprobe
