#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "icprobe/lexicon.hpp"

namespace testing {

inline std::filesystem::path tmp_dir(const std::string& name) {
  auto p = std::filesystem::path(ICPROBE_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const icprobe::Lexicons& bundled() {
  static const auto lex = icprobe::load_lexicons(icprobe::LexiconPaths::bundled());
  return lex;
}

}  // namespace testing
