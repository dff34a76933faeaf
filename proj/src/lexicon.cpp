#include "icprobe/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <utility>

#include "icprobe/error.hpp"

namespace icprobe {
namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_lower_token(std::string_view w) {
  if (w.empty()) return false;
  return std::all_of(w.begin(), w.end(), [](unsigned char c) {
    return !std::isspace(c) && !std::isupper(c);
  });
}

std::string row_context(std::string_view source, size_t line, std::string_view column) {
  std::string s{source};
  s += ": row ";
  s += std::to_string(line);
  if (!column.empty()) {
    s += ", column '";
    s += column;
    s += "'";
  }
  return s;
}

// Reads the data lines of a tabular resource, checking the header.
struct TableReader {
  std::istream& in;
  std::string_view source;
  size_t line_no = 0;

  void expect_header(std::span<const std::string_view> header) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto cols = split_tabs(line);
      if (cols.size() != header.size() || !std::equal(cols.begin(), cols.end(), header.begin())) {
        std::string want;
        for (auto h : header) {
          if (!want.empty()) want += "<TAB>";
          want += h;
        }
        throw LoadError(row_context(source, line_no, "") + ": expected header " + want);
      }
      return;
    }
    throw LoadError(std::string{source} + ": missing header");
  }

  // Next data row, or false at end of input.
  bool next(std::vector<std::string>& cols) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      cols = split_tabs(line);
      return true;
    }
    return false;
  }
};

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view to_string(BiasCategory c) {
  switch (c) {
    case BiasCategory::subject_biased: return "subject_biased";
    case BiasCategory::object_biased: return "object_biased";
    case BiasCategory::excluded: return "excluded";
  }
  return "excluded";
}

BiasCategory categorize_bias(double score) {
  if (score > 0) return BiasCategory::subject_biased;
  if (score < 0) return BiasCategory::object_biased;
  return BiasCategory::excluded;
}

std::vector<VerbNorm> load_verb_norms(std::istream& in, std::string_view source_name) {
  static constexpr std::string_view header[] = {"lemma", "past", "bias"};
  TableReader reader{in, source_name};
  reader.expect_header(header);

  std::vector<VerbNorm> norms;
  std::set<std::string, std::less<>> seen;
  std::vector<std::string> cols;
  while (reader.next(cols)) {
    if (cols.size() != 3) {
      throw LoadError(row_context(source_name, reader.line_no, "") + ": expected 3 columns, got " +
                      std::to_string(cols.size()));
    }
    if (!is_lower_token(cols[0])) {
      throw LoadError(row_context(source_name, reader.line_no, "lemma") + ": not a lowercase single token");
    }
    if (!is_lower_token(cols[1])) {
      throw LoadError(row_context(source_name, reader.line_no, "past") + ": not a lowercase single token");
    }
    double score = 0.0;
    const auto& s = cols[2];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      throw LoadError(row_context(source_name, reader.line_no, "bias") + ": not a number: '" + s + "'");
    }
    if (!(score >= -100.0 && score <= 100.0)) {
      throw LoadError(row_context(source_name, reader.line_no, "bias") + ": score " + s +
                      " outside [-100, 100]");
    }
    if (!seen.insert(cols[0]).second) {
      throw LoadError(row_context(source_name, reader.line_no, "lemma") + ": duplicate lemma '" + cols[0] + "'");
    }
    norms.push_back(VerbNorm{cols[0], cols[1], score, categorize_bias(score)});
  }
  return norms;
}

std::vector<VerbNorm> load_verb_norms(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_verb_norms(in, path.string());
}

void write_verb_norms(std::ostream& out, std::span<const VerbNorm> norms) {
  out << "lemma\tpast\tbias\n";
  char buf[64];
  for (const auto& n : norms) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, n.bias_score);
    out << n.lemma << '\t' << n.past_form << '\t' << std::string_view(buf, end - buf) << '\n';
  }
}

VocabFilter filter_by_vocabulary(std::span<const VerbNorm> norms, const WordSet& vocab) {
  VocabFilter result;
  for (const auto& n : norms) {
    (vocab.contains(n.past_form) ? result.kept : result.dropped).push_back(n);
  }
  return result;
}

std::vector<NounPair> load_noun_pairs(std::istream& in, std::string_view source_name) {
  static constexpr std::string_view header[] = {"male", "female"};
  TableReader reader{in, source_name};
  reader.expect_header(header);

  std::vector<NounPair> pairs;
  std::vector<std::string> cols;
  while (reader.next(cols)) {
    if (cols.size() != 2) {
      throw LoadError(row_context(source_name, reader.line_no, "") + ": expected 2 columns");
    }
    if (!is_lower_token(cols[0])) {
      throw LoadError(row_context(source_name, reader.line_no, "male") + ": empty or malformed form");
    }
    if (!is_lower_token(cols[1])) {
      throw LoadError(row_context(source_name, reader.line_no, "female") + ": empty or malformed form");
    }
    if (cols[0] == cols[1]) {
      throw LoadError(row_context(source_name, reader.line_no, "") + ": male and female forms are identical");
    }
    NounPair pair{cols[0], cols[1]};
    if (std::find(pairs.begin(), pairs.end(), pair) != pairs.end()) {
      throw LoadError(row_context(source_name, reader.line_no, "") + ": duplicate pair " + cols[0] + "/" +
                      cols[1]);
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<NounPair> load_noun_pairs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_noun_pairs(in, path.string());
}

void write_noun_pairs(std::ostream& out, std::span<const NounPair> pairs) {
  out << "male\tfemale\n";
  for (const auto& p : pairs) out << p.male_form << '\t' << p.female_form << '\n';
}

namespace {
constexpr std::string_view kRcHeader[] = {"item_id",  "subject",   "ic_verb",  "nonic_verb",
                                          "higher_sg", "higher_pl", "lower_sg", "lower_pl"};
}

std::vector<RCItem> load_rc_items(std::istream& in, std::string_view source_name) {
  TableReader reader{in, source_name};
  reader.expect_header(kRcHeader);

  std::vector<RCItem> items;
  std::set<int> ids;
  std::vector<std::string> cols;
  while (reader.next(cols)) {
    if (cols.size() < std::size(kRcHeader)) {
      throw LoadError(row_context(source_name, reader.line_no, kRcHeader[cols.size()]) + ": missing field");
    }
    if (cols.size() > std::size(kRcHeader)) {
      throw LoadError(row_context(source_name, reader.line_no, "") + ": too many columns");
    }
    for (size_t c = 1; c < cols.size(); ++c) {
      auto words = split_words(cols[c]);
      if (words.empty() || join_words(words) != cols[c]) {
        throw LoadError(row_context(source_name, reader.line_no, kRcHeader[c]) +
                        ": empty or irregularly spaced field");
      }
      if (!std::all_of(words.begin(), words.end(), [](const std::string& w) { return is_lower_token(w); })) {
        throw LoadError(row_context(source_name, reader.line_no, kRcHeader[c]) + ": words must be lowercase");
      }
    }
    RCItem item;
    auto [ptr, ec] = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), item.item_id);
    if (ec != std::errc{} || ptr != cols[0].data() + cols[0].size()) {
      throw LoadError(row_context(source_name, reader.line_no, "item_id") + ": not an integer");
    }
    if (!ids.insert(item.item_id).second) {
      throw LoadError(row_context(source_name, reader.line_no, "item_id") + ": duplicate item id");
    }
    item.subject_np = split_words(cols[1]);
    item.ic_verb = split_words(cols[2]);
    item.nonic_verb = split_words(cols[3]);
    item.higher = {cols[4], cols[5]};
    item.lower = {cols[6], cols[7]};
    for (int c : {4, 6}) {
      if (split_words(cols[c]).size() != 1 || split_words(cols[c + 1]).size() != 1) {
        throw LoadError(row_context(source_name, reader.line_no, kRcHeader[c]) + ": nouns must be single words");
      }
    }
    if (item.higher.singular == item.higher.plural) {
      throw LoadError(row_context(source_name, reader.line_no, "higher_pl") + ": plural equals singular");
    }
    if (item.lower.singular == item.lower.plural) {
      throw LoadError(row_context(source_name, reader.line_no, "lower_pl") + ": plural equals singular");
    }
    if (item.ic_verb == item.nonic_verb) {
      throw LoadError(row_context(source_name, reader.line_no, "nonic_verb") + ": same as ic_verb");
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<RCItem> load_rc_items(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_rc_items(in, path.string());
}

void write_rc_items(std::ostream& out, std::span<const RCItem> items) {
  for (size_t c = 0; c < std::size(kRcHeader); ++c) out << (c ? "\t" : "") << kRcHeader[c];
  out << '\n';
  for (const auto& it : items) {
    out << it.item_id << '\t' << join_words(it.subject_np) << '\t' << join_words(it.ic_verb) << '\t'
        << join_words(it.nonic_verb) << '\t' << it.higher.singular << '\t' << it.higher.plural << '\t'
        << it.lower.singular << '\t' << it.lower.plural << '\n';
  }
}

WordSet load_word_list(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  WordSet words;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (auto& w : split_words(line)) words.insert(std::move(w));
  }
  return words;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("ICPROBE_DATA"); env && *env) return env;
  return ICPROBE_DATA_DIR;
}

LexiconPaths LexiconPaths::bundled() {
  auto d = data_dir();
  return {d / "verb_norms.tsv", d / "noun_pairs.tsv", d / "rc_completion.tsv", d / "rc_reading.tsv",
          d / "reference_vocab.txt"};
}

Lexicons load_lexicons(const LexiconPaths& paths) {
  Lexicons lex;
  auto norms = load_verb_norms(paths.norms);
  if (paths.vocab.empty()) {
    lex.norms = std::move(norms);
  } else {
    auto filtered = filter_by_vocabulary(norms, load_word_list(paths.vocab));
    lex.norms = std::move(filtered.kept);
    lex.norms_dropped = std::move(filtered.dropped);
  }
  lex.pairs = load_noun_pairs(paths.pairs);
  lex.completion_items = load_rc_items(paths.completion);
  lex.reading_items = load_rc_items(paths.reading);
  return lex;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_words(std::span<const std::string> words, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

}  // namespace icprobe
