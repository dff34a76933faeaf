#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace icprobe {

enum class BiasCategory { subject_biased, object_biased, excluded };

std::string_view to_string(BiasCategory c);

// Positive scores are subject-biased, negative object-biased, zero excluded.
BiasCategory categorize_bias(double score);

struct VerbNorm {
  std::string lemma;
  std::string past_form;
  double bias_score = 0.0;
  BiasCategory bias_category = BiasCategory::excluded;

  friend bool operator==(const VerbNorm&, const VerbNorm&) = default;
};

struct NounPair {
  std::string male_form;
  std::string female_form;

  friend bool operator==(const NounPair&, const NounPair&) = default;
};

struct NounForms {
  std::string singular;
  std::string plural;

  friend bool operator==(const NounForms&, const NounForms&) = default;
};

/// One relative-clause attachment item: "SUBJ VERB the HIGHER of the LOWER who".
struct RCItem {
  int item_id = 0;
  std::vector<std::string> subject_np;
  std::vector<std::string> ic_verb;
  std::vector<std::string> nonic_verb;
  NounForms higher;
  NounForms lower;

  friend bool operator==(const RCItem&, const RCItem&) = default;
};

using WordSet = std::unordered_set<std::string>;

// Verb norms: TSV with header `lemma<TAB>past<TAB>bias`. Lines starting with
// '#' and blank lines are skipped. `source_name` appears in error messages.
std::vector<VerbNorm> load_verb_norms(std::istream& in, std::string_view source_name = "<stream>");
std::vector<VerbNorm> load_verb_norms(const std::filesystem::path& path);
void write_verb_norms(std::ostream& out, std::span<const VerbNorm> norms);

struct VocabFilter {
  std::vector<VerbNorm> kept;
  std::vector<VerbNorm> dropped;
};

/// Partition norms by whether their past-tense surface form is in `vocab`.
VocabFilter filter_by_vocabulary(std::span<const VerbNorm> norms, const WordSet& vocab);

std::vector<NounPair> load_noun_pairs(std::istream& in, std::string_view source_name = "<stream>");
std::vector<NounPair> load_noun_pairs(const std::filesystem::path& path);
void write_noun_pairs(std::ostream& out, std::span<const NounPair> pairs);

// RC items: TSV with header
//   item_id subject ic_verb nonic_verb higher_sg higher_pl lower_sg lower_pl
// multiword fields are space-separated inside their column.
std::vector<RCItem> load_rc_items(std::istream& in, std::string_view source_name = "<stream>");
std::vector<RCItem> load_rc_items(const std::filesystem::path& path);
void write_rc_items(std::ostream& out, std::span<const RCItem> items);

/// One word per line; '#' comments and blank lines ignored.
WordSet load_word_list(const std::filesystem::path& path);

/// Bundled resource directory (ICPROBE_DATA env var overrides the build-time path).
std::filesystem::path data_dir();

struct Lexicons {
  std::vector<VerbNorm> norms;  // already vocabulary-filtered
  std::vector<VerbNorm> norms_dropped;
  std::vector<NounPair> pairs;
  std::vector<RCItem> completion_items;
  std::vector<RCItem> reading_items;
};

struct LexiconPaths {
  std::filesystem::path norms;
  std::filesystem::path pairs;
  std::filesystem::path completion;
  std::filesystem::path reading;
  std::filesystem::path vocab;  // empty: no vocabulary filtering

  static LexiconPaths bundled();
};

Lexicons load_lexicons(const LexiconPaths& paths);

std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words, std::string_view sep = " ");

}  // namespace icprobe
