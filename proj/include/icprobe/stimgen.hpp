#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icprobe/lexicon.hpp"

namespace icprobe {

inline constexpr std::string_view kGeneratorVersion = "icprobe-stimgen/1";

enum class StimulusKind { referential, completion, rc_reading };

enum class Role {
  subject_noun,
  object_noun,
  main_verb,
  pronoun,
  higher_noun,
  lower_noun,
  relativizer,
  rc_verb,
};

enum class GenderCondition { mismatch, match };
enum class Gender { male, female };

std::string_view to_string(StimulusKind k);
std::string_view to_string(Role r);
std::string_view to_string(GenderCondition c);
std::string_view to_string(Gender g);
StimulusKind parse_stimulus_kind(std::string_view s);
Role parse_role(std::string_view s);
GenderCondition parse_gender_condition(std::string_view s);
Gender parse_gender(std::string_view s);

using ConditionMap = std::map<std::string, std::string>;

struct Stimulus {
  std::string stim_id;
  StimulusKind kind = StimulusKind::referential;
  std::vector<std::string> words;
  std::map<Role, size_t> regions;
  ConditionMap conditions;

  std::optional<size_t> region(Role r) const;
  const std::string& condition(const std::string& key) const;
  std::string text() const { return join_words(words); }

  friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

struct StimulusSet {
  StimulusKind kind = StimulusKind::referential;
  std::vector<Stimulus> stimuli;
  std::map<std::string, std::string> provenance;
};

/// "the X VERBED the Y because" frames. Mismatch pairs the two members of a
/// noun pair; match pairs a noun with the same-gender member of the preceding
/// pair (cyclically). Count is |norms| x |pairs| x 2 subject genders.
StimulusSet gen_referential(std::span<const VerbNorm> norms, std::span<const NounPair> pairs,
                            GenderCondition condition);

/// Appends "she"/"he" to a referential frame and labels its antecedent.
Stimulus append_pronoun(const Stimulus& stim, Gender pronoun_gender);

/// "SUBJ VERB the HIGHER of the LOWER who", items x {ic, nonic} x 4 number configurations.
StimulusSet gen_completion(std::span<const RCItem> items);

/// Completion frames followed by "was"/"were"; items x 2 x 4 x 2.
StimulusSet gen_rc_reading(std::span<const RCItem> items);

/// Words of every stimulus, for building backend vocabularies.
WordSet stimulus_vocabulary(std::span<const StimulusSet> sets);

// Line-delimited JSON, one stimulus per line, field order
// stim_id, kind, words, regions, conditions.
void write_stimuli(std::ostream& out, const StimulusSet& set);
StimulusSet read_stimuli(std::istream& in);

}  // namespace icprobe
