#pragma once

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "icprobe/backend.hpp"
#include "icprobe/stimgen.hpp"

namespace icprobe {

enum class MeasureKind { surprisal, similarity, cloze_share };

std::string_view to_string(MeasureKind m);
MeasureKind parse_measure(std::string_view s);

struct MeasurementRecord {
  std::string stim_id;
  MeasureKind measure = MeasureKind::surprisal;
  std::string region_role;  // surprisal
  std::string anchor_role;  // similarity
  std::string target_role;  // similarity
  int layer = -1;           // similarity; -1 when not applicable
  double value = 0.0;
  // Cloze: probability mass of classified verbs in the top-k window. NaN otherwise.
  double aux = std::numeric_limits<double>::quiet_NaN();
  std::string model_id;
  ConditionMap conditions;

  friend bool operator==(const MeasurementRecord& a, const MeasurementRecord& b);
};

/// A measurement the pipeline could not take, with the reason.
struct DropRecord {
  std::string stim_id;
  std::string reason;
  std::string model_id;

  friend bool operator==(const DropRecord&, const DropRecord&) = default;
};

/// Closed-class verb inventory used to classify cloze candidates.
struct VerbFormLexicon {
  WordSet singular_forms;
  WordSet plural_forms;
  WordSet ambiguous_forms;

  enum class Class { singular, plural, ambiguous, other };
  Class classify(const std::string& word) const;
};

/// Three sections headed [singular], [plural], [ambiguous]; whitespace-separated words.
VerbFormLexicon load_verb_forms(std::istream& in);
VerbFormLexicon load_verb_forms(const std::filesystem::path& path);

/// Surprisal (bits) of the word at `role`, scored over the prefix ending at it.
MeasurementRecord surprisal_at(const Stimulus& stim, Role role, const Backend& backend);

/// Pearson correlation. Throws UsageError on length mismatch or n < 2 and
/// UndefinedMeasure when either vector is constant.
double pearson_r(std::span<const double> v, std::span<const double> w);

struct SimilarityResult {
  std::vector<MeasurementRecord> records;  // one per defined layer
  std::vector<DropRecord> drops;
};

/// Per-layer Pearson similarity between the hidden states at two regions.
SimilarityResult layer_similarity(const Stimulus& stim, Role anchor, Role target, const Backend& backend);
/// Several targets from one scoring pass.
SimilarityResult layer_similarity(const Stimulus& stim, Role anchor, std::span<const Role> targets,
                                  const Backend& backend);

struct ClozeShares {
  double singular = 0.0;  // mass(singular) / (mass(singular) + mass(plural))
  double plural = 0.0;     // 1 - singular, so the two sum to exactly 1
  double verb_mass = 0.0;  // mass(singular) + mass(plural) in the window
};

/// Shares over the k most probable next words (ties: vocabulary order).
/// Throws UndefinedMeasure when the window holds no singular or plural verb.
ClozeShares cloze_shares(const WordDistribution& dist, size_t k, const VerbFormLexicon& lexicon);

MeasurementRecord cloze_singular_share(const Stimulus& stim, const Backend& backend, size_t k,
                                       const VerbFormLexicon& lexicon);

}  // namespace icprobe
