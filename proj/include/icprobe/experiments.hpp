#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icprobe/backend.hpp"
#include "icprobe/backends/registry.hpp"
#include "icprobe/lexicon.hpp"
#include "icprobe/measures.hpp"
#include "icprobe/stimgen.hpp"

namespace icprobe {

enum class Experiment { E1_ref_behavior, E2_ref_representation, E3_syn_behavior, E4_syn_representation };

std::string_view to_string(Experiment e);
/// Accepts the full names and the short forms E1..E4.
Experiment parse_experiment(std::string_view s);

enum class ExecutionPolicy { serial, parallel };

/// Outcome of one was/were minimal pair on the disambiguating subset.
struct PreferenceRecord {
  enum class Location { higher, lower, tie };

  std::string pair_id;
  std::string model_id;
  Location preferred = Location::tie;
  double margin = 0.0;  // |surprisal(lower-agreeing) - surprisal(higher-agreeing)|, bits
  ConditionMap conditions;

  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

std::string_view to_string(PreferenceRecord::Location l);
PreferenceRecord::Location parse_location(std::string_view s);

struct ExperimentOptions {
  size_t cloze_k = 100;
  VerbFormLexicon verb_forms;
  ExecutionPolicy policy = ExecutionPolicy::parallel;
  std::string model_id;
};

struct ExperimentResult {
  std::vector<MeasurementRecord> records;
  std::vector<PreferenceRecord> preferences;
  std::vector<DropRecord> drops;
  size_t expected = 0;
  std::map<std::string, double> summary;

  void append(ExperimentResult other);
};

/// Surprisal at the pronoun for both pronoun genders of every mismatch frame.
ExperimentResult run_E1(const StimulusSet& referential, const Backend& backend, const ExperimentOptions& opts);

/// Pronoun-to-subject and pronoun-to-object similarity per layer; the
/// appended pronoun matches the (shared) gender of both nouns.
ExperimentResult run_E2(const StimulusSet& referential, const Backend& backend, const ExperimentOptions& opts);

/// Cloze singular share per completion prompt, surprisal at the RC verb per
/// reading stimulus and per-pair attachment preferences.
ExperimentResult run_E3(const StimulusSet& completion, const StimulusSet& reading, const Backend& backend,
                        const ExperimentOptions& opts);

/// Similarity of {relativizer, rc_verb} to {higher_noun, lower_noun} per
/// layer. Completion sets only have the relativizer anchor.
ExperimentResult run_E4(const StimulusSet& rc_set, const Backend& backend, const ExperimentOptions& opts);

/// Percentage of pairs preferring the higher noun; ties count half.
double higher_preference_percent(std::span<const PreferenceRecord> prefs);

struct ExperimentSpec {
  Experiment experiment = Experiment::E1_ref_behavior;
  std::string backend = "planted";
  BackendParams backend_params;
  LexiconPaths lexicons = LexiconPaths::bundled();
  std::filesystem::path verb_forms;
  size_t cloze_k = 100;
  std::filesystem::path output;
  std::vector<uint64_t> seeds{1};
  StimulusKind e4_stimuli = StimulusKind::rc_reading;
  ExecutionPolicy policy = ExecutionPolicy::parallel;
};

/// Generates the experiment's stimuli, builds one backend per seed, runs and
/// stacks the tables with model_id "<backend>-s<seed>".
ExperimentResult run_experiment(const ExperimentSpec& spec, const Lexicons& lex,
                                std::vector<BackendDescriptor>* descriptors = nullptr);

}  // namespace icprobe
