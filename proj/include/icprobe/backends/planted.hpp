#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "icprobe/backend.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {

using WordProbs = std::vector<std::pair<std::string, double>>;

/// Fires on a prefix and returns explicit next-word probabilities; words it
/// does not list share the remaining mass uniformly.
struct PlantRule {
  std::string name;
  std::function<std::optional<WordProbs>(std::span<const std::string> prefix)> next;
};

/// The hidden state of words[position] is a weighted sum of the prototypes of
/// earlier (or the same) positions, plus noise.
struct Mixture {
  std::vector<std::pair<size_t, double>> components;
  std::optional<double> noise;  // overrides the backend-wide noise scale
};

struct RepresentationRule {
  std::string name;
  std::function<std::optional<Mixture>(std::span<const std::string> words, size_t position, int layer)> mix;
};

struct PlantedConfig {
  std::vector<std::string> vocab;
  int n_layers = 4;
  int hidden_dim = 64;
  uint64_t seed = 0;
  // Standard deviation of the additive hidden-state noise (prototypes have unit variance).
  double noise = 0.3;
  // Each explicit probability p becomes p * 2^(-jitter_bits * z), z ~ N(0,1)
  // seeded by (seed, prefix, word). Zero keeps rules exact.
  double jitter_bits = 0.0;
};

/// Synthetic backend whose behaviour and representations follow explicit
/// rules. The first rule that fires on a prefix decides its distribution; if
/// none fires, the distribution is uniform. Rules whose explicit mass
/// exceeds one are rejected when evaluated.
class PlantedBackend final : public Backend {
 public:
  PlantedBackend(PlantedConfig config, std::vector<PlantRule> rules, std::vector<RepresentationRule> reps = {});

  const BackendDescriptor& descriptor() const override { return desc_; }
  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const override { return vocab_; }

  BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const override;
  WordDistribution next_distribution(std::span<const std::string> prefix) const override;
  double joint_log2_prob(std::span<const std::string> words) const override;
  double surprisal_at(std::span<const std::string> words, size_t index) const override;

  double prob(std::span<const std::string> prefix, std::string_view word) const;
  const std::vector<double>& prototype(std::string_view word, int layer) const;

 private:
  struct Resolved {
    std::vector<std::pair<size_t, double>> explicit_probs;
    double rest_each = 0.0;
  };
  Resolved resolve(std::span<const std::string> prefix) const;
  HiddenStates hidden(std::span<const std::string> words) const;

  std::shared_ptr<const Vocabulary> vocab_;
  BackendDescriptor desc_;
  PlantedConfig config_;
  std::vector<PlantRule> rules_;
  std::vector<RepresentationRule> reps_;
  std::vector<std::vector<std::vector<double>>> prototypes_;  // [word][layer]
};

/// Preset effects used by the experiment drivers and acceptance tests.
struct PlantedDesign {
  enum class Attachment { none, local, ic };

  // Referential: the pronoun naming the favoured antecedent gets p_favored,
  // the other p_other. Favoured = subject for subject-biased verbs, object for
  // object-biased. Without ic_reference both pronouns get the mean.
  bool ic_reference = true;
  double p_favored = 0.4;
  double p_other = 0.2;

  // Relative clauses: after "... who" the verbs agreeing with the favoured
  // noun's number get attachment_ratio times the mass of the others.
  // local: lower noun; ic: higher noun after IC verbs, lower after non-IC.
  Attachment attachment = Attachment::ic;
  double rc_mass = 0.4;
  double attachment_ratio = 2.0;

  // Representations: pronoun / "who" = rep_weight * favoured + (1 - rep_weight) * other.
  bool ic_representation = true;
  // RC verb = rep_weight * agreeing noun + (1 - rep_weight) * other.
  bool agreement_representation = true;
  double rep_weight = 0.8;
  // Layer at which the anchor equals its favoured prototype exactly (noise-free); -1 for none.
  int exact_layer = -1;

  PlantedConfig base;

  static PlantedDesign null_design();
};

/// Builds a planted backend over the stimulus vocabulary of `lex` with the
/// given preset effects. `extra_vocab` adds words (e.g. a verb-form lexicon).
std::unique_ptr<PlantedBackend> make_planted_backend(const PlantedDesign& design, const Lexicons& lex,
                                                     const WordSet& extra_vocab = {});

/// Generic factory: validates the config and wires the rules.
std::unique_ptr<PlantedBackend> make_planted_backend(PlantedConfig config, std::vector<PlantRule> rules,
                                                     std::vector<RepresentationRule> reps = {});

}  // namespace icprobe
