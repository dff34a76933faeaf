#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace icprobe {

/// Ordered word inventory; index order is the tie-break order for top-k.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  size_t size() const noexcept { return words_.size(); }
  const std::string& word(size_t i) const { return words_.at(i); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::optional<size_t> find(std::string_view w) const;
  bool contains(std::string_view w) const { return find(w).has_value(); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, size_t> index_;
};

struct BackendDescriptor {
  std::string name;
  std::string vocab_kind = "word";  // "word" or "subword"
  size_t vocab_size = 0;
  int n_layers = 1;
  int hidden_dim = 1;
  bool deterministic = true;
  uint64_t seed = 0;
  std::map<std::string, std::string> params;
};

/// Subword index range [first, second) for each word.
struct TokenAlignment {
  std::vector<std::pair<size_t, size_t>> word_spans;
  size_t n_subwords = 0;

  bool covers_exactly() const;
};

/// Next-word probabilities indexed by the backend's word vocabulary.
struct WordDistribution {
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<double> probs;
  // Mass of the raw next-step distribution that maps onto vocabulary words.
  double coverage = 1.0;
  // True when multi-token words are missing from `probs`.
  bool approximate = false;

  double prob(std::string_view word) const;
  double total() const;
  /// Indices of the k most probable words: probability desc, then index asc.
  std::vector<size_t> top_k(size_t k) const;
  size_t argmax() const;
};

/// Layer-major hidden states: hidden[layer][word] is a hidden_dim vector.
using HiddenStates = std::vector<std::vector<std::vector<double>>>;

struct BackendOutput {
  std::vector<double> per_word_surprisal;  // bits
  WordDistribution next_distribution;      // after the last word
  HiddenStates hidden;
  TokenAlignment alignment;
};

struct ScoreOptions {
  bool distribution = true;
  bool hidden = true;
};

/// Causal language model interface. Implementations must be safe to call
/// concurrently through a const reference.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;
  /// Word-level vocabulary that next_distribution is indexed by.
  virtual const Vocabulary& vocabulary() const = 0;
  virtual std::shared_ptr<const Vocabulary> vocabulary_ptr() const = 0;

  /// Throws OovError for words the backend cannot tokenize.
  virtual TokenAlignment align(std::span<const std::string> words) const;

  virtual BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const = 0;
  virtual WordDistribution next_distribution(std::span<const std::string> prefix) const = 0;
  /// log2 P(words) computed in one pass, independent of per-word scoring.
  virtual double joint_log2_prob(std::span<const std::string> words) const = 0;

  /// Surprisal of words[index] given words[0..index).
  virtual double surprisal_at(std::span<const std::string> words, size_t index) const;
};

/// Convert bits to nats for display.
inline double bits_to_nats(double bits) { return bits * 0.6931471805599453; }

}  // namespace icprobe
