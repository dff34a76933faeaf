#pragma once

#include "icprobe/backend.hpp"

namespace icprobe {

/// Uniform model over a subword piece inventory. Word-initial pieces are
/// plain strings; continuation pieces carry the "##" marker. Words are split
/// into the fewest pieces. A word's surprisal is the sum of its pieces'
/// surprisals and its hidden state is the state at its final piece.
///
/// next_distribution covers only words that are a single word-initial
/// piece; it is marked approximate and `coverage` is the raw mass on them.
class SubwordBackend final : public Backend {
 public:
  static constexpr std::string_view kContinuation = "##";

  explicit SubwordBackend(std::vector<std::string> pieces, int n_layers = 2, int hidden_dim = 16, uint64_t seed = 0);

  const BackendDescriptor& descriptor() const override { return desc_; }
  const Vocabulary& vocabulary() const override { return *words_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const override { return words_; }
  const Vocabulary& pieces() const { return pieces_; }

  std::vector<std::string> tokenize(std::string_view word) const;
  TokenAlignment align(std::span<const std::string> words) const override;
  BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const override;
  WordDistribution next_distribution(std::span<const std::string> prefix) const override;
  double joint_log2_prob(std::span<const std::string> words) const override;

 private:
  Vocabulary pieces_;
  std::shared_ptr<const Vocabulary> words_;
  BackendDescriptor desc_;
};

}  // namespace icprobe
