#pragma once

#include "icprobe/backend.hpp"

namespace icprobe {

/// Every word has probability 1/|V| in every context. Hidden states are
/// context-free hashed embeddings of each word.
class UniformBackend final : public Backend {
 public:
  UniformBackend(std::vector<std::string> vocab, int n_layers = 2, int hidden_dim = 16, uint64_t seed = 0);

  const BackendDescriptor& descriptor() const override { return desc_; }
  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const override { return vocab_; }

  BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const override;
  WordDistribution next_distribution(std::span<const std::string> prefix) const override;
  double joint_log2_prob(std::span<const std::string> words) const override;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  BackendDescriptor desc_;
};

}  // namespace icprobe
