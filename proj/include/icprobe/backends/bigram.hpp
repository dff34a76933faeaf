#pragma once

#include <vector>

#include "icprobe/backend.hpp"

namespace icprobe {

/// Count-based bigram model with additive smoothing `alpha` (0 gives the
/// maximum-likelihood estimate). Sentences start from an implicit boundary
/// context. A context never seen in training predicts uniformly.
///
/// One hidden layer: a word's state is the conditional distribution it
/// induces over the next word, so hidden_dim == |V|.
class BigramBackend final : public Backend {
 public:
  BigramBackend(const std::vector<std::vector<std::string>>& corpus, std::vector<std::string> extra_vocab = {},
                double alpha = 0.0);

  const BackendDescriptor& descriptor() const override { return desc_; }
  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const override { return vocab_; }

  BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const override;
  WordDistribution next_distribution(std::span<const std::string> prefix) const override;
  double joint_log2_prob(std::span<const std::string> words) const override;

  double count(std::string_view prev, std::string_view next) const;

 private:
  size_t context_of(std::span<const std::string> prefix) const;
  std::vector<double> row(size_t context) const;

  std::shared_ptr<const Vocabulary> vocab_;
  BackendDescriptor desc_;
  double alpha_;
  // counts_[context * V + next]; context V is the sentence boundary.
  std::vector<double> counts_;
  std::vector<double> context_totals_;
};

}  // namespace icprobe
