#pragma once

#include <filesystem>
#include <vector>

#include "icprobe/backend.hpp"

namespace icprobe {

struct TinyLmConfig {
  int embed_dim = 24;
  int hidden_dim = 32;
  int n_layers = 2;
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 0.01;
  double init_scale = 0.1;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  size_t max_vocab = 20000;
};

struct TrainingLog {
  double initial_perplexity = 0.0;
  std::vector<double> epoch_perplexity;  // training-set perplexity after each epoch
};

/// Word-level multi-layer LSTM language model, trained single-threaded with
/// Adam so that results depend only on (corpus, config).
class TinyLstmBackend final : public Backend {
 public:
  using Corpus = std::vector<std::vector<std::string>>;

  /// Words in `extra_vocab` are added to the output vocabulary even if the
  /// corpus never contains them.
  static std::unique_ptr<TinyLstmBackend> train(const Corpus& corpus, const std::vector<std::string>& extra_vocab,
                                                const TinyLmConfig& config, TrainingLog* log = nullptr);
  static std::unique_ptr<TinyLstmBackend> load(const std::filesystem::path& checkpoint);
  void save(const std::filesystem::path& checkpoint) const;

  const BackendDescriptor& descriptor() const override { return desc_; }
  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const override { return vocab_; }

  BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const override;
  WordDistribution next_distribution(std::span<const std::string> prefix) const override;
  double joint_log2_prob(std::span<const std::string> words) const override;

  double perplexity(const Corpus& corpus) const;
  const TinyLmConfig& config() const { return config_; }
  const std::vector<double>& parameters() const { return params_; }

  struct Layout;

 private:
  TinyLstmBackend(std::vector<std::string> vocab, TinyLmConfig config);
  std::vector<size_t> indices(std::span<const std::string> words) const;

  std::shared_ptr<const Vocabulary> vocab_;
  TinyLmConfig config_;
  BackendDescriptor desc_;
  std::vector<double> params_;
};

/// Descriptor-level entry point: trains with the descriptor's layer count, width and seed.
std::unique_ptr<TinyLstmBackend> train_tiny_lm(const TinyLstmBackend::Corpus& corpus,
                                               const BackendDescriptor& descriptor,
                                               const std::vector<std::string>& extra_vocab = {},
                                               TrainingLog* log = nullptr);

std::vector<std::vector<std::string>> load_corpus(const std::filesystem::path& path);

}  // namespace icprobe
