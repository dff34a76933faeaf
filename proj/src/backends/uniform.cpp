#include "icprobe/backends/uniform.hpp"

#include <cmath>

#include "icprobe/error.hpp"
#include "icprobe/hashing.hpp"

namespace icprobe {

UniformBackend::UniformBackend(std::vector<std::string> vocab, int n_layers, int hidden_dim, uint64_t seed)
    : vocab_(std::make_shared<Vocabulary>(std::move(vocab))) {
  if (vocab_->size() == 0) throw UsageError("uniform backend needs a nonempty vocabulary");
  if (n_layers < 1 || hidden_dim < 1) throw UsageError("uniform backend: n_layers and hidden_dim must be >= 1");
  desc_.name = "uniform";
  desc_.vocab_size = vocab_->size();
  desc_.n_layers = n_layers;
  desc_.hidden_dim = hidden_dim;
  desc_.seed = seed;
}

BackendOutput UniformBackend::score(std::span<const std::string> words, const ScoreOptions& opts) const {
  if (words.empty()) throw UsageError("score: empty word sequence");
  BackendOutput out;
  out.alignment = align(words);
  out.per_word_surprisal.assign(words.size(), std::log2(static_cast<double>(vocab_->size())));
  if (opts.distribution) out.next_distribution = next_distribution(words);
  if (opts.hidden) {
    out.hidden.resize(static_cast<size_t>(desc_.n_layers));
    for (int l = 0; l < desc_.n_layers; ++l) {
      for (const auto& w : words) {
        out.hidden[static_cast<size_t>(l)].push_back(
            hash_normal_vector(mix(mix(desc_.seed, fnv1a64(w)), static_cast<uint64_t>(l)), desc_.hidden_dim));
      }
    }
  }
  return out;
}

WordDistribution UniformBackend::next_distribution(std::span<const std::string> prefix) const {
  align(prefix);
  WordDistribution d;
  d.vocab = vocab_;
  d.probs.assign(vocab_->size(), 1.0 / static_cast<double>(vocab_->size()));
  return d;
}

double UniformBackend::joint_log2_prob(std::span<const std::string> words) const {
  align(words);
  return -static_cast<double>(words.size()) * std::log2(static_cast<double>(vocab_->size()));
}

}  // namespace icprobe
