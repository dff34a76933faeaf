#pragma once

#include <filesystem>
#include <map>

#include "icprobe/backend.hpp"

namespace icprobe {

/// Adapter for external (e.g. pretrained transformer) models whose outputs
/// were dumped to a JSON-lines cache, one object per scored word sequence:
///
///   {"words": [...], "tokens": [...], "word_spans": [[b, e], ...],
///    "token_surprisal": [...bits per token...],
///    "hidden": [[[...dim...] per token] per layer],        (optional)
///    "next": {"word": prob, ...}}                           (optional)
///
/// Queries may be any prefix of a cached sequence. Words are scored as the
/// sum of their tokens' surprisals and read the hidden state of their last
/// token. Mass missing from "next" goes to the reserved word "<other>".
class PrecomputedBackend final : public Backend {
 public:
  static constexpr std::string_view kOther = "<other>";
  static constexpr std::string_view kCacheEnv = "ICPROBE_MODEL_CACHE";

  explicit PrecomputedBackend(const std::filesystem::path& jsonl, std::string name = {});
  /// Resolves `<cache dir>/<model>.jsonl` with the cache dir taken from ICPROBE_MODEL_CACHE.
  static std::unique_ptr<PrecomputedBackend> from_cache(const std::string& model);

  const BackendDescriptor& descriptor() const override { return desc_; }
  const Vocabulary& vocabulary() const override { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const override { return vocab_; }

  TokenAlignment align(std::span<const std::string> words) const override;
  BackendOutput score(std::span<const std::string> words, const ScoreOptions& opts = {}) const override;
  WordDistribution next_distribution(std::span<const std::string> prefix) const override;
  double joint_log2_prob(std::span<const std::string> words) const override;

 private:
  struct Entry {
    std::vector<std::string> words;
    std::vector<std::pair<size_t, size_t>> spans;
    std::vector<double> token_surprisal;
    HiddenStates hidden;  // [layer][token]
    std::map<std::string, double> next;
  };
  const Entry& find(std::span<const std::string> words, bool need_next) const;

  std::vector<Entry> entries_;
  std::map<std::string, std::vector<size_t>> by_first_word_;
  std::shared_ptr<const Vocabulary> vocab_;
  BackendDescriptor desc_;
};

}  // namespace icprobe
