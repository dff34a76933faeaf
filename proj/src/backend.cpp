#include "icprobe/backend.hpp"

#include <algorithm>
#include <numeric>

#include "icprobe/error.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) throw UsageError("duplicate vocabulary word '" + words_[i] + "'");
  }
}

std::optional<size_t> Vocabulary::find(std::string_view w) const {
  auto it = index_.find(std::string(w));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool TokenAlignment::covers_exactly() const {
  size_t next = 0;
  for (auto [b, e] : word_spans) {
    if (b != next || e <= b) return false;
    next = e;
  }
  return next == n_subwords;
}

double WordDistribution::prob(std::string_view word) const {
  if (!vocab) return 0.0;
  auto i = vocab->find(word);
  return i ? probs[*i] : 0.0;
}

double WordDistribution::total() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

std::vector<size_t> WordDistribution::top_k(size_t k) const {
  std::vector<size_t> idx(probs.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  k = std::min(k, idx.size());
  auto better = [this](size_t a, size_t b) { return probs[a] != probs[b] ? probs[a] > probs[b] : a < b; };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

size_t WordDistribution::argmax() const {
  auto top = top_k(1);
  if (top.empty()) throw UsageError("argmax of an empty distribution");
  return top.front();
}

TokenAlignment Backend::align(std::span<const std::string> words) const {
  TokenAlignment a;
  const auto& v = vocabulary();
  for (size_t i = 0; i < words.size(); ++i) {
    if (!v.contains(words[i])) throw OovError(words[i], "'" + join_words(words) + "'");
    a.word_spans.emplace_back(i, i + 1);
  }
  a.n_subwords = words.size();
  return a;
}

double Backend::surprisal_at(std::span<const std::string> words, size_t index) const {
  if (index >= words.size()) throw UsageError("surprisal_at: index out of range");
  auto out = score(words.first(index + 1), ScoreOptions{.distribution = false, .hidden = false});
  return out.per_word_surprisal[index];
}

}  // namespace icprobe
