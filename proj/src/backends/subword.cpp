#include "icprobe/backends/subword.hpp"

#include <cmath>

#include "icprobe/error.hpp"
#include "icprobe/hashing.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {
namespace {

std::vector<std::string> whole_word_pieces(const std::vector<std::string>& pieces) {
  std::vector<std::string> out;
  for (const auto& p : pieces) {
    if (!p.starts_with(SubwordBackend::kContinuation)) out.push_back(p);
  }
  return out;
}

}  // namespace

SubwordBackend::SubwordBackend(std::vector<std::string> pieces, int n_layers, int hidden_dim, uint64_t seed)
    : pieces_(pieces), words_(std::make_shared<Vocabulary>(whole_word_pieces(pieces))) {
  if (pieces_.size() == 0) throw UsageError("subword backend needs pieces");
  if (n_layers < 1 || hidden_dim < 1) throw UsageError("subword backend: n_layers and hidden_dim must be >= 1");
  desc_.name = "subword";
  desc_.vocab_kind = "subword";
  desc_.vocab_size = pieces_.size();
  desc_.n_layers = n_layers;
  desc_.hidden_dim = hidden_dim;
  desc_.seed = seed;
}

std::vector<std::string> SubwordBackend::tokenize(std::string_view word) const {
  // Fewest pieces; among equally short splits the longest leading piece wins.
  const size_t n = word.size();
  constexpr size_t kNone = static_cast<size_t>(-1);
  auto piece = [&](size_t b, size_t len) {
    return (b == 0 ? std::string{} : std::string(kContinuation)) + std::string(word.substr(b, len));
  };
  std::vector<size_t> best(n + 1, kNone), next(n + 1, kNone);
  best[n] = 0;
  for (size_t b = n; b-- > 0;) {
    for (size_t len = n - b; len > 0; --len) {
      if (best[b + len] == kNone || !pieces_.contains(piece(b, len))) continue;
      if (best[b] == kNone || best[b + len] + 1 < best[b]) {
        best[b] = best[b + len] + 1;
        next[b] = b + len;
      }
    }
  }
  if (n == 0 || best[0] == kNone) return {};
  std::vector<std::string> out;
  for (size_t b = 0; b < n; b = next[b]) out.push_back(piece(b, next[b] - b));
  return out;
}

TokenAlignment SubwordBackend::align(std::span<const std::string> words) const {
  TokenAlignment a;
  size_t n = 0;
  for (const auto& w : words) {
    auto toks = tokenize(w);
    if (toks.empty()) throw OovError(w, "'" + join_words(words) + "'");
    a.word_spans.emplace_back(n, n + toks.size());
    n += toks.size();
  }
  a.n_subwords = n;
  return a;
}

BackendOutput SubwordBackend::score(std::span<const std::string> words, const ScoreOptions& opts) const {
  if (words.empty()) throw UsageError("score: empty word sequence");
  BackendOutput out;
  out.alignment = align(words);
  const double per_piece = std::log2(static_cast<double>(pieces_.size()));
  for (auto [b, e] : out.alignment.word_spans) {
    out.per_word_surprisal.push_back(per_piece * static_cast<double>(e - b));
  }
  if (opts.distribution) out.next_distribution = next_distribution(words);
  if (opts.hidden) {
    std::vector<std::string> toks;
    for (const auto& w : words) {
      auto t = tokenize(w);
      toks.insert(toks.end(), t.begin(), t.end());
    }
    const auto dim = static_cast<size_t>(desc_.hidden_dim);
    out.hidden.resize(static_cast<size_t>(desc_.n_layers));
    for (int l = 0; l < desc_.n_layers; ++l) {
      // Causal leaky state over pieces; words read the state at their last piece.
      std::vector<std::vector<double>> states;
      std::vector<double> h(dim, 0.0);
      for (const auto& t : toks) {
        auto e = hash_normal_vector(mix(mix(desc_.seed, fnv1a64(t)), static_cast<uint64_t>(l)), desc_.hidden_dim);
        for (size_t k = 0; k < dim; ++k) h[k] = 0.5 * h[k] + e[k];
        states.push_back(h);
      }
      for (auto [b, e] : out.alignment.word_spans) out.hidden[static_cast<size_t>(l)].push_back(states[e - 1]);
    }
  }
  return out;
}

WordDistribution SubwordBackend::next_distribution(std::span<const std::string> prefix) const {
  align(prefix);
  WordDistribution d;
  d.vocab = words_;
  const double p = 1.0 / static_cast<double>(pieces_.size());
  d.coverage = p * static_cast<double>(words_->size());
  d.probs.assign(words_->size(), 1.0 / static_cast<double>(words_->size()));
  d.approximate = true;
  return d;
}

double SubwordBackend::joint_log2_prob(std::span<const std::string> words) const {
  auto a = align(words);
  return -static_cast<double>(a.n_subwords) * std::log2(static_cast<double>(pieces_.size()));
}

}  // namespace icprobe
