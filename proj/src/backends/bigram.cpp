#include "icprobe/backends/bigram.hpp"

#include <cmath>
#include <set>

#include "icprobe/error.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {
namespace {

std::vector<std::string> collect_vocab(const std::vector<std::vector<std::string>>& corpus,
                                       std::vector<std::string> extra) {
  std::vector<std::string> words;
  std::set<std::string> seen;
  for (const auto& sent : corpus) {
    for (const auto& w : sent) {
      if (seen.insert(w).second) words.push_back(w);
    }
  }
  for (auto& w : extra) {
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace

BigramBackend::BigramBackend(const std::vector<std::vector<std::string>>& corpus,
                             std::vector<std::string> extra_vocab, double alpha)
    : vocab_(std::make_shared<Vocabulary>(collect_vocab(corpus, std::move(extra_vocab)))), alpha_(alpha) {
  if (vocab_->size() == 0) throw UsageError("bigram backend: empty corpus and vocabulary");
  if (alpha < 0) throw UsageError("bigram backend: alpha must be >= 0");
  const size_t v = vocab_->size();
  counts_.assign((v + 1) * v, 0.0);
  context_totals_.assign(v + 1, 0.0);
  for (const auto& sent : corpus) {
    size_t prev = v;
    for (const auto& w : sent) {
      size_t cur = *vocab_->find(w);
      counts_[prev * v + cur] += 1.0;
      context_totals_[prev] += 1.0;
      prev = cur;
    }
  }
  desc_.name = "bigram";
  desc_.vocab_size = v;
  desc_.n_layers = 1;
  desc_.hidden_dim = static_cast<int>(v);
  desc_.params["alpha"] = std::to_string(alpha);
}

double BigramBackend::count(std::string_view prev, std::string_view next) const {
  auto p = vocab_->find(prev);
  auto n = vocab_->find(next);
  if (!p || !n) return 0.0;
  return counts_[*p * vocab_->size() + *n];
}

size_t BigramBackend::context_of(std::span<const std::string> prefix) const {
  if (prefix.empty()) return vocab_->size();
  auto i = vocab_->find(prefix.back());
  if (!i) throw OovError(prefix.back(), "'" + join_words(prefix) + "'");
  return *i;
}

std::vector<double> BigramBackend::row(size_t context) const {
  const size_t v = vocab_->size();
  std::vector<double> p(v);
  const double denom = context_totals_[context] + alpha_ * static_cast<double>(v);
  if (denom <= 0.0) {
    p.assign(v, 1.0 / static_cast<double>(v));
    return p;
  }
  for (size_t j = 0; j < v; ++j) p[j] = (counts_[context * v + j] + alpha_) / denom;
  return p;
}

BackendOutput BigramBackend::score(std::span<const std::string> words, const ScoreOptions& opts) const {
  if (words.empty()) throw UsageError("score: empty word sequence");
  BackendOutput out;
  out.alignment = align(words);
  out.per_word_surprisal.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    auto p = row(context_of(words.first(i)));
    out.per_word_surprisal.push_back(-std::log2(p[*vocab_->find(words[i])]));
  }
  if (opts.distribution) out.next_distribution = next_distribution(words);
  if (opts.hidden) {
    out.hidden.resize(1);
    for (size_t i = 0; i < words.size(); ++i) out.hidden[0].push_back(row(*vocab_->find(words[i])));
  }
  return out;
}

WordDistribution BigramBackend::next_distribution(std::span<const std::string> prefix) const {
  align(prefix);
  WordDistribution d;
  d.vocab = vocab_;
  d.probs = row(context_of(prefix));
  return d;
}

double BigramBackend::joint_log2_prob(std::span<const std::string> words) const {
  align(words);
  const size_t v = vocab_->size();
  double total = 0.0;
  size_t prev = v;
  for (const auto& w : words) {
    size_t cur = *vocab_->find(w);
    const double denom = context_totals_[prev] + alpha_ * static_cast<double>(v);
    const double p = denom > 0.0 ? (counts_[prev * v + cur] + alpha_) / denom : 1.0 / static_cast<double>(v);
    total += std::log2(p);
    prev = cur;
  }
  return total;
}

}  // namespace icprobe
