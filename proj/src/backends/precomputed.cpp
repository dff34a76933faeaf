#include "icprobe/backends/precomputed.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "icprobe/error.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {

PrecomputedBackend::PrecomputedBackend(const std::filesystem::path& jsonl, std::string name) {
  std::ifstream in(jsonl);
  if (!in) throw IoError("cannot open model cache " + jsonl.string());
  std::set<std::string> words;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Entry e;
      e.words = j.at("words").get<std::vector<std::string>>();
      for (const auto& s : j.at("word_spans")) e.spans.emplace_back(s.at(0).get<size_t>(), s.at(1).get<size_t>());
      e.token_surprisal = j.at("token_surprisal").get<std::vector<double>>();
      if (j.contains("hidden")) e.hidden = j.at("hidden").get<HiddenStates>();
      if (j.contains("next")) e.next = j.at("next").get<std::map<std::string, double>>();
      TokenAlignment a{e.spans, e.token_surprisal.size()};
      if (e.spans.size() != e.words.size() || !a.covers_exactly()) throw IoError("word_spans do not cover tokens");
      for (const auto& layer : e.hidden) {
        if (layer.size() != e.token_surprisal.size()) throw IoError("hidden layer length != token count");
      }
      words.insert(e.words.begin(), e.words.end());
      for (const auto& [w, p] : e.next) words.insert(w);
      if (entries_.empty()) {
        desc_.n_layers = std::max<int>(1, static_cast<int>(e.hidden.size()));
        desc_.hidden_dim = e.hidden.empty() || e.hidden[0].empty() ? 1 : static_cast<int>(e.hidden[0][0].size());
      }
      if (!e.words.empty()) by_first_word_[e.words[0]].push_back(entries_.size());
      entries_.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(jsonl.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  words.insert(std::string(kOther));
  vocab_ = std::make_shared<Vocabulary>(std::vector<std::string>(words.begin(), words.end()));
  desc_.name = name.empty() ? jsonl.stem().string() : std::move(name);
  desc_.vocab_kind = "subword";
  desc_.vocab_size = vocab_->size();
  desc_.params["cache"] = jsonl.string();
}

std::unique_ptr<PrecomputedBackend> PrecomputedBackend::from_cache(const std::string& model) {
  const char* dir = std::getenv(std::string(kCacheEnv).c_str());
  if (!dir || !*dir) throw UsageError(std::string(kCacheEnv) + " is not set; cannot locate model '" + model + "'");
  return std::make_unique<PrecomputedBackend>(std::filesystem::path(dir) / (model + ".jsonl"), model);
}

const PrecomputedBackend::Entry& PrecomputedBackend::find(std::span<const std::string> words, bool need_next) const {
  if (!words.empty()) {
    auto it = by_first_word_.find(words[0]);
    if (it != by_first_word_.end()) {
      for (size_t idx : it->second) {
        const auto& e = entries_[idx];
        if (e.words.size() < words.size()) continue;
        if (need_next && (e.words.size() != words.size() || e.next.empty())) continue;
        if (std::equal(words.begin(), words.end(), e.words.begin())) return e;
      }
    }
  }
  for (const auto& w : words) {
    if (!vocab_->contains(w)) throw OovError(w, "'" + join_words(words) + "'");
  }
  throw UndefinedMeasure("no cached model output for '" + join_words(words) + "'");
}

TokenAlignment PrecomputedBackend::align(std::span<const std::string> words) const {
  if (words.empty()) return {};
  const auto& e = find(words, false);
  TokenAlignment a;
  a.word_spans.assign(e.spans.begin(), e.spans.begin() + static_cast<std::ptrdiff_t>(words.size()));
  a.n_subwords = a.word_spans.back().second;
  return a;
}

BackendOutput PrecomputedBackend::score(std::span<const std::string> words, const ScoreOptions& opts) const {
  if (words.empty()) throw UsageError("score: empty word sequence");
  const auto& e = find(words, false);
  BackendOutput out;
  out.alignment = align(words);
  for (auto [b, end] : out.alignment.word_spans) {
    double s = 0.0;
    for (size_t t = b; t < end; ++t) s += e.token_surprisal[t];
    out.per_word_surprisal.push_back(s);
  }
  if (opts.distribution) out.next_distribution = next_distribution(words);
  if (opts.hidden) {
    if (e.hidden.empty()) throw UndefinedMeasure("cached output has no hidden states");
    out.hidden.resize(e.hidden.size());
    for (size_t l = 0; l < e.hidden.size(); ++l) {
      for (auto [b, end] : out.alignment.word_spans) out.hidden[l].push_back(e.hidden[l][end - 1]);
    }
  }
  return out;
}

WordDistribution PrecomputedBackend::next_distribution(std::span<const std::string> prefix) const {
  const auto& e = find(prefix, true);
  WordDistribution d;
  d.vocab = vocab_;
  d.probs.assign(vocab_->size(), 0.0);
  double mass = 0.0;
  for (const auto& [w, p] : e.next) {
    d.probs[*vocab_->find(w)] = p;
    mass += p;
  }
  d.probs[*vocab_->find(kOther)] = std::max(0.0, 1.0 - mass);
  d.coverage = mass;
  d.approximate = true;
  return d;
}

double PrecomputedBackend::joint_log2_prob(std::span<const std::string> words) const {
  const auto& e = find(words, false);
  const size_t n_tokens = e.spans[words.size() - 1].second;
  double s = 0.0;
  for (size_t t = 0; t < n_tokens; ++t) s += e.token_surprisal[t];
  return -s;
}

}  // namespace icprobe
