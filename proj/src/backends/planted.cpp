#include "icprobe/backends/planted.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "icprobe/error.hpp"
#include "icprobe/hashing.hpp"
#include "icprobe/stimgen.hpp"

namespace icprobe {
namespace {

constexpr double kNormTolerance = 1e-12;

uint64_t prefix_key(uint64_t seed, std::span<const std::string> words) {
  uint64_t h = fnv1a64("prefix", seed);
  for (const auto& w : words) {
    h = fnv1a64(w, h);
    h = fnv1a64("\x1f", h);
  }
  return h;
}

}  // namespace

PlantedBackend::PlantedBackend(PlantedConfig config, std::vector<PlantRule> rules,
                               std::vector<RepresentationRule> reps)
    : config_(std::move(config)), rules_(std::move(rules)), reps_(std::move(reps)) {
  if (config_.vocab.empty()) throw UsageError("planted backend needs a nonempty vocabulary");
  if (config_.n_layers < 1 || config_.hidden_dim < 1) {
    throw UsageError("planted backend: n_layers and hidden_dim must be >= 1");
  }
  if (config_.noise < 0 || config_.jitter_bits < 0) throw UsageError("planted backend: negative noise");
  vocab_ = std::make_shared<Vocabulary>(config_.vocab);
  desc_.name = "planted";
  desc_.vocab_size = vocab_->size();
  desc_.n_layers = config_.n_layers;
  desc_.hidden_dim = config_.hidden_dim;
  desc_.seed = config_.seed;
  desc_.params["noise"] = std::to_string(config_.noise);
  desc_.params["jitter_bits"] = std::to_string(config_.jitter_bits);

  prototypes_.resize(vocab_->size());
  for (size_t w = 0; w < vocab_->size(); ++w) {
    for (int l = 0; l < config_.n_layers; ++l) {
      prototypes_[w].push_back(hash_normal_vector(
          mix(mix(fnv1a64(vocab_->word(w), config_.seed), 0x70726f746fULL), static_cast<uint64_t>(l)),
          config_.hidden_dim));
    }
  }
}

const std::vector<double>& PlantedBackend::prototype(std::string_view word, int layer) const {
  auto i = vocab_->find(word);
  if (!i) throw OovError(std::string(word), "prototype lookup");
  return prototypes_[*i].at(static_cast<size_t>(layer));
}

PlantedBackend::Resolved PlantedBackend::resolve(std::span<const std::string> prefix) const {
  Resolved r;
  const size_t v = vocab_->size();
  for (const auto& rule : rules_) {
    auto probs = rule.next(prefix);
    if (!probs) continue;
    double total = 0.0;
    const uint64_t key = prefix_key(config_.seed, prefix);
    for (const auto& [word, p] : *probs) {
      auto idx = vocab_->find(word);
      if (!idx) throw UsageError("planted rule '" + rule.name + "' names unknown word '" + word + "'");
      if (!(p >= 0.0 && p <= 1.0)) throw UsageError("planted rule '" + rule.name + "' gives an invalid probability");
      if (std::any_of(r.explicit_probs.begin(), r.explicit_probs.end(),
                      [&](const auto& e) { return e.first == *idx; })) {
        throw UsageError("planted rule '" + rule.name + "' lists '" + word + "' twice");
      }
      double q = p;
      if (config_.jitter_bits > 0.0 && p > 0.0) q = p * std::exp2(-config_.jitter_bits * hash_normal(fnv1a64(word, key)));
      r.explicit_probs.emplace_back(*idx, q);
      total += q;
    }
    if (total > 1.0 + kNormTolerance) {
      throw UsageError("planted rule '" + rule.name + "' does not normalize (explicit mass " + std::to_string(total) +
                       ")");
    }
    const size_t rest = v - r.explicit_probs.size();
    const double remaining = std::max(0.0, 1.0 - total);
    if (rest == 0 && remaining > kNormTolerance) {
      throw UsageError("planted rule '" + rule.name + "' does not normalize (mass " + std::to_string(total) + ")");
    }
    r.rest_each = rest ? remaining / static_cast<double>(rest) : 0.0;
    std::sort(r.explicit_probs.begin(), r.explicit_probs.end());
    return r;
  }
  r.rest_each = 1.0 / static_cast<double>(v);
  return r;
}

double PlantedBackend::prob(std::span<const std::string> prefix, std::string_view word) const {
  auto idx = vocab_->find(word);
  if (!idx) throw OovError(std::string(word), "'" + join_words(prefix) + "'");
  auto r = resolve(prefix);
  for (auto [i, p] : r.explicit_probs) {
    if (i == *idx) return p;
  }
  return r.rest_each;
}

WordDistribution PlantedBackend::next_distribution(std::span<const std::string> prefix) const {
  align(prefix);
  auto r = resolve(prefix);
  WordDistribution d;
  d.vocab = vocab_;
  d.probs.assign(vocab_->size(), r.rest_each);
  for (auto [i, p] : r.explicit_probs) d.probs[i] = p;
  return d;
}

double PlantedBackend::surprisal_at(std::span<const std::string> words, size_t index) const {
  if (index >= words.size()) throw UsageError("surprisal_at: index out of range");
  align(words.first(index + 1));
  return -std::log2(prob(words.first(index), words[index]));
}

double PlantedBackend::joint_log2_prob(std::span<const std::string> words) const {
  align(words);
  double total = 0.0;
  for (size_t i = 0; i < words.size(); ++i) {
    auto d = next_distribution(words.first(i));
    total += std::log2(d.probs[*vocab_->find(words[i])]);
  }
  return total;
}

HiddenStates PlantedBackend::hidden(std::span<const std::string> words) const {
  const auto dim = static_cast<size_t>(config_.hidden_dim);
  HiddenStates out(static_cast<size_t>(config_.n_layers));
  for (int l = 0; l < config_.n_layers; ++l) {
    auto& layer = out[static_cast<size_t>(l)];
    layer.reserve(words.size());
    for (size_t i = 0; i < words.size(); ++i) {
      std::optional<Mixture> m;
      for (const auto& rep : reps_) {
        if ((m = rep.mix(words, i, l))) break;
      }
      std::vector<double> h(dim, 0.0);
      double noise = config_.noise;
      if (m) {
        for (auto [pos, weight] : m->components) {
          if (pos > i) throw UsageError("representation rule '" + std::string("mix") + "' looks ahead");
          const auto& proto = prototype(words[pos], l);
          for (size_t k = 0; k < dim; ++k) h[k] += weight * proto[k];
        }
        if (m->noise) noise = *m->noise;
      } else {
        h = prototype(words[i], l);
      }
      if (noise > 0.0) {
        const uint64_t key = mix(prefix_key(config_.seed, words.first(i + 1)), static_cast<uint64_t>(l) + 101);
        for (size_t k = 0; k < dim; ++k) h[k] += noise * hash_normal(mix(key, k + 1));
      }
      layer.push_back(std::move(h));
    }
  }
  return out;
}

BackendOutput PlantedBackend::score(std::span<const std::string> words, const ScoreOptions& opts) const {
  if (words.empty()) throw UsageError("score: empty word sequence");
  BackendOutput out;
  out.alignment = align(words);
  out.per_word_surprisal.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) out.per_word_surprisal.push_back(-std::log2(prob(words.first(i), words[i])));
  if (opts.distribution) out.next_distribution = next_distribution(words);
  if (opts.hidden) out.hidden = hidden(words);
  return out;
}

std::unique_ptr<PlantedBackend> make_planted_backend(PlantedConfig config, std::vector<PlantRule> rules,
                                                     std::vector<RepresentationRule> reps) {
  return std::make_unique<PlantedBackend>(std::move(config), std::move(rules), std::move(reps));
}

PlantedDesign PlantedDesign::null_design() {
  PlantedDesign d;
  d.ic_reference = false;
  d.attachment = Attachment::none;
  d.ic_representation = false;
  d.agreement_representation = false;
  return d;
}

namespace {

// Lexical lookups the preset rules need to parse the two frame shapes.
struct FrameLexicon {
  std::map<std::string, Gender> gender;
  std::map<std::string, double> bias;               // past form -> score
  std::map<std::string, bool> plural;               // RC noun surface -> is plural
  std::map<std::string, bool> verb_is_ic;           // joined RC verb -> ic
  std::set<size_t> subject_lengths;

  explicit FrameLexicon(const Lexicons& lex) {
    for (const auto& p : lex.pairs) {
      gender[p.male_form] = Gender::male;
      gender[p.female_form] = Gender::female;
    }
    for (const auto& n : lex.norms) bias[n.past_form] = n.bias_score;
    for (const auto* items : {&lex.completion_items, &lex.reading_items}) {
      for (const auto& it : *items) {
        for (const auto* nf : {&it.higher, &it.lower}) {
          plural[nf->singular] = false;
          plural[nf->plural] = true;
        }
        verb_is_ic[join_words(it.ic_verb)] = true;
        verb_is_ic[join_words(it.nonic_verb)] = false;
        subject_lengths.insert(it.subject_np.size());
      }
    }
  }

  struct Referential {
    Gender subject, object;
    double bias;
  };
  // "the X V the Y because"
  std::optional<Referential> referential(std::span<const std::string> w) const {
    if (w.size() < 6 || w[0] != "the" || w[3] != "the" || w[5] != "because") return std::nullopt;
    auto s = gender.find(w[1]);
    auto o = gender.find(w[4]);
    auto b = bias.find(w[2]);
    if (s == gender.end() || o == gender.end() || b == bias.end()) return std::nullopt;
    return Referential{s->second, o->second, b->second};
  }

  struct Relative {
    size_t higher_pos, lower_pos;
    bool higher_plural, lower_plural, ic;
  };
  // "SUBJ VERB the H of the L who" ending at w[end - 1].
  std::optional<Relative> relative(std::span<const std::string> w, size_t end) const {
    if (end < 7 || w[end - 1] != "who" || w[end - 3] != "the" || w[end - 4] != "of" || w[end - 6] != "the") {
      return std::nullopt;
    }
    auto h = plural.find(w[end - 5]);
    auto l = plural.find(w[end - 2]);
    if (h == plural.end() || l == plural.end()) return std::nullopt;
    for (size_t sl : subject_lengths) {
      if (end < sl + 7) continue;
      auto v = verb_is_ic.find(join_words(w.subspan(sl, end - 6 - sl)));
      if (v != verb_is_ic.end()) return Relative{end - 5, end - 2, h->second, l->second, v->second};
    }
    return std::nullopt;
  }
};

const char* pronoun_for(Gender g) { return g == Gender::female ? "she" : "he"; }

}  // namespace

std::unique_ptr<PlantedBackend> make_planted_backend(const PlantedDesign& design, const Lexicons& lex,
                                                     const WordSet& extra_vocab) {
  auto frames = std::make_shared<const FrameLexicon>(lex);

  std::set<std::string> words(extra_vocab.begin(), extra_vocab.end());
  {
    std::vector<StimulusSet> sets;
    if (!lex.norms.empty() && !lex.pairs.empty()) {
      sets.push_back(gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch));
      if (lex.pairs.size() > 1) sets.push_back(gen_referential(lex.norms, lex.pairs, GenderCondition::match));
    }
    sets.push_back(gen_rc_reading(lex.reading_items));
    sets.push_back(gen_completion(lex.completion_items));
    auto v = stimulus_vocabulary(sets);
    words.insert(v.begin(), v.end());
    for (auto w : {"she", "he", "was", "were", "is", "are", "has", "have"}) words.insert(w);
  }
  PlantedConfig config = design.base;
  config.vocab.assign(words.begin(), words.end());

  std::vector<PlantRule> rules;
  rules.push_back({"referential_pronoun", [design, frames](std::span<const std::string> prefix) -> std::optional<WordProbs> {
                     if (prefix.size() != 6) return std::nullopt;
                     auto f = frames->referential(prefix);
                     if (!f) return std::nullopt;
                     const double mean = 0.5 * (design.p_favored + design.p_other);
                     if (f->subject == f->object) {
                       return WordProbs{{pronoun_for(f->subject), design.ic_reference ? design.p_favored : mean}};
                     }
                     if (!design.ic_reference || f->bias == 0.0) {
                       return WordProbs{{"she", mean}, {"he", mean}};
                     }
                     Gender favored = f->bias > 0 ? f->subject : f->object;
                     Gender other = favored == Gender::male ? Gender::female : Gender::male;
                     return WordProbs{{pronoun_for(favored), design.p_favored}, {pronoun_for(other), design.p_other}};
                   }});
  rules.push_back({"rc_verb", [design, frames](std::span<const std::string> prefix) -> std::optional<WordProbs> {
                     auto f = frames->relative(prefix, prefix.size());
                     if (!f) return std::nullopt;
                     bool favored_plural;
                     bool has_preference = true;
                     if (f->higher_plural == f->lower_plural) {
                       favored_plural = f->higher_plural;
                     } else {
                       switch (design.attachment) {
                         case PlantedDesign::Attachment::local: favored_plural = f->lower_plural; break;
                         case PlantedDesign::Attachment::ic:
                           favored_plural = f->ic ? f->higher_plural : f->lower_plural;
                           break;
                         default: favored_plural = false; has_preference = false; break;
                       }
                     }
                     const double r = has_preference ? design.attachment_ratio : 1.0;
                     const double fav = design.rc_mass * r / (1.0 + r);
                     const double oth = design.rc_mass / (1.0 + r);
                     const double sg = favored_plural ? oth : fav;
                     const double pl = favored_plural ? fav : oth;
                     return WordProbs{{"was", 0.5 * sg}, {"is", 0.25 * sg}, {"has", 0.25 * sg},
                                      {"were", 0.5 * pl}, {"are", 0.25 * pl}, {"have", 0.25 * pl}};
                   }});

  std::vector<RepresentationRule> reps;
  reps.push_back({"pronoun", [design, frames](std::span<const std::string> w, size_t pos, int layer) -> std::optional<Mixture> {
                    if (pos != 6 || w.size() < 7) return std::nullopt;
                    auto f = frames->referential(w.first(6));
                    if (!f) return std::nullopt;
                    size_t favored = 1, other = 4;
                    double weight = design.rep_weight;
                    if (!design.ic_representation || f->bias == 0.0) {
                      weight = 0.5;
                    } else if (f->bias < 0) {
                      std::swap(favored, other);
                    }
                    if (layer == design.exact_layer && weight != 0.5) return Mixture{{{favored, 1.0}}, 0.0};
                    return Mixture{{{favored, weight}, {other, 1.0 - weight}}, std::nullopt};
                  }});
  reps.push_back({"relativizer", [design, frames](std::span<const std::string> w, size_t pos, int layer) -> std::optional<Mixture> {
                    if (w[pos] != "who") return std::nullopt;
                    auto f = frames->relative(w, pos + 1);
                    if (!f) return std::nullopt;
                    size_t favored = f->ic ? f->higher_pos : f->lower_pos;
                    size_t other = f->ic ? f->lower_pos : f->higher_pos;
                    const double weight = design.ic_representation ? design.rep_weight : 0.5;
                    if (layer == design.exact_layer && design.ic_representation) return Mixture{{{favored, 1.0}}, 0.0};
                    return Mixture{{{favored, weight}, {other, 1.0 - weight}}, std::nullopt};
                  }});
  reps.push_back({"rc_verb", [design, frames](std::span<const std::string> w, size_t pos, int layer) -> std::optional<Mixture> {
                    if (pos == 0 || (w[pos] != "was" && w[pos] != "were")) return std::nullopt;
                    auto f = frames->relative(w, pos);
                    if (!f) return std::nullopt;
                    const bool verb_plural = w[pos] == "were";
                    const bool agrees_h = verb_plural == f->higher_plural;
                    const bool agrees_l = verb_plural == f->lower_plural;
                    if (!design.agreement_representation || agrees_h == agrees_l) {
                      return Mixture{{{f->higher_pos, 0.5}, {f->lower_pos, 0.5}}, std::nullopt};
                    }
                    size_t favored = agrees_h ? f->higher_pos : f->lower_pos;
                    size_t other = agrees_h ? f->lower_pos : f->higher_pos;
                    if (layer == design.exact_layer) return Mixture{{{favored, 1.0}}, 0.0};
                    return Mixture{{{favored, design.rep_weight}, {other, 1.0 - design.rep_weight}}, std::nullopt};
                  }});
  return make_planted_backend(std::move(config), std::move(rules), std::move(reps));
}

}  // namespace icprobe
