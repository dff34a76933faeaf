#include "icprobe/measures.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "icprobe/error.hpp"

namespace icprobe {

std::string_view to_string(MeasureKind m) {
  switch (m) {
    case MeasureKind::surprisal: return "surprisal";
    case MeasureKind::similarity: return "similarity";
    case MeasureKind::cloze_share: return "cloze_share";
  }
  return "?";
}

MeasureKind parse_measure(std::string_view s) {
  for (auto m : {MeasureKind::surprisal, MeasureKind::similarity, MeasureKind::cloze_share}) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown measure '" + std::string(s) + "'");
}

bool operator==(const MeasurementRecord& a, const MeasurementRecord& b) {
  const bool aux_eq = (std::isnan(a.aux) && std::isnan(b.aux)) || a.aux == b.aux;
  return aux_eq && a.stim_id == b.stim_id && a.measure == b.measure && a.region_role == b.region_role &&
         a.anchor_role == b.anchor_role && a.target_role == b.target_role && a.layer == b.layer &&
         a.value == b.value && a.model_id == b.model_id && a.conditions == b.conditions;
}

VerbFormLexicon::Class VerbFormLexicon::classify(const std::string& word) const {
  if (singular_forms.contains(word)) return Class::singular;
  if (plural_forms.contains(word)) return Class::plural;
  if (ambiguous_forms.contains(word)) return Class::ambiguous;
  return Class::other;
}

VerbFormLexicon load_verb_forms(std::istream& in) {
  VerbFormLexicon lex;
  WordSet* section = nullptr;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto words = split_words(line);
    if (words.empty() || words[0][0] == '#') continue;
    if (words.size() == 1 && words[0].front() == '[') {
      if (words[0] == "[singular]") section = &lex.singular_forms;
      else if (words[0] == "[plural]") section = &lex.plural_forms;
      else if (words[0] == "[ambiguous]") section = &lex.ambiguous_forms;
      else throw LoadError("verb forms line " + std::to_string(line_no) + ": unknown section " + words[0]);
      continue;
    }
    if (!section) throw LoadError("verb forms line " + std::to_string(line_no) + ": word before any section");
    for (auto& w : words) {
      int owners = lex.singular_forms.contains(w) + lex.plural_forms.contains(w) + lex.ambiguous_forms.contains(w);
      if (owners > 0 && !section->contains(w)) {
        throw LoadError("verb forms line " + std::to_string(line_no) + ": '" + w + "' appears in two sections");
      }
      section->insert(std::move(w));
    }
  }
  return lex;
}

VerbFormLexicon load_verb_forms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return load_verb_forms(in);
}

MeasurementRecord surprisal_at(const Stimulus& stim, Role role, const Backend& backend) {
  auto idx = stim.region(role);
  if (!idx) throw UsageError("stimulus " + stim.stim_id + " has no " + std::string(to_string(role)) + " region");
  MeasurementRecord r;
  r.stim_id = stim.stim_id;
  r.measure = MeasureKind::surprisal;
  r.region_role = to_string(role);
  r.conditions = stim.conditions;
  try {
    r.value = backend.surprisal_at(std::span<const std::string>(stim.words).first(*idx + 1), *idx);
  } catch (const OovError& e) {
    throw OovError(e.word(), "stimulus " + stim.stim_id);
  }
  return r;
}

double pearson_r(std::span<const double> v, std::span<const double> w) {
  if (v.size() != w.size()) throw UsageError("pearson_r: vectors differ in length");
  if (v.size() < 2) throw UsageError("pearson_r: need at least two observations");
  const double n = static_cast<double>(v.size());
  double mv = 0.0, mw = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    mv += v[i];
    mw += w[i];
  }
  mv /= n;
  mw /= n;
  double svw = 0.0, svv = 0.0, sww = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const double dv = v[i] - mv;
    const double dw = w[i] - mw;
    svw += dv * dw;
    svv += dv * dv;
    sww += dw * dw;
  }
  if (svv == 0.0 || sww == 0.0) throw UndefinedMeasure("pearson_r: constant vector");
  return std::clamp(svw / std::sqrt(svv * sww), -1.0, 1.0);
}

SimilarityResult layer_similarity(const Stimulus& stim, Role anchor, std::span<const Role> targets,
                                  const Backend& backend) {
  auto a = stim.region(anchor);
  if (!a) throw UsageError("stimulus " + stim.stim_id + " has no " + std::string(to_string(anchor)) + " region");
  std::vector<size_t> target_idx;
  for (Role t : targets) {
    auto i = stim.region(t);
    if (!i) throw UsageError("stimulus " + stim.stim_id + " has no " + std::string(to_string(t)) + " region");
    target_idx.push_back(*i);
  }
  BackendOutput out;
  try {
    out = backend.score(stim.words, ScoreOptions{.distribution = false, .hidden = true});
  } catch (const OovError& e) {
    throw OovError(e.word(), "stimulus " + stim.stim_id);
  }
  SimilarityResult result;
  for (size_t ti = 0; ti < targets.size(); ++ti) {
    for (size_t l = 0; l < out.hidden.size(); ++l) {
      MeasurementRecord r;
      r.stim_id = stim.stim_id;
      r.measure = MeasureKind::similarity;
      r.anchor_role = to_string(anchor);
      r.target_role = to_string(targets[ti]);
      r.layer = static_cast<int>(l);
      r.conditions = stim.conditions;
      try {
        r.value = pearson_r(out.hidden[l][*a], out.hidden[l][target_idx[ti]]);
        result.records.push_back(std::move(r));
      } catch (const UndefinedMeasure&) {
        result.drops.push_back({stim.stim_id,
                                "constant: hidden vector (" + r.anchor_role + "/" + r.target_role + ", layer " +
                                    std::to_string(l) + ")",
                                {}});
      }
    }
  }
  return result;
}

SimilarityResult layer_similarity(const Stimulus& stim, Role anchor, Role target, const Backend& backend) {
  const Role targets[] = {target};
  return layer_similarity(stim, anchor, targets, backend);
}

ClozeShares cloze_shares(const WordDistribution& dist, size_t k, const VerbFormLexicon& lexicon) {
  if (k < 1) throw UsageError("cloze: k must be >= 1");
  double sg = 0.0, pl = 0.0;
  for (size_t i : dist.top_k(k)) {
    switch (lexicon.classify(dist.vocab->word(i))) {
      case VerbFormLexicon::Class::singular: sg += dist.probs[i]; break;
      case VerbFormLexicon::Class::plural: pl += dist.probs[i]; break;
      default: break;
    }
  }
  const double total = sg + pl;
  if (!(total > 0.0)) throw UndefinedMeasure("no singular or plural verb among the top " + std::to_string(k));
  const double singular = sg / total;
  return {singular, 1.0 - singular, total};
}

MeasurementRecord cloze_singular_share(const Stimulus& stim, const Backend& backend, size_t k,
                                       const VerbFormLexicon& lexicon) {
  if (stim.kind != StimulusKind::completion) {
    throw UsageError("cloze_singular_share: " + stim.stim_id + " is not a completion prompt");
  }
  WordDistribution dist;
  try {
    dist = backend.next_distribution(stim.words);
  } catch (const OovError& e) {
    throw OovError(e.word(), "stimulus " + stim.stim_id);
  }
  auto shares = cloze_shares(dist, k, lexicon);
  MeasurementRecord r;
  r.stim_id = stim.stim_id;
  r.measure = MeasureKind::cloze_share;
  r.region_role = to_string(Role::relativizer);
  r.value = shares.singular;
  r.aux = shares.verb_mass;
  r.conditions = stim.conditions;
  return r;
}

}  // namespace icprobe
