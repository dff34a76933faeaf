#include "icprobe/stimgen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "icprobe/error.hpp"

namespace icprobe {
namespace {

constexpr std::array kRoles = {Role::subject_noun, Role::object_noun, Role::main_verb,   Role::pronoun,
                               Role::higher_noun,  Role::lower_noun,  Role::relativizer, Role::rc_verb};

std::string format_score(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string padded(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, value);
  return buf;
}

const std::string& form(const NounPair& p, Gender g) {
  return g == Gender::male ? p.male_form : p.female_form;
}

Gender other(Gender g) { return g == Gender::male ? Gender::female : Gender::male; }

void sort_canonical(std::vector<Stimulus>& v) {
  std::sort(v.begin(), v.end(), [](const Stimulus& a, const Stimulus& b) { return a.stim_id < b.stim_id; });
}

std::string_view number_tag(bool plural) { return plural ? "pl" : "sg"; }

struct RcFrame {
  Stimulus stim;
  bool higher_plural;
  bool lower_plural;
};

// Shared by the completion and reading generators.
std::vector<RcFrame> rc_frames(std::span<const RCItem> items, std::string_view prefix, StimulusKind kind) {
  std::vector<RcFrame> frames;
  for (const auto& item : items) {
    for (bool ic : {true, false}) {
      for (bool hp : {false, true}) {
        for (bool lp : {false, true}) {
          Stimulus s;
          s.kind = kind;
          s.stim_id = std::string(prefix) + "-i" + padded(item.item_id, 2) + "-" + (ic ? "ic" : "nonic") + "-" +
                      std::string(number_tag(hp)) + std::string(number_tag(lp));
          s.words = item.subject_np;
          const auto& verb = ic ? item.ic_verb : item.nonic_verb;
          s.regions[Role::main_verb] = s.words.size();
          s.words.insert(s.words.end(), verb.begin(), verb.end());
          s.words.push_back("the");
          s.regions[Role::higher_noun] = s.words.size();
          s.words.push_back(hp ? item.higher.plural : item.higher.singular);
          s.words.push_back("of");
          s.words.push_back("the");
          s.regions[Role::lower_noun] = s.words.size();
          s.words.push_back(lp ? item.lower.plural : item.lower.singular);
          s.regions[Role::relativizer] = s.words.size();
          s.words.push_back("who");

          s.conditions["item"] = std::to_string(item.item_id);
          s.conditions["verb_type"] = ic ? "ic" : "nonic";
          s.conditions["higher_number"] = number_tag(hp);
          s.conditions["lower_number"] = number_tag(lp);
          s.conditions["singular_location"] = hp == lp ? "ambiguous" : (hp ? "lower" : "higher");
          frames.push_back({std::move(s), hp, lp});
        }
      }
    }
  }
  return frames;
}

}  // namespace

std::string_view to_string(StimulusKind k) {
  switch (k) {
    case StimulusKind::referential: return "referential";
    case StimulusKind::completion: return "completion";
    case StimulusKind::rc_reading: return "rc_reading";
  }
  return "?";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::subject_noun: return "subject_noun";
    case Role::object_noun: return "object_noun";
    case Role::main_verb: return "main_verb";
    case Role::pronoun: return "pronoun";
    case Role::higher_noun: return "higher_noun";
    case Role::lower_noun: return "lower_noun";
    case Role::relativizer: return "relativizer";
    case Role::rc_verb: return "rc_verb";
  }
  return "?";
}

std::string_view to_string(GenderCondition c) { return c == GenderCondition::match ? "match" : "mismatch"; }
std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

StimulusKind parse_stimulus_kind(std::string_view s) {
  for (auto k : {StimulusKind::referential, StimulusKind::completion, StimulusKind::rc_reading}) {
    if (to_string(k) == s) return k;
  }
  throw UsageError("unknown stimulus kind '" + std::string(s) + "' (referential, completion, rc_reading)");
}

Role parse_role(std::string_view s) {
  for (auto r : kRoles) {
    if (to_string(r) == s) return r;
  }
  throw UsageError("unknown region role '" + std::string(s) + "'");
}

GenderCondition parse_gender_condition(std::string_view s) {
  if (s == "match") return GenderCondition::match;
  if (s == "mismatch") return GenderCondition::mismatch;
  throw UsageError("unknown gender condition '" + std::string(s) + "' (match, mismatch)");
}

Gender parse_gender(std::string_view s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  throw UsageError("unknown gender '" + std::string(s) + "'");
}

std::optional<size_t> Stimulus::region(Role r) const {
  auto it = regions.find(r);
  if (it == regions.end()) return std::nullopt;
  return it->second;
}

const std::string& Stimulus::condition(const std::string& key) const {
  auto it = conditions.find(key);
  if (it == conditions.end()) throw UsageError("stimulus " + stim_id + " has no condition '" + key + "'");
  return it->second;
}

StimulusSet gen_referential(std::span<const VerbNorm> norms, std::span<const NounPair> pairs,
                            GenderCondition condition) {
  if (norms.empty()) throw GenerationError("gen_referential: no verb norms");
  if (pairs.empty()) throw GenerationError("gen_referential: no noun pairs");
  const size_t n = pairs.size();
  if (condition == GenderCondition::match) {
    for (size_t p = 0; p < n; ++p) {
      const auto& partner = pairs[(p + n - 1) % n];
      if (n < 2 || partner.male_form == pairs[p].male_form || partner.female_form == pairs[p].female_form) {
        throw GenerationError("gen_referential: noun pairs cannot be crossed into distinct same-gender nouns");
      }
    }
  }

  StimulusSet set;
  set.kind = StimulusKind::referential;
  set.stimuli.reserve(norms.size() * n * 2);
  const std::string cond{to_string(condition)};
  for (size_t v = 0; v < norms.size(); ++v) {
    const auto& norm = norms[v];
    for (size_t p = 0; p < n; ++p) {
      for (Gender g : {Gender::female, Gender::male}) {
        Gender object_gender = condition == GenderCondition::mismatch ? other(g) : g;
        const NounPair& object_pair = condition == GenderCondition::mismatch ? pairs[p] : pairs[(p + n - 1) % n];
        Stimulus s;
        s.kind = StimulusKind::referential;
        s.stim_id = "ref-" + cond + "-v" + padded(static_cast<int>(v), 4) + "-p" + padded(static_cast<int>(p), 2) +
                    "-" + (g == Gender::female ? "f" : "m");
        s.words = {"the", form(pairs[p], g), norm.past_form, "the", form(object_pair, object_gender), "because"};
        s.regions = {{Role::subject_noun, 1}, {Role::main_verb, 2}, {Role::object_noun, 4}};
        s.conditions = {
            {"gender_match", cond},
            {"subject_gender", std::string(to_string(g))},
            {"object_gender", std::string(to_string(object_gender))},
            {"bias_score", format_score(norm.bias_score)},
            {"bias_category", std::string(to_string(norm.bias_category))},
            {"verb", norm.lemma},
            {"pair", "p" + padded(static_cast<int>(p), 2)},
        };
        set.stimuli.push_back(std::move(s));
      }
    }
  }
  sort_canonical(set.stimuli);
  set.provenance["generator"] = kGeneratorVersion;
  set.provenance["condition"] = cond;
  return set;
}

Stimulus append_pronoun(const Stimulus& stim, Gender pronoun_gender) {
  if (stim.kind != StimulusKind::referential) {
    throw UsageError("append_pronoun: " + stim.stim_id + " is not a referential stimulus");
  }
  if (stim.regions.contains(Role::pronoun)) {
    throw UsageError("append_pronoun: " + stim.stim_id + " already has a pronoun");
  }
  Stimulus out = stim;
  const std::string pronoun = pronoun_gender == Gender::female ? "she" : "he";
  out.stim_id += "-" + pronoun;
  out.regions[Role::pronoun] = out.words.size();
  out.words.push_back(pronoun);

  const std::string pg{to_string(pronoun_gender)};
  const bool subj = stim.condition("subject_gender") == pg;
  const bool obj = stim.condition("object_gender") == pg;
  std::string target = subj && obj ? "both" : subj ? "subject" : obj ? "object" : "none";
  out.conditions["pronoun_gender"] = pg;
  out.conditions["pronoun_target"] = std::move(target);
  return out;
}

StimulusSet gen_completion(std::span<const RCItem> items) {
  StimulusSet set;
  set.kind = StimulusKind::completion;
  for (auto& f : rc_frames(items, "cmp", StimulusKind::completion)) set.stimuli.push_back(std::move(f.stim));
  sort_canonical(set.stimuli);
  set.provenance["generator"] = kGeneratorVersion;
  return set;
}

StimulusSet gen_rc_reading(std::span<const RCItem> items) {
  StimulusSet set;
  set.kind = StimulusKind::rc_reading;
  for (auto& f : rc_frames(items, "rcr", StimulusKind::rc_reading)) {
    for (bool plural_verb : {false, true}) {
      Stimulus s = f.stim;
      const std::string frame = s.stim_id;
      s.stim_id += plural_verb ? "-were" : "-was";
      s.regions[Role::rc_verb] = s.words.size();
      s.words.push_back(plural_verb ? "were" : "was");
      const bool agrees_higher = plural_verb == f.higher_plural;
      const bool agrees_lower = plural_verb == f.lower_plural;
      s.conditions["rc_verb_number"] = number_tag(plural_verb);
      s.conditions["agreement_location"] =
          agrees_higher && !agrees_lower ? "higher" : (agrees_lower && !agrees_higher ? "lower" : "ambiguous");
      s.conditions["frame"] = frame;
      set.stimuli.push_back(std::move(s));
    }
  }
  sort_canonical(set.stimuli);
  set.provenance["generator"] = kGeneratorVersion;
  return set;
}

WordSet stimulus_vocabulary(std::span<const StimulusSet> sets) {
  WordSet vocab;
  for (const auto& set : sets) {
    for (const auto& s : set.stimuli) vocab.insert(s.words.begin(), s.words.end());
  }
  return vocab;
}

void write_stimuli(std::ostream& out, const StimulusSet& set) {
  for (const auto& s : set.stimuli) {
    nlohmann::ordered_json j;
    j["stim_id"] = s.stim_id;
    j["kind"] = to_string(s.kind);
    j["words"] = s.words;
    nlohmann::ordered_json regions = nlohmann::ordered_json::object();
    for (auto r : kRoles) {
      if (auto idx = s.region(r)) regions[std::string(to_string(r))] = *idx;
    }
    j["regions"] = std::move(regions);
    nlohmann::ordered_json conds = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.conditions) conds[k] = v;
    j["conditions"] = std::move(conds);
    out << j.dump() << '\n';
  }
}

StimulusSet read_stimuli(std::istream& in) {
  StimulusSet set;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Stimulus s;
      s.stim_id = j.at("stim_id").get<std::string>();
      s.kind = parse_stimulus_kind(j.at("kind").get<std::string>());
      s.words = j.at("words").get<std::vector<std::string>>();
      for (auto& [k, v] : j.at("regions").items()) {
        auto idx = v.get<size_t>();
        if (idx >= s.words.size()) throw LoadError("region " + k + " out of range");
        s.regions[parse_role(k)] = idx;
      }
      for (auto& [k, v] : j.at("conditions").items()) s.conditions[k] = v.get<std::string>();
      if (!set.stimuli.empty() && set.stimuli.front().kind != s.kind) throw LoadError("mixed stimulus kinds");
      set.kind = s.kind;
      set.stimuli.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("stimulus file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw LoadError("stimulus file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

}  // namespace icprobe
