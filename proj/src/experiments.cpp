#include "icprobe/experiments.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>

#include "icprobe/error.hpp"

namespace icprobe {

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::E1_ref_behavior: return "E1_ref_behavior";
    case Experiment::E2_ref_representation: return "E2_ref_representation";
    case Experiment::E3_syn_behavior: return "E3_syn_behavior";
    case Experiment::E4_syn_representation: return "E4_syn_representation";
  }
  return "?";
}

Experiment parse_experiment(std::string_view s) {
  for (auto e : {Experiment::E1_ref_behavior, Experiment::E2_ref_representation, Experiment::E3_syn_behavior,
                 Experiment::E4_syn_representation}) {
    auto name = to_string(e);
    if (name == s || name.substr(0, 2) == s) return e;
  }
  throw ValidationError("unknown experiment '" + std::string(s) + "'");
}

std::string_view to_string(PreferenceRecord::Location l) {
  switch (l) {
    case PreferenceRecord::Location::higher: return "higher";
    case PreferenceRecord::Location::lower: return "lower";
    case PreferenceRecord::Location::tie: return "tie";
  }
  return "?";
}

PreferenceRecord::Location parse_location(std::string_view s) {
  for (auto l : {PreferenceRecord::Location::higher, PreferenceRecord::Location::lower, PreferenceRecord::Location::tie}) {
    if (to_string(l) == s) return l;
  }
  throw ValidationError("unknown preferred location '" + std::string(s) + "'");
}

void ExperimentResult::append(ExperimentResult other) {
  std::move(other.records.begin(), other.records.end(), std::back_inserter(records));
  std::move(other.preferences.begin(), other.preferences.end(), std::back_inserter(preferences));
  std::move(other.drops.begin(), other.drops.end(), std::back_inserter(drops));
  expected += other.expected;
}

namespace {

struct Outcome {
  std::vector<MeasurementRecord> records;
  std::vector<DropRecord> drops;
};

// Runs fn(i) for every index and concatenates the outcomes in index order, so
// the serial and parallel paths produce the same table.
Outcome map_stimuli(size_t n, ExecutionPolicy policy, const std::function<Outcome(size_t)>& fn) {
  std::vector<Outcome> slots(n);
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](size_t i) {
    try {
      slots[i] = fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (policy == ExecutionPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (long long i = 0; i < static_cast<long long>(n); ++i) body(static_cast<size_t>(i));
  } else {
    for (size_t i = 0; i < n; ++i) body(i);
  }
  Outcome all;
  for (size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    std::move(slots[i].records.begin(), slots[i].records.end(), std::back_inserter(all.records));
    std::move(slots[i].drops.begin(), slots[i].drops.end(), std::back_inserter(all.drops));
  }
  return all;
}

std::vector<DropRecord> repeat_drop(const std::string& stim_id, const std::string& reason, size_t count) {
  return std::vector<DropRecord>(count, DropRecord{stim_id, reason, {}});
}

std::string oov_reason(const OovError& e) { return "oov: '" + e.word() + "'"; }

ExperimentResult finish(Outcome out, size_t expected, const std::string& model_id) {
  ExperimentResult r;
  r.records = std::move(out.records);
  r.drops = std::move(out.drops);
  r.expected = expected;
  for (auto& rec : r.records) rec.model_id = model_id;
  for (auto& d : r.drops) d.model_id = model_id;
  return r;
}

size_t layer_count(const Backend& backend) { return static_cast<size_t>(std::max(backend.descriptor().n_layers, 0)); }

void require_kind(const StimulusSet& set, StimulusKind kind, std::string_view who) {
  for (auto& s : set.stimuli) {
    if (s.kind != kind) {
      throw UsageError(std::string(who) + ": " + s.stim_id + " is a " + std::string(to_string(s.kind)) +
                       " stimulus, expected " + std::string(to_string(kind)));
    }
  }
}

Outcome similarity_outcome(const Stimulus& stim, std::span<const Role> anchors, std::span<const Role> targets,
                           const Backend& backend) {
  Outcome o;
  for (Role a : anchors) {
    try {
      auto sim = layer_similarity(stim, a, targets, backend);
      std::move(sim.records.begin(), sim.records.end(), std::back_inserter(o.records));
      std::move(sim.drops.begin(), sim.drops.end(), std::back_inserter(o.drops));
    } catch (const OovError& e) {
      auto d = repeat_drop(stim.stim_id, oov_reason(e), targets.size() * layer_count(backend));
      std::move(d.begin(), d.end(), std::back_inserter(o.drops));
    }
  }
  return o;
}

}  // namespace

ExperimentResult run_E1(const StimulusSet& referential, const Backend& backend, const ExperimentOptions& opts) {
  require_kind(referential, StimulusKind::referential, "E1");
  const auto& stims = referential.stimuli;
  auto out = map_stimuli(stims.size(), opts.policy, [&](size_t i) {
    Outcome o;
    for (Gender g : {Gender::female, Gender::male}) {
      Stimulus s = append_pronoun(stims[i], g);
      s.conditions["antecedent"] = s.conditions.at("pronoun_target");
      try {
        o.records.push_back(surprisal_at(s, Role::pronoun, backend));
      } catch (const OovError& e) {
        o.drops.push_back({s.stim_id, oov_reason(e), {}});
      } catch (const UndefinedMeasure& e) {
        o.drops.push_back({s.stim_id, std::string("undefined: ") + e.what(), {}});
      }
    }
    return o;
  });
  auto r = finish(std::move(out), 2 * stims.size(), opts.model_id);
  r.summary["records"] = static_cast<double>(r.records.size());
  return r;
}

ExperimentResult run_E2(const StimulusSet& referential, const Backend& backend, const ExperimentOptions& opts) {
  require_kind(referential, StimulusKind::referential, "E2");
  const auto& stims = referential.stimuli;
  const Role anchors[] = {Role::pronoun};
  const Role targets[] = {Role::subject_noun, Role::object_noun};
  auto out = map_stimuli(stims.size(), opts.policy, [&](size_t i) {
    const Stimulus& base = stims[i];
    const Gender g = parse_gender(base.condition("subject_gender"));
    Stimulus s = append_pronoun(base, g);
    s.conditions["antecedent"] = s.conditions.at("pronoun_target");
    return similarity_outcome(s, anchors, targets, backend);
  });
  auto r = finish(std::move(out), stims.size() * 2 * layer_count(backend), opts.model_id);
  r.summary["records"] = static_cast<double>(r.records.size());
  return r;
}

double higher_preference_percent(std::span<const PreferenceRecord> prefs) {
  if (prefs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double score = 0.0;
  for (auto& p : prefs) {
    if (p.preferred == PreferenceRecord::Location::higher) score += 1.0;
    else if (p.preferred == PreferenceRecord::Location::tie) score += 0.5;
  }
  return 100.0 * score / static_cast<double>(prefs.size());
}

namespace {

std::vector<PreferenceRecord> preferences_from(const std::vector<MeasurementRecord>& records) {
  struct Pair {
    const MeasurementRecord* higher = nullptr;
    const MeasurementRecord* lower = nullptr;
  };
  std::map<std::pair<std::string, std::string>, Pair> pairs;
  for (auto& r : records) {
    if (r.measure != MeasureKind::surprisal || r.region_role != to_string(Role::rc_verb)) continue;
    auto loc = r.conditions.find("agreement_location");
    auto frame = r.conditions.find("frame");
    if (loc == r.conditions.end() || frame == r.conditions.end()) continue;
    auto& p = pairs[{r.model_id, frame->second}];
    if (loc->second == "higher") p.higher = &r;
    else if (loc->second == "lower") p.lower = &r;
  }
  std::vector<PreferenceRecord> prefs;
  for (auto& [key, p] : pairs) {
    if (!p.higher || !p.lower) continue;
    PreferenceRecord pr;
    pr.pair_id = key.second;
    pr.model_id = key.first;
    const double sh = p.higher->value;
    const double sl = p.lower->value;
    pr.margin = std::abs(sl - sh);
    pr.preferred = sh < sl ? PreferenceRecord::Location::higher
                   : sl < sh ? PreferenceRecord::Location::lower
                             : PreferenceRecord::Location::tie;
    for (const char* k : {"item", "verb_type", "higher_number", "lower_number", "singular_location"}) {
      auto it = p.higher->conditions.find(k);
      if (it != p.higher->conditions.end()) pr.conditions[k] = it->second;
    }
    prefs.push_back(std::move(pr));
  }
  return prefs;
}

void summarize_preferences(ExperimentResult& r) {
  r.summary["pairs"] = static_cast<double>(r.preferences.size());
  r.summary["higher_preference_pct"] = higher_preference_percent(r.preferences);
  std::map<std::string, std::vector<PreferenceRecord>> by_type, by_model_type;
  for (auto& p : r.preferences) {
    auto vt = p.conditions.count("verb_type") ? p.conditions.at("verb_type") : std::string("unknown");
    by_type[vt].push_back(p);
    by_model_type[p.model_id + "." + vt].push_back(p);
  }
  for (auto& [k, v] : by_type) r.summary["higher_preference_pct." + k] = higher_preference_percent(v);
  if (by_model_type.size() > by_type.size()) {
    for (auto& [k, v] : by_model_type) r.summary["higher_preference_pct." + k] = higher_preference_percent(v);
  }
}

}  // namespace

ExperimentResult run_E3(const StimulusSet& completion, const StimulusSet& reading, const Backend& backend,
                        const ExperimentOptions& opts) {
  require_kind(completion, StimulusKind::completion, "E3");
  require_kind(reading, StimulusKind::rc_reading, "E3");
  const auto& cs = completion.stimuli;
  const auto& rs = reading.stimuli;
  auto out = map_stimuli(cs.size() + rs.size(), opts.policy, [&](size_t i) {
    Outcome o;
    const Stimulus& s = i < cs.size() ? cs[i] : rs[i - cs.size()];
    try {
      if (i < cs.size()) o.records.push_back(cloze_singular_share(s, backend, opts.cloze_k, opts.verb_forms));
      else o.records.push_back(surprisal_at(s, Role::rc_verb, backend));
    } catch (const OovError& e) {
      o.drops.push_back({s.stim_id, oov_reason(e), {}});
    } catch (const UndefinedMeasure& e) {
      o.drops.push_back({s.stim_id, std::string("undefined: ") + e.what(), {}});
    }
    return o;
  });
  auto r = finish(std::move(out), cs.size() + rs.size(), opts.model_id);
  r.preferences = preferences_from(r.records);
  summarize_preferences(r);
  return r;
}

ExperimentResult run_E4(const StimulusSet& rc_set, const Backend& backend, const ExperimentOptions& opts) {
  if (rc_set.kind != StimulusKind::rc_reading && rc_set.kind != StimulusKind::completion) {
    throw UsageError("E4 needs a completion or rc_reading stimulus set");
  }
  require_kind(rc_set, rc_set.kind, "E4");
  const auto& stims = rc_set.stimuli;
  std::vector<Role> anchors{Role::relativizer};
  if (rc_set.kind == StimulusKind::rc_reading) anchors.push_back(Role::rc_verb);
  const Role targets[] = {Role::higher_noun, Role::lower_noun};
  auto out = map_stimuli(stims.size(), opts.policy,
                         [&](size_t i) { return similarity_outcome(stims[i], anchors, targets, backend); });
  auto r = finish(std::move(out), stims.size() * anchors.size() * 2 * layer_count(backend), opts.model_id);
  r.summary["records"] = static_cast<double>(r.records.size());
  return r;
}

namespace {

void canonical_sort(ExperimentResult& r) {
  auto key = [](const MeasurementRecord& m) {
    return std::tie(m.model_id, m.stim_id, m.measure, m.region_role, m.anchor_role, m.target_role, m.layer);
  };
  std::stable_sort(r.records.begin(), r.records.end(),
                   [&](const MeasurementRecord& a, const MeasurementRecord& b) { return key(a) < key(b); });
  std::stable_sort(r.drops.begin(), r.drops.end(), [](const DropRecord& a, const DropRecord& b) {
    return std::tie(a.model_id, a.stim_id) < std::tie(b.model_id, b.stim_id);
  });
  std::stable_sort(r.preferences.begin(), r.preferences.end(), [](const PreferenceRecord& a, const PreferenceRecord& b) {
    return std::tie(a.model_id, a.pair_id) < std::tie(b.model_id, b.pair_id);
  });
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const Lexicons& lex,
                                std::vector<BackendDescriptor>* descriptors) {
  if (spec.seeds.empty()) throw UsageError("run: at least one seed is required");

  std::vector<StimulusSet> sets;
  switch (spec.experiment) {
    case Experiment::E1_ref_behavior:
      sets.push_back(gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch));
      break;
    case Experiment::E2_ref_representation:
      sets.push_back(gen_referential(lex.norms, lex.pairs, GenderCondition::match));
      break;
    case Experiment::E3_syn_behavior:
      sets.push_back(gen_completion(lex.completion_items));
      sets.push_back(gen_rc_reading(lex.reading_items));
      break;
    case Experiment::E4_syn_representation:
      if (spec.e4_stimuli == StimulusKind::rc_reading) sets.push_back(gen_rc_reading(lex.reading_items));
      else if (spec.e4_stimuli == StimulusKind::completion) sets.push_back(gen_completion(lex.completion_items));
      else throw UsageError("E4 stimuli must be completion or rc_reading");
      break;
  }
  for (auto& s : sets) {
    if (s.stimuli.empty()) {
      throw UsageError(std::string(to_string(spec.experiment)) + ": the lexicons produce no " +
                       std::string(to_string(s.kind)) + " stimuli");
    }
  }

  BackendContext ctx;
  ctx.lexicons = &lex;
  ctx.vocabulary = stimulus_vocabulary(sets);
  for (const char* w : {"she", "he", "was", "were"}) ctx.vocabulary.insert(w);

  ExperimentOptions opts;
  opts.cloze_k = spec.cloze_k;
  opts.policy = spec.policy;
  if (spec.experiment == Experiment::E3_syn_behavior) {
    opts.verb_forms = load_verb_forms(spec.verb_forms.empty() ? data_dir() / "verb_forms.txt" : spec.verb_forms);
  }

  ExperimentResult all;
  for (uint64_t seed : spec.seeds) {
    auto backend = make_backend(spec.backend, spec.backend_params, ctx, seed);
    if (descriptors) descriptors->push_back(backend->descriptor());
    opts.model_id = spec.backend + "-s" + std::to_string(seed);
    ExperimentResult r;
    switch (spec.experiment) {
      case Experiment::E1_ref_behavior: r = run_E1(sets[0], *backend, opts); break;
      case Experiment::E2_ref_representation: r = run_E2(sets[0], *backend, opts); break;
      case Experiment::E3_syn_behavior: r = run_E3(sets[0], sets[1], *backend, opts); break;
      case Experiment::E4_syn_representation: r = run_E4(sets[0], *backend, opts); break;
    }
    all.append(std::move(r));
  }
  canonical_sort(all);
  all.summary["records"] = static_cast<double>(all.records.size());
  all.summary["dropped"] = static_cast<double>(all.drops.size());
  all.summary["expected"] = static_cast<double>(all.expected);
  if (spec.experiment == Experiment::E3_syn_behavior) summarize_preferences(all);
  return all;
}

}  // namespace icprobe
