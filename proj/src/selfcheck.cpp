#include "icprobe/selfcheck.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "icprobe/backends/bigram.hpp"
#include "icprobe/backends/planted.hpp"
#include "icprobe/backends/uniform.hpp"
#include "icprobe/experiments.hpp"
#include "icprobe/stats.hpp"

namespace icprobe {

namespace {

CheckResult check(const std::string& name, const std::function<std::string()>& body) {
  try {
    auto failure = body();
    return {name, failure.empty(), failure.empty() ? "ok" : failure};
  } catch (const std::exception& e) {
    return {name, false, std::string("exception: ") + e.what()};
  }
}

std::vector<std::string> random_sentence(std::mt19937_64& rng, const Vocabulary& v, size_t max_len) {
  std::uniform_int_distribution<size_t> len(1, max_len), pick(0, v.size() - 1);
  std::vector<std::string> w(len(rng));
  for (auto& x : w) x = v.word(pick(rng));
  return w;
}

std::vector<double> values_where(const std::vector<MeasurementRecord>& recs,
                                 const std::function<bool(const MeasurementRecord&)>& keep) {
  std::vector<double> out;
  for (auto& r : recs) {
    if (keep(r)) out.push_back(r.value);
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> out;
  const Lexicons lex = load_lexicons(LexiconPaths::bundled());

  out.push_back(check("stimulus counts", [&]() -> std::string {
    const size_t mm = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch).stimuli.size();
    const size_t ma = gen_referential(lex.norms, lex.pairs, GenderCondition::match).stimuli.size();
    const size_t c = gen_completion(lex.completion_items).stimuli.size();
    const size_t r = gen_rc_reading(lex.reading_items).stimuli.size();
    if (mm == 6888 && ma == 6888 && c == 112 && r == 192) return {};
    std::ostringstream s;
    s << "got " << mm << "/" << ma << "/" << c << "/" << r;
    return s.str();
  }));

  out.push_back(check("bias categories", [&]() -> std::string {
    std::string bad;
    for (auto& n : lex.norms) {
      if (n.lemma == "amuse" && categorize_bias(n.bias_score) != BiasCategory::subject_biased) bad += " amuse";
      if (n.lemma == "applaud" && categorize_bias(n.bias_score) != BiasCategory::object_biased) bad += " applaud";
    }
    return bad.empty() ? "" : "wrong category:" + bad;
  }));

  const WordSet vocab = stimulus_vocabulary(std::vector<StimulusSet>{gen_completion(lex.completion_items)});
  const std::vector<std::string> words(vocab.begin(), vocab.end());

  out.push_back(check("uniform surprisal and chain rule", [&]() -> std::string {
    UniformBackend uni(words);
    BigramBackend bi({words}, words, 0.5);
    std::mt19937_64 rng(7);
    const double expected = std::log2(static_cast<double>(words.size()));
    for (int i = 0; i < 200; ++i) {
      auto s = random_sentence(rng, uni.vocabulary(), 12);
      for (double x : uni.score(s, {false, false}).per_word_surprisal) {
        if (x != expected) return "uniform surprisal differs from log2|V|";
      }
      for (const Backend* b : {static_cast<const Backend*>(&uni), static_cast<const Backend*>(&bi)}) {
        double sum = 0.0;
        for (double x : b->score(s, {false, false}).per_word_surprisal) sum += x;
        const double joint = -b->joint_log2_prob(s);
        if (std::abs(sum - joint) > 1e-6 * std::abs(joint)) return b->descriptor().name + ": chain rule violated";
      }
    }
    return {};
  }));

  out.push_back(check("pearson properties", [&]() -> std::string {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> v(8), w(8), a(8);
      for (size_t k = 0; k < 8; ++k) {
        v[k] = z(rng);
        w[k] = z(rng);
        a[k] = 3.0 * v[k] + 2.0;
      }
      const double r = pearson_r(v, w);
      if (r != pearson_r(w, v)) return "not symmetric";
      if (r < -1.0 || r > 1.0) return "out of bounds";
      if (std::abs(pearson_r(a, w) - r) > 1e-10) return "not affine invariant";
      if (std::abs(pearson_r(v, v) - 1.0) > 1e-10) return "r(v,v) != 1";
    }
    return {};
  }));

  ExperimentOptions opts;
  opts.model_id = "planted";
  opts.verb_forms = load_verb_forms(data_dir() / "verb_forms.txt");
  PlantedDesign design;
  design.base.jitter_bits = 0.1;
  const auto planted = make_planted_backend(design, lex);

  out.push_back(check("E1 planted recovery", [&]() -> std::string {
    auto r = run_E1(gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch), *planted, opts);
    auto sel = [&](const char* cat) {
      return values_where(r.records, [&](const MeasurementRecord& m) {
        return m.conditions.at("antecedent") == "subject" && m.conditions.at("bias_category") == cat;
      });
    };
    auto subj = sel("subject_biased"), obj = sel("object_biased");
    auto t = posthoc_ttest(subj, obj, false);
    if (!(mean(subj) < mean(obj)) || !t.significant || t.t_value <= 0) return "subject-biased advantage not recovered";
    return {};
  }));

  out.push_back(check("E2 planted recovery", [&]() -> std::string {
    auto r = run_E2(gen_referential(lex.norms, lex.pairs, GenderCondition::match), *planted, opts);
    auto sel = [&](const char* target) {
      return values_where(r.records, [&](const MeasurementRecord& m) {
        return m.target_role == target && m.conditions.at("bias_category") == "subject_biased";
      });
    };
    auto subj = sel("subject_noun"), obj = sel("object_noun");
    auto t = posthoc_ttest(obj, subj, true);
    if (!t.significant || t.t_value <= 0) return "subject similarity advantage not recovered";
    return {};
  }));

  out.push_back(check("E3 local attachment", [&]() -> std::string {
    PlantedDesign local = design;
    local.attachment = PlantedDesign::Attachment::local;
    local.base.jitter_bits = 0.0;
    auto b = make_planted_backend(local, lex);
    auto r = run_E3(gen_completion(lex.completion_items), gen_rc_reading(lex.reading_items), *b, opts);
    if (r.preferences.empty()) return "no preference records";
    for (auto& p : r.preferences) {
      if (p.preferred != PreferenceRecord::Location::lower || std::abs(p.margin - 1.0) > 1e-12) {
        return "pair " + p.pair_id + " does not prefer the lower noun by 1 bit";
      }
    }
    if (higher_preference_percent(r.preferences) != 0.0) return "higher preference is not 0%";
    return {};
  }));

  out.push_back(check("E4 agreement representation", [&]() -> std::string {
    auto r = run_E4(gen_rc_reading(lex.reading_items), *planted, opts);
    std::map<std::pair<std::string, int>, std::map<std::string, double>> by;
    for (auto& m : r.records) {
      if (m.anchor_role != "rc_verb" || m.conditions.at("agreement_location") == "ambiguous") continue;
      by[{m.stim_id, m.layer}][m.target_role] = m.value;
    }
    for (auto& m : r.records) {
      if (m.anchor_role != "rc_verb" || m.target_role != "higher_noun") continue;
      const auto& loc = m.conditions.at("agreement_location");
      if (loc == "ambiguous") continue;
      auto& cell = by[{m.stim_id, m.layer}];
      const bool ok = loc == "higher" ? cell["higher_noun"] > cell["lower_noun"] : cell["lower_noun"] > cell["higher_noun"];
      if (!ok) return m.stim_id + ": agreeing noun is not the more similar";
    }
    return {};
  }));

  return out;
}

bool print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
  bool all = true;
  for (auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    all = all && c.passed;
  }
  return all;
}

}  // namespace icprobe
