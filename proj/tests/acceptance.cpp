// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "icprobe/backends/bigram.hpp"
#include "icprobe/backends/planted.hpp"
#include "icprobe/backends/precomputed.hpp"
#include "icprobe/backends/subword.hpp"
#include "icprobe/backends/tiny_lstm.hpp"
#include "icprobe/backends/uniform.hpp"
#include "icprobe/cli.hpp"
#include "icprobe/error.hpp"
#include "icprobe/experiments.hpp"
#include "icprobe/records.hpp"
#include "icprobe/stats.hpp"

using namespace icprobe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
  std::vector<std::string> notes;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Lexicons& bundled() {
  static const auto lex = load_lexicons(LexiconPaths::bundled());
  return lex;
}

const VerbFormLexicon& verb_forms() {
  static const auto forms = load_verb_forms(data_dir() / "verb_forms.txt");
  return forms;
}

ExperimentOptions serial_opts() {
  ExperimentOptions o;
  o.policy = ExecutionPolicy::serial;
  o.model_id = "m";
  o.verb_forms = verb_forms();
  return o;
}

// Twelve verbs (six per bias direction) and four noun pairs.
Lexicons reduced_lexicons() {
  Lexicons lex = bundled();
  lex.norms.clear();
  int subj = 0, obj = 0;
  for (const auto& n : bundled().norms) {
    if (n.bias_category == BiasCategory::subject_biased && subj < 6) {
      lex.norms.push_back(n);
      ++subj;
    } else if (n.bias_category == BiasCategory::object_biased && obj < 6) {
      lex.norms.push_back(n);
      ++obj;
    }
  }
  lex.pairs.resize(4);
  return lex;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? NAN : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- counts

Outcome check_counts() {
  const auto& lex = bundled();
  const size_t mm = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch).stimuli.size();
  const size_t ma = gen_referential(lex.norms, lex.pairs, GenderCondition::match).stimuli.size();
  const size_t cmp = gen_completion(lex.completion_items).stimuli.size();
  const size_t rdg = gen_rc_reading(lex.reading_items).stimuli.size();
  Outcome o;
  o.passed = mm == 6888 && ma == 6888 && cmp == 112 && rdg == 192;
  o.detail = "mismatch " + std::to_string(mm) + ", match " + std::to_string(ma) + ", completion " +
             std::to_string(cmp) + ", reading " + std::to_string(rdg) + " (expected 6888/6888/112/192)";
  return o;
}

Outcome check_bias_categories() {
  auto norms = load_verb_norms(data_dir() / "verb_norms.tsv");
  std::map<std::string, VerbNorm> by_lemma;
  for (const auto& n : norms) by_lemma[n.lemma] = n;
  Outcome o;
  if (!by_lemma.count("amuse") || !by_lemma.count("applaud")) {
    o.detail = "amuse or applaud missing from the bundled norms";
    return o;
  }
  const auto& amuse = by_lemma["amuse"];
  const auto& applaud = by_lemma["applaud"];
  o.passed = amuse.bias_score == 67 && amuse.bias_category == BiasCategory::subject_biased &&
             applaud.bias_score == -84 && applaud.bias_category == BiasCategory::object_biased &&
             categorize_bias(67) == BiasCategory::subject_biased && categorize_bias(-84) == BiasCategory::object_biased;
  o.detail = "amused (" + fmt("%g", amuse.bias_score) + ") -> " + std::string(to_string(amuse.bias_category)) +
             ", applauded (" + fmt("%g", applaud.bias_score) + ") -> " + std::string(to_string(applaud.bias_category));
  return o;
}

// ---------------------------------------------------------------- surprisal identities

fs::path scratch(const std::string& name) {
  auto p = fs::path(ICPROBE_TEST_TMP) / "acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Cache entries with random tokenizations and token surprisals.
fs::path write_precomputed_fixture(const std::vector<std::vector<std::string>>& sequences, std::mt19937_64& rng) {
  auto path = scratch("precomputed") / "fixture.jsonl";
  std::ofstream out(path);
  std::uniform_int_distribution<int> pieces(1, 3);
  std::uniform_real_distribution<double> bits(0.1, 12.0);
  for (const auto& words : sequences) {
    nlohmann::json j;
    j["words"] = words;
    std::vector<std::string> tokens;
    std::vector<std::array<size_t, 2>> spans;
    std::vector<double> surprisal;
    for (const auto& w : words) {
      const size_t b = tokens.size();
      const int n = pieces(rng);
      for (int k = 0; k < n; ++k) {
        tokens.push_back(w + "#" + std::to_string(k));
        surprisal.push_back(bits(rng));
      }
      spans.push_back({b, tokens.size()});
    }
    j["tokens"] = tokens;
    j["word_spans"] = spans;
    j["token_surprisal"] = surprisal;
    out << j.dump() << '\n';
  }
  return path;
}

Outcome check_surprisal_identities() {
  Outcome o;
  std::mt19937_64 rng(20231);
  const std::vector<std::string> vocab{"the",   "girl", "boy",  "mother", "father", "because", "she",  "he",
                                       "was",   "were", "sad",  "happy",  "called", "amused",  "left", "who",
                                       "of",    "agent", "rockers"};
  auto random_sequence = [&] {
    std::uniform_int_distribution<size_t> len(1, 12), pick(0, vocab.size() - 1);
    std::vector<std::string> s(len(rng));
    for (auto& w : s) w = vocab[pick(rng)];
    return s;
  };
  std::vector<std::vector<std::string>> sequences(1000);
  for (auto& s : sequences) s = random_sequence();

  UniformBackend uniform(vocab, 2, 8, 1);
  const double log_v = std::log2(static_cast<double>(vocab.size()));
  size_t uniform_exact = 0, words = 0;
  for (const auto& s : sequences) {
    for (double v : uniform.score(s).per_word_surprisal) {
      ++words;
      uniform_exact += v == log_v;
    }
  }

  TinyLmConfig lm;
  lm.embed_dim = 8;
  lm.hidden_dim = 12;
  lm.epochs = 3;
  auto tiny = TinyLstmBackend::train(load_corpus(data_dir() / "toy_corpus.txt"), vocab, lm);
  BigramBackend bigram(load_corpus(data_dir() / "toy_corpus.txt"), vocab, 0.1);
  std::set<std::string> pieces;
  for (const auto& w : vocab) {
    if (w.size() <= 4) {
      pieces.insert(w);
    } else {
      pieces.insert(w.substr(0, 3));
      pieces.insert("##" + w.substr(3));
    }
  }
  SubwordBackend subword({pieces.begin(), pieces.end()}, 2, 8, 1);
  PlantedConfig pc;
  pc.vocab = vocab;
  pc.jitter_bits = 0.1;
  auto planted = make_planted_backend(pc, {{"skew", [](std::span<const std::string> prefix) -> std::optional<WordProbs> {
                                              if (prefix.empty() || prefix.back() != "because") return std::nullopt;
                                              return WordProbs{{"she", 0.4}, {"he", 0.2}};
                                            }}});
  auto fixture = write_precomputed_fixture(sequences, rng);
  PrecomputedBackend precomputed(fixture, "fixture");

  std::vector<std::pair<std::string, const Backend*>> backends{
      {"uniform", &uniform}, {"bigram", &bigram},           {"subword", &subword},
      {"planted", planted.get()}, {"tiny_lstm", tiny.get()}, {"precomputed", &precomputed}};
  double worst = 0.0;
  std::string worst_backend;
  for (const auto& [name, b] : backends) {
    for (const auto& s : sequences) {
      const auto out = b->score(s, {false, false});
      double sum = 0.0;
      for (double v : out.per_word_surprisal) sum += v;
      const double joint = -b->joint_log2_prob(s);
      const double rel = std::abs(sum - joint) / std::max(std::abs(joint), 1e-300);
      if (rel > worst || worst_backend.empty()) {
        worst = std::max(worst, rel);
        worst_backend = name;
      }
    }
  }
  o.passed = uniform_exact == words && worst <= 1e-6;
  o.detail = "uniform log2|V| exact on " + std::to_string(uniform_exact) + "/" + std::to_string(words) +
             " words; chain rule over 1000 sequences x " + std::to_string(backends.size()) +
             " backends, worst relative error " + fmt("%.2e", worst) + " (" + worst_backend + ")";
  return o;
}

// ---------------------------------------------------------------- pearson

Outcome check_pearson() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> len(2, 64);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  size_t failures = 0, undefined = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const size_t d = static_cast<size_t>(len(rng));
    std::vector<double> v(d), w(d), av(d);
    for (auto& x : v) x = n(rng);
    for (auto& x : w) x = n(rng);
    const double a = scale(rng), b = 10 * n(rng);
    for (size_t i = 0; i < d; ++i) av[i] = a * v[i] + b;
    try {
      const double r = pearson_r(v, w);
      const double dev = std::max({std::abs(r - pearson_r(w, v)), std::abs(r - pearson_r(av, w)),
                                   std::abs(1.0 - pearson_r(v, v)), std::max(0.0, std::abs(r) - 1.0)});
      worst = std::max(worst, dev);
      failures += dev > 1e-10;
    } catch (const UndefinedMeasure&) {
      ++undefined;
    }
  }
  Outcome o;
  o.passed = failures == 0 && undefined == 0;
  o.detail = "10000 pairs: symmetry, |r| <= 1, affine invariance, r(v,v)=1; worst deviation " + fmt("%.2e", worst) +
             ", failures " + std::to_string(failures);
  return o;
}

// ---------------------------------------------------------------- cloze oracle

Outcome check_cloze_oracle() {
  const auto& lex = bundled();
  auto prompts = gen_completion(lex.completion_items);
  WordSet words = stimulus_vocabulary(std::vector<StimulusSet>{prompts});
  for (const auto* set : {&verb_forms().singular_forms, &verb_forms().plural_forms, &verb_forms().ambiguous_forms}) {
    words.insert(set->begin(), set->end());
  }
  for (auto w : {"dog", "cat", "tree", "blue", "quickly"}) words.insert(w);
  std::vector<std::string> vocab(words.begin(), words.end());
  std::sort(vocab.begin(), vocab.end());

  std::mt19937_64 rng(505);
  size_t agree = 0, undefined_both = 0;
  std::string first_mismatch;
  for (int plant = 0; plant < 100; ++plant) {
    const Stimulus& stim = prompts.stimuli[rng() % prompts.stimuli.size()];
    std::vector<std::string> chosen = vocab;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(1 + rng() % 40);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> raw(chosen.size());
    for (auto& x : raw) x = u(rng) < 0.2 ? 0.5 : u(rng);  // repeated weights create ties
    double total = 0;
    for (double x : raw) total += x;
    const bool jitter = plant % 2 == 0;
    const double mass = 0.3 + (jitter ? 0.4 : 0.7) * u(rng);
    WordProbs probs;
    for (size_t i = 0; i < chosen.size(); ++i) probs.emplace_back(chosen[i], mass * raw[i] / total * 0.999999);
    const auto prompt = stim.words;
    PlantedConfig pc;
    pc.vocab = vocab;
    pc.n_layers = 1;
    pc.hidden_dim = 2;
    pc.seed = static_cast<uint64_t>(plant);
    pc.jitter_bits = jitter ? 0.05 : 0.0;
    auto backend = make_planted_backend(pc, {{"plant", [prompt, probs](std::span<const std::string> p) -> std::optional<WordProbs> {
                                                if (!std::equal(p.begin(), p.end(), prompt.begin(), prompt.end())) return std::nullopt;
                                                return probs;
                                              }}});
    const size_t k = 1 + rng() % 60;

    // Brute force: every vocabulary word's probability, sorted by (prob desc, index asc).
    std::vector<std::pair<double, size_t>> all;
    for (size_t i = 0; i < vocab.size(); ++i) all.emplace_back(backend->prob(prompt, vocab[i]), i);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    double sg = 0, pl = 0;
    for (size_t r = 0; r < std::min(k, all.size()); ++r) {
      const auto& w = vocab[all[r].second];
      if (verb_forms().singular_forms.count(w)) sg += all[r].first;
      else if (verb_forms().plural_forms.count(w)) pl += all[r].first;
    }
    std::optional<double> expected;
    if (sg + pl > 0) expected = sg / (sg + pl);

    std::optional<double> got;
    try {
      got = cloze_singular_share(stim, *backend, k, verb_forms()).value;
    } catch (const UndefinedMeasure&) {
    }
    if (got == expected) {
      ++agree;
      undefined_both += !got.has_value();
    } else if (first_mismatch.empty()) {
      first_mismatch = "plant " + std::to_string(plant) + ": expected " +
                       (expected ? fmt("%.17g", *expected) : std::string("undefined")) + ", got " +
                       (got ? fmt("%.17g", *got) : std::string("undefined"));
    }
  }
  Outcome o;
  o.passed = agree == 100;
  o.detail = std::to_string(agree) + "/100 randomized plants match the brute-force enumeration exactly (" +
             std::to_string(undefined_both) + " with no verb in the window)";
  if (!first_mismatch.empty()) o.detail += "; " + first_mismatch;
  return o;
}

// ---------------------------------------------------------------- planted recovery

// Contrast for one run: `favored` should have the lower surprisal (or higher
// similarity) under the planted effect. Item means are taken when `by_item`.
struct Contrast {
  std::vector<double> a, b;  // t-test of mean(b - a); planted sign positive
  bool ordered = true;
  std::string means;
};

struct Paired {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_key;
  void add(const std::string& key, double a, double b) {
    by_key[key].first.push_back(a);
    by_key[key].second.push_back(b);
  }
  void flatten(Contrast& c, bool by_item) const {
    for (const auto& [k, ab] : by_key) {
      if (by_item) {
        c.a.push_back(mean(ab.first));
        c.b.push_back(mean(ab.second));
      } else {
        c.a.insert(c.a.end(), ab.first.begin(), ab.first.end());
        c.b.insert(c.b.end(), ab.second.begin(), ab.second.end());
      }
    }
  }
};

std::string strip_suffix(const std::string& id) { return id.substr(0, id.rfind('-')); }

// E1: a = surprisal of the IC-consistent pronoun, b = the other one, per frame.
Contrast e1_contrast(const Backend& backend, const Lexicons& lex) {
  auto frames = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch);
  auto r = run_E1(frames, backend, serial_opts());
  std::map<std::string, std::pair<double, double>> per_frame;
  std::map<std::string, std::vector<double>> cells;
  for (const auto& rec : r.records) {
    const auto& bias = rec.conditions.at("bias_category");
    const auto& ante = rec.conditions.at("antecedent");
    const bool consistent = (bias == "subject_biased") == (ante == "subject");
    auto& slot = per_frame[strip_suffix(rec.stim_id)];
    (consistent ? slot.first : slot.second) = rec.value;
    cells[bias + "/" + ante].push_back(rec.value);
  }
  Contrast c;
  for (const auto& [id, ab] : per_frame) {
    c.a.push_back(ab.first);
    c.b.push_back(ab.second);
  }
  const double ss = mean(cells["subject_biased/subject"]), so = mean(cells["subject_biased/object"]);
  const double os = mean(cells["object_biased/subject"]), oo = mean(cells["object_biased/object"]);
  c.ordered = ss < so && oo < os;
  c.means = "subj-biased S/O " + fmt("%.3f", ss) + "/" + fmt("%.3f", so) + ", obj-biased S/O " + fmt("%.3f", os) +
            "/" + fmt("%.3f", oo) + " bits";
  return c;
}

// E2: a = similarity to the disfavored noun, b = to the IC-favored noun; item = noun combination.
Contrast e2_contrast(const Backend& backend, const Lexicons& lex) {
  auto frames = gen_referential(lex.norms, lex.pairs, GenderCondition::match);
  std::map<std::string, std::string> item_of;
  for (const auto& s : frames.stimuli) item_of[s.stim_id] = s.words[s.regions.at(Role::subject_noun)] + "/" +
                                                            s.words[s.regions.at(Role::object_noun)];
  auto r = run_E2(frames, backend, serial_opts());
  std::map<std::pair<std::string, int>, std::pair<double, double>> per;  // (stim, layer) -> (favored, other)
  std::map<std::string, std::vector<double>> cells;
  for (const auto& rec : r.records) {
    const auto& bias = rec.conditions.at("bias_category");
    const bool favored = (bias == "subject_biased") == (rec.target_role == "subject_noun");
    auto& slot = per[{rec.stim_id, rec.layer}];
    (favored ? slot.first : slot.second) = rec.value;
    cells[bias + (favored ? "/favored" : "/other")].push_back(rec.value);
  }
  Paired p;
  for (const auto& [key, fo] : per) p.add(item_of.at(strip_suffix(key.first)), fo.second, fo.first);
  Contrast c;
  p.flatten(c, true);
  const double sf = mean(cells["subject_biased/favored"]), so = mean(cells["subject_biased/other"]);
  const double of = mean(cells["object_biased/favored"]), oo = mean(cells["object_biased/other"]);
  c.ordered = sf > so && of > oo;
  c.means = "subj-biased sim(subject)/sim(object) " + fmt("%.3f", sf) + "/" + fmt("%.3f", so) +
            ", obj-biased sim(object)/sim(subject) " + fmt("%.3f", of) + "/" + fmt("%.3f", oo);
  return c;
}

// E3: a = surprisal of the verb agreeing with the planted attachment site, b = the other verb, per frame.
Contrast e3_contrast(const Backend& backend, const StimulusSet& completion, const StimulusSet& reading) {
  auto r = run_E3(completion, reading, backend, serial_opts());
  std::map<std::string, std::map<std::string, double>> frames;  // frame -> location -> surprisal
  std::map<std::string, std::string> verb_type;
  std::map<std::string, std::vector<double>> cells;
  for (const auto& rec : r.records) {
    if (rec.measure == MeasureKind::cloze_share) {
      cells["cloze/" + rec.conditions.at("verb_type") + "/" + rec.conditions.at("singular_location")].push_back(
          rec.value);
      continue;
    }
    const auto& loc = rec.conditions.at("agreement_location");
    if (loc == "ambiguous") continue;
    frames[rec.conditions.at("frame")][loc] = rec.value;
    verb_type[rec.conditions.at("frame")] = rec.conditions.at("verb_type");
    cells[rec.conditions.at("verb_type") + "/" + loc].push_back(rec.value);
  }
  Contrast c;
  for (const auto& [frame, locs] : frames) {
    const bool ic = verb_type[frame] == "ic";
    c.a.push_back(locs.at(ic ? "higher" : "lower"));
    c.b.push_back(locs.at(ic ? "lower" : "higher"));
  }
  const double ih = mean(cells["ic/higher"]), il = mean(cells["ic/lower"]);
  const double nh = mean(cells["nonic/higher"]), nl = mean(cells["nonic/lower"]);
  c.ordered = ih < il && nl < nh;
  c.means = "IC higher/lower " + fmt("%.3f", ih) + "/" + fmt("%.3f", il) + ", non-IC " + fmt("%.3f", nh) + "/" +
            fmt("%.3f", nl) + " bits";
  if (!completion.stimuli.empty()) {
    const double ich = mean(cells["cloze/ic/higher"]), icl = mean(cells["cloze/ic/lower"]);
    const double nch = mean(cells["cloze/nonic/higher"]), ncl = mean(cells["cloze/nonic/lower"]);
    c.ordered = c.ordered && ich > icl && ncl > nch;
    c.means += "; singular share by singular noun IC higher/lower " + fmt("%.3f", ich) + "/" + fmt("%.3f", icl) +
               ", non-IC " + fmt("%.3f", nch) + "/" + fmt("%.3f", ncl);
  }
  return c;
}

// E4: at the RC verb, a = similarity to the non-agreeing noun, b = to the agreeing noun; item = RC item.
Contrast e4_contrast(const Backend& backend, const StimulusSet& reading) {
  auto r = run_E4(reading, backend, serial_opts());
  std::map<std::pair<std::string, int>, std::pair<double, double>> per;  // (stim, layer) -> (agree, other)
  std::map<std::string, std::string> item;
  std::map<std::string, std::vector<double>> cells;
  for (const auto& rec : r.records) {
    const auto& loc = rec.conditions.at("agreement_location");
    if (rec.anchor_role == "relativizer") {
      cells["who/" + rec.conditions.at("verb_type") + "/" + rec.target_role].push_back(rec.value);
      continue;
    }
    if (loc == "ambiguous") continue;
    const bool agree = rec.target_role == loc + "_noun";
    auto& slot = per[{rec.stim_id, rec.layer}];
    (agree ? slot.first : slot.second) = rec.value;
    item[rec.stim_id] = rec.conditions.at("item");
    cells[agree ? "verb/agree" : "verb/other"].push_back(rec.value);
  }
  Paired p;
  for (const auto& [key, ao] : per) p.add(item.at(key.first), ao.second, ao.first);
  Contrast c;
  p.flatten(c, true);
  const double va = mean(cells["verb/agree"]), vo = mean(cells["verb/other"]);
  const double ih = mean(cells["who/ic/higher_noun"]), il = mean(cells["who/ic/lower_noun"]);
  const double nh = mean(cells["who/nonic/higher_noun"]), nl = mean(cells["who/nonic/lower_noun"]);
  c.ordered = va > vo;
  c.means = "verb sim(agreeing)/sim(other) " + fmt("%.3f", va) + "/" + fmt("%.3f", vo);
  if (!std::isnan(ih)) {
    c.ordered = c.ordered && ih > il && nl > nh;
    c.means += ", who IC higher/lower " + fmt("%.3f", ih) + "/" + fmt("%.3f", il) + ", non-IC " + fmt("%.3f", nh) +
               "/" + fmt("%.3f", nl);
  }
  return c;
}

Outcome check_planted_recovery() {
  Outcome o;
  const auto& lex = bundled();
  const auto reduced = reduced_lexicons();
  const auto completion = gen_completion(lex.completion_items);
  const auto reading = gen_rc_reading(lex.reading_items);
  const StimulusSet no_completion{StimulusKind::completion, {}, {}};

  auto planted = [](uint64_t seed) {
    PlantedDesign d;
    d.base.seed = seed;
    d.base.jitter_bits = 0.1;
    return d;
  };
  auto null = [](uint64_t seed) {
    auto d = PlantedDesign::null_design();
    d.base.seed = seed;
    d.base.jitter_bits = 0.1;
    d.base.n_layers = 2;
    return d;
  };

  struct Exp {
    std::string name;
    std::function<Contrast(const Backend&, bool full)> contrast;
  };
  std::vector<Exp> exps{
      {"E1", [&](const Backend& b, bool full) { return e1_contrast(b, full ? lex : reduced); }},
      {"E2", [&](const Backend& b, bool full) { return e2_contrast(b, full ? lex : reduced); }},
      {"E3", [&](const Backend& b, bool full) { return e3_contrast(b, full ? completion : no_completion, reading); }},
      {"E4", [&](const Backend& b, bool) { return e4_contrast(b, reading); }},
  };
  const int kNullRuns = 1000;
  bool all = true;
  for (const auto& e : exps) {
    auto backend = make_planted_backend(planted(1), lex);
    auto c = e.contrast(*backend, true);
    auto t = posthoc_ttest(c.a, c.b, true);
    const bool recovered = c.ordered && t.estimate > 0 && t.p_value < kDefaultAlpha;

    int rejections = 0;
    for (int seed = 1; seed <= kNullRuns; ++seed) {
      auto nb = make_planted_backend(null(static_cast<uint64_t>(seed)), e.name == "E1" || e.name == "E2" ? reduced : lex);
      auto nc = e.contrast(*nb, false);
      try {
        rejections += posthoc_ttest(nc.a, nc.b, true).p_value < kDefaultAlpha;
      } catch (const DegenerateTest&) {
      }
    }
    const double rate = 100.0 * rejections / kNullRuns;
    const bool null_ok = rejections <= kNullRuns / 100;
    all = all && recovered && null_ok;
    o.notes.push_back(e.name + ": " + c.means + "; paired t = " + fmt("%.2f", t.t_value) + ", df " +
                      fmt("%.0f", t.df) + ", p = " + fmt("%.3g", t.p_value) + ", effect " + fmt("%+.3f", t.estimate) +
                      (recovered ? " (recovered)" : " (NOT recovered)") + "; null false rejection " +
                      std::to_string(rejections) + "/" + std::to_string(kNullRuns) + " = " + fmt("%.1f", rate) + "%");
  }
  o.passed = all;
  o.detail = "E1-E4 planted effects recovered at p < 0.005 with the planted sign; null false rejection <= 1% of " +
             std::to_string(kNullRuns) + " reruns each";
  return o;
}

// ---------------------------------------------------------------- statistics

double t_p_oracle(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 40000;
  const double a = std::abs(t), h = a / n;
  double s = f(0) + f(a);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return std::max(0.0, 1.0 - 2.0 * s * h / 3.0);
}

Outcome check_statistics() {
  const std::map<std::string, double> truth{{"(Intercept)", 1.0}, {"f[a]", 0.8}, {"x", 0.5}, {"f[a]:x", -0.3}};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise;
  std::uniform_real_distribution<double> ux(-2.0, 2.0);
  size_t covered = 0, trials = 0;
  const int reps = 1000, n = 400;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> x(n);
    for (auto& v : x) v = ux(rng);
    const double mx = mean(x);
    for (auto& v : x) v -= mx;
    Table t({"f", "x", "value"});
    for (int i = 0; i < n; ++i) {
      const double f = i % 2 ? 1.0 : -1.0;
      const double y = 1.0 + 0.8 * f + 0.5 * x[i] - 0.3 * f * x[i] + noise(rng);
      t.add_row({f > 0 ? "a" : "b", format_exact(x[i]), format_exact(y)});
    }
    ModelSpec spec;
    spec.factors = {{"f", Coding::sum}, {"x", Coding::continuous}};
    spec.interaction_order = 2;
    for (const auto& r : fit_linear(t, spec)) {
      ++trials;
      covered += std::abs(r.estimate - truth.at(r.term)) <= 2 * r.std_error;
    }
  }
  const double coverage = 100.0 * covered / trials;

  double worst = 0;
  std::mt19937_64 rng2(99);
  std::normal_distribution<double> z;
  std::vector<std::pair<double, double>> cases;
  for (double df : {1.0, 2.0, 4.5, 10.0, 30.0, 120.0, 1000.0}) {
    for (double t : {0.05, 0.5, 1.0, 1.96, 3.0, 5.0, 8.0}) cases.emplace_back(t, df);
  }
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(3 + i % 20), b(5 + i % 7);
    for (auto& v : a) v = z(rng2);
    for (auto& v : b) v = z(rng2) + 0.5;
    auto r = posthoc_ttest(a, b, false);
    cases.emplace_back(r.t_value, r.df);
  }
  for (auto [t, df] : cases) worst = std::max(worst, std::abs(t_two_sided_p(t, df) - t_p_oracle(t, df)));

  Outcome o;
  o.passed = coverage >= 95.0 && worst <= 1e-6;
  o.detail = "OLS 2-SE coverage " + fmt("%.2f", coverage) + "% of " + std::to_string(trials) + " (" +
             std::to_string(reps) + " replications x 4 coefficients, >= 95% required); t-test p vs numerical " +
             "t-CDF over " + std::to_string(cases.size()) + " cases, worst |diff| " + fmt("%.2e", worst);
  return o;
}

// ---------------------------------------------------------------- determinism

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto text = ss.str();
    if (e.path().extension() == ".json") {
      auto j = nlohmann::ordered_json::parse(text);
      j.erase("created");
      text = j.dump(2);
    }
    files[e.path().filename().string()] = text;
  }
  return files;
}

Outcome check_determinism() {
  auto dir = scratch("determinism");
  auto p = [&](const std::string& f) { return (dir / f).string(); };
  std::vector<std::vector<std::string>> steps{
      {"gen", "--kind", "referential", "--condition", "mismatch", "--output", p("stimuli.jsonl")},
      {"run", "--experiment", "E1", "--seeds", "1-2", "--output", p("e1.tsv")},
      {"stats", "--input", p("e1.tsv"), "--output", p("e1.stats.tsv"), "--where", "antecedent=subject|object",
       "--factors", "bias_category:sum,antecedent:sum", "--order", "2", "--item_effects", "true", "--item_column",
       "pair", "--posthoc_column", "antecedent", "--posthoc_a", "subject", "--posthoc_b", "object", "--posthoc_by",
       "bias_category"},
      {"plot", "--kind", "pronoun_surprisal", "--input", p("e1.tsv"), "--output", p("e1.svg")},
  };
  std::vector<std::map<std::string, std::string>> runs;
  std::string failure;
  for (int round = 0; round < 2 && failure.empty(); ++round) {
    for (const auto& args : steps) {
      std::ostringstream out, err;
      if (int code = cli(args, out, err); code != 0) {
        failure = args[0] + " exited " + std::to_string(code) + ": " + err.str();
        break;
      }
    }
    runs.push_back(snapshot(dir));
  }
  Outcome o;
  if (!failure.empty()) {
    o.detail = failure;
    return o;
  }
  size_t differing = 0;
  std::string first;
  for (const auto& [name, text] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != text) {
      ++differing;
      if (first.empty()) first = name;
    }
  }
  o.passed = differing == 0 && runs[0].size() == runs[1].size() && runs[0].size() >= 8;
  o.detail = "gen -> run -> stats -> plot twice: " + std::to_string(runs[0].size()) + " files, " +
             std::to_string(differing) + " differ (manifest timestamps excluded)" +
             (first.empty() ? "" : "; first: " + first);
  return o;
}

// ---------------------------------------------------------------- external backend

std::optional<Outcome> check_external() {
  const char* dir = std::getenv(std::string(PrecomputedBackend::kCacheEnv).c_str());
  if (!dir || !*dir || !fs::is_directory(dir)) return std::nullopt;
  Outcome o;
  o.passed = true;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".jsonl") continue;
    const auto model = e.path().stem().string();
    try {
      ExperimentSpec spec;
      spec.experiment = Experiment::E3_syn_behavior;
      spec.backend = "precomputed";
      spec.backend_params = {{"model", model}};
      auto r = run_experiment(spec, bundled());
      o.notes.push_back(model + ": higher attachment " + fmt("%.1f", r.summary["higher_preference_pct.ic"]) +
                        "% (IC), " + fmt("%.1f", r.summary["higher_preference_pct.nonic"]) + "% (non-IC); " +
                        std::to_string(r.drops.size()) + " dropped");
    } catch (const std::exception& ex) {
      o.passed = false;
      o.notes.push_back(model + ": " + ex.what());
    }
  }
  o.detail = std::to_string(o.notes.size()) + " cached model(s) scored";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"stimulus counts", check_counts},
      {"bias categorization", check_bias_categories},
      {"surprisal identities", check_surprisal_identities},
      {"pearson properties", check_pearson},
      {"cloze oracle", check_cloze_oracle},
      {"planted-effect recovery", check_planted_recovery},
      {"statistics oracle", check_statistics},
      {"pipeline determinism", check_determinism},
  };
  bool ok = true;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ok = ok && o.passed;
    std::cout << (o.passed ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt("%.1f", secs) << " s]\n";
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
  }
  if (auto ext = check_external()) {
    std::cout << (ext->passed ? "PASS " : "FAIL ") << "external backend (informational, non-gating): " << ext->detail
              << '\n';
    for (const auto& n : ext->notes) std::cout << "    " << n << '\n';
  } else {
    std::cout << "SKIP external backend (informational, non-gating): " << PrecomputedBackend::kCacheEnv
              << " not set; see tools/hf_score.py\n";
  }
  return ok ? 0 : 1;
}
