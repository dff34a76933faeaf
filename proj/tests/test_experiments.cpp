#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "icprobe/backends/planted.hpp"
#include "icprobe/backends/uniform.hpp"
#include "icprobe/error.hpp"
#include "icprobe/experiments.hpp"

using namespace icprobe;

namespace {

// A slice of the bundled lexicons that keeps both bias directions.
Lexicons small_lexicons() {
  const auto& full = testing::bundled();
  Lexicons lex = full;
  lex.norms.clear();
  int subj = 0, obj = 0;
  for (const auto& n : full.norms) {
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

ExperimentOptions opts(ExecutionPolicy policy = ExecutionPolicy::serial) {
  ExperimentOptions o;
  o.policy = policy;
  o.model_id = "m";
  o.verb_forms = load_verb_forms(data_dir() / "verb_forms.txt");
  return o;
}

PlantedDesign design(int n_layers) {
  PlantedDesign d;
  d.base.n_layers = n_layers;
  d.base.hidden_dim = 16;
  return d;
}

void sort_records(std::vector<MeasurementRecord>& rs) {
  std::sort(rs.begin(), rs.end(), [](const MeasurementRecord& a, const MeasurementRecord& b) {
    return std::tie(a.stim_id, a.region_role, a.anchor_role, a.target_role, a.layer) <
           std::tie(b.stim_id, b.region_role, b.anchor_role, b.target_role, b.layer);
  });
}

}  // namespace

TEST_CASE("experiment names") {
  CHECK(parse_experiment("E3") == Experiment::E3_syn_behavior);
  CHECK(parse_experiment(to_string(Experiment::E2_ref_representation)) == Experiment::E2_ref_representation);
  CHECK_THROWS(parse_experiment("E9"));
  CHECK(parse_location("tie") == PreferenceRecord::Location::tie);
}

TEST_CASE("E1 and E2 record shapes") {
  const auto lex = small_lexicons();
  auto backend = make_planted_backend(design(3), lex);
  auto mismatch = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch);
  auto match = gen_referential(lex.norms, lex.pairs, GenderCondition::match);

  auto e1 = run_E1(mismatch, *backend, opts());
  CHECK(e1.records.size() == 2 * mismatch.stimuli.size());
  CHECK(e1.expected == e1.records.size());
  for (const auto& r : e1.records) {
    CHECK(r.model_id == "m");
    CHECK(r.region_role == "pronoun");
    CHECK(r.conditions.count("bias_category") == 1);
    CHECK((r.conditions.at("antecedent") == "subject" || r.conditions.at("antecedent") == "object"));
  }

  auto e2 = run_E2(match, *backend, opts());
  CHECK(e2.records.size() == match.stimuli.size() * 2 * 3);
  CHECK(e2.drops.empty());
  CHECK(e2.records.front().conditions.at("gender_match") == "match");
}

TEST_CASE("E3 and E4 record shapes") {
  const auto& lex = testing::bundled();
  auto backend = make_planted_backend(design(2), lex);
  auto completion = gen_completion(lex.completion_items);
  auto reading = gen_rc_reading(lex.reading_items);

  auto e3 = run_E3(completion, reading, *backend, opts());
  CHECK(e3.expected == completion.stimuli.size() + reading.stimuli.size());
  CHECK(e3.records.size() + e3.drops.size() == e3.expected);
  CHECK(e3.preferences.size() == reading.stimuli.size() / 4);
  CHECK(e3.summary.at("pairs") == static_cast<double>(e3.preferences.size()));

  auto e4 = run_E4(reading, *backend, opts());
  CHECK(e4.records.size() == reading.stimuli.size() * 2 * 2 * 2);
  auto e4c = run_E4(completion, *backend, opts());
  CHECK(e4c.records.size() == completion.stimuli.size() * 2 * 2);
  for (const auto& r : e4c.records) CHECK(r.anchor_role == "relativizer");
}

TEST_CASE("serial and parallel runs agree and ignore stimulus order") {
  const auto lex = small_lexicons();
  auto d = design(2);
  d.base.jitter_bits = 0.2;
  auto backend = make_planted_backend(d, lex);
  auto frames = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch);

  auto serial = run_E1(frames, *backend, opts(ExecutionPolicy::serial));
  auto parallel = run_E1(frames, *backend, opts(ExecutionPolicy::parallel));
  CHECK(serial.records == parallel.records);

  auto shuffled = frames;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.stimuli.begin(), shuffled.stimuli.end(), rng);
  auto permuted = run_E1(shuffled, *backend, opts());
  sort_records(serial.records);
  sort_records(permuted.records);
  CHECK(serial.records == permuted.records);
}

TEST_CASE("E3 preferences follow the planted attachment") {
  const auto& lex = testing::bundled();
  auto completion = gen_completion(lex.completion_items);
  auto reading = gen_rc_reading(lex.reading_items);

  auto local = design(1);
  local.attachment = PlantedDesign::Attachment::local;
  auto r = run_E3(completion, reading, *make_planted_backend(local, lex), opts());
  CHECK(r.summary.at("higher_preference_pct") == 0.0);
  for (const auto& p : r.preferences) {
    CHECK(p.preferred == PreferenceRecord::Location::lower);
    CHECK(p.margin == doctest::Approx(1.0));
  }

  auto null = PlantedDesign::null_design();
  null.base.n_layers = 1;
  auto n = run_E3(completion, reading, *make_planted_backend(null, lex), opts());
  CHECK(n.summary.at("higher_preference_pct") == 50.0);
  for (const auto& p : n.preferences) CHECK(p.preferred == PreferenceRecord::Location::tie);

  auto ic = run_E3(completion, reading, *make_planted_backend(design(1), lex), opts());
  CHECK(ic.summary.at("higher_preference_pct.ic") == 100.0);
  CHECK(ic.summary.at("higher_preference_pct.nonic") == 0.0);
}

TEST_CASE("higher_preference_percent counts ties as half") {
  using L = PreferenceRecord::Location;
  std::vector<PreferenceRecord> prefs(4);
  prefs[0].preferred = L::higher;
  prefs[1].preferred = L::lower;
  prefs[2].preferred = L::tie;
  prefs[3].preferred = L::higher;
  CHECK(higher_preference_percent(prefs) == 62.5);
}

TEST_CASE("out-of-vocabulary stimuli are dropped and counted") {
  const auto lex = small_lexicons();
  auto frames = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch);
  auto vocab = stimulus_vocabulary(std::vector<StimulusSet>{frames});
  vocab.insert({"she", "he"});
  const auto missing = lex.pairs[0].male_form;
  vocab.erase(missing);
  UniformBackend backend(std::vector<std::string>(vocab.begin(), vocab.end()), 2, 8, 1);

  auto r = run_E1(frames, backend, opts(ExecutionPolicy::parallel));
  CHECK(r.records.size() + r.drops.size() == r.expected);
  REQUIRE_FALSE(r.drops.empty());
  for (const auto& d : r.drops) {
    CHECK(d.reason.starts_with("oov:"));
    CHECK(d.reason.find(missing) != std::string::npos);
  }
}

TEST_CASE("run_experiment stacks seeds") {
  ExperimentSpec spec;
  spec.experiment = Experiment::E4_syn_representation;
  spec.backend_params = {{"n_layers", "2"}, {"hidden_dim", "8"}};
  spec.seeds = {1, 2};
  std::vector<BackendDescriptor> descs;
  auto r = run_experiment(spec, testing::bundled(), &descs);
  CHECK(descs.size() == 2);
  CHECK(r.records.size() == 2 * 192 * 2 * 2 * 2);
  CHECK(r.summary.at("expected") == static_cast<double>(r.expected));
  CHECK(std::count_if(r.records.begin(), r.records.end(), [](auto& x) { return x.model_id == "planted-s2"; }) ==
        192 * 8);

  spec.backend = "nonesuch";
  CHECK_THROWS(run_experiment(spec, testing::bundled()));
}
