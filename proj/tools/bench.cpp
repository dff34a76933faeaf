// Times the serial and OpenMP experiment paths on the same inputs and checks
// that they produce identical tables.
#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <iostream>

#include "icprobe/backends/planted.hpp"
#include "icprobe/experiments.hpp"

using namespace icprobe;

namespace {

template <class F>
double seconds(F&& f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP benchmark of the experiment drivers"};
  int repeats = 3;
  int threads = 0;
  std::string experiment = "E2";
  app.add_option("--repeats", repeats, "timed repetitions per path")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)");
  app.add_option("--experiment", experiment, "E1..E4");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  const auto lex = load_lexicons(LexiconPaths::bundled());
  PlantedDesign design;
  design.base.jitter_bits = 0.1;
  const auto backend = make_planted_backend(design, lex);
  ExperimentOptions opts;
  opts.model_id = "planted";
  opts.verb_forms = load_verb_forms(data_dir() / "verb_forms.txt");

  const auto e = parse_experiment(experiment);
  const auto mismatch = gen_referential(lex.norms, lex.pairs, GenderCondition::mismatch);
  const auto match = gen_referential(lex.norms, lex.pairs, GenderCondition::match);
  const auto completion = gen_completion(lex.completion_items);
  const auto reading = gen_rc_reading(lex.reading_items);
  auto run = [&](ExecutionPolicy p) {
    opts.policy = p;
    switch (e) {
      case Experiment::E1_ref_behavior: return run_E1(mismatch, *backend, opts);
      case Experiment::E2_ref_representation: return run_E2(match, *backend, opts);
      case Experiment::E3_syn_behavior: return run_E3(completion, reading, *backend, opts);
      case Experiment::E4_syn_representation: return run_E4(reading, *backend, opts);
    }
    return ExperimentResult{};
  };

  ExperimentResult serial, parallel;
  double ts = 1e300, tp = 1e300;
  for (int i = 0; i < repeats; ++i) {
    ts = std::min(ts, seconds([&] { serial = run(ExecutionPolicy::serial); }));
    tp = std::min(tp, seconds([&] { parallel = run(ExecutionPolicy::parallel); }));
  }
  const bool same = serial.records == parallel.records && serial.drops == parallel.drops &&
                    serial.preferences == parallel.preferences;
  std::cout << to_string(e) << ": " << serial.records.size() << " records, threads=" << omp_get_max_threads() << '\n'
            << "serial   " << ts << " s\n"
            << "parallel " << tp << " s (speedup " << ts / tp << "x)\n"
            << "tables identical: " << (same ? "yes" : "NO") << '\n';
  return same ? 0 : 1;
}
