#include "icprobe/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "icprobe/config.hpp"
#include "icprobe/error.hpp"
#include "icprobe/experiments.hpp"
#include "icprobe/figures.hpp"
#include "icprobe/records.hpp"
#include "icprobe/report.hpp"
#include "icprobe/selfcheck.hpp"
#include "icprobe/stats.hpp"

namespace icprobe {

namespace {

struct KeyDoc {
  std::string name;
  std::string help;
  std::string fallback;  // empty: no default
};

const std::vector<KeyDoc> kLexiconKeys{
    {"norms", "verb bias norms TSV", ""},
    {"pairs", "gendered noun pairs TSV", ""},
    {"completion", "completion RC items TSV", ""},
    {"reading", "reading RC items TSV", ""},
    {"vocab", "reference vocabulary; verbs outside it are dropped ('none' disables)", ""},
};

std::vector<KeyDoc> with_lexicon_keys(std::vector<KeyDoc> keys) {
  keys.insert(keys.end(), kLexiconKeys.begin(), kLexiconKeys.end());
  keys.push_back({"manifest", "run manifest path (default: <output>.manifest.json)", ""});
  return keys;
}

const std::vector<KeyDoc>& gen_keys() {
  static const auto keys = with_lexicon_keys({
      {"kind", "referential | completion | rc_reading", "referential"},
      {"condition", "referential gender condition: mismatch | match", "mismatch"},
      {"pronoun", "append a pronoun to referential frames: none | she | he", "none"},
      {"output", "stimulus file (JSON lines)", ""},
  });
  return keys;
}

const std::vector<KeyDoc>& run_keys() {
  static const auto keys = with_lexicon_keys({
      {"experiment", "E1_ref_behavior | E2_ref_representation | E3_syn_behavior | E4_syn_representation (or E1..E4)", ""},
      {"backend", "backend name: bigram | planted | precomputed | subword | tiny_lstm | uniform", "planted"},
      {"seeds", "model seeds, comma list with optional ranges (1-25)", "1"},
      {"k", "cloze window size", "100"},
      {"output", "record table (.tsv or .jsonl)", ""},
      {"e4_stimuli", "E4 stimulus set: rc_reading | completion", "rc_reading"},
      {"policy", "parallel | serial", "parallel"},
      {"threads", "OpenMP threads (0: runtime default)", "0"},
      {"verb_forms", "verb form lexicon for the cloze measure", ""},
  });
  return keys;
}

const std::vector<KeyDoc>& stats_keys() {
  static const std::vector<KeyDoc> keys{
      {"input", "record table", ""},
      {"output", "result table (TSV); a .summary.txt goes next to it", ""},
      {"response", "response column", "value"},
      {"factors", "comma list of column[:sum|:continuous]", ""},
      {"order", "highest interaction order", "1"},
      {"item_effects", "add item indicator columns", "false"},
      {"item_column", "item column", "item"},
      {"threshold", "significance threshold", "0.005"},
      {"bonferroni", "Bonferroni-correct the model terms", "false"},
      {"where", "row filter 'col=a|b; col2=c'", ""},
      {"posthoc_column", "column that splits the post-hoc groups", ""},
      {"posthoc_a", "level of posthoc_column for group A", ""},
      {"posthoc_b", "level of posthoc_column for group B (test is B - A)", ""},
      {"posthoc_paired", "paired t-test", "false"},
      {"posthoc_pair_on", "comma list of columns that identify a pair", ""},
      {"posthoc_by", "comma list of columns; one test per combination of their levels", ""},
      {"manifest", "run manifest path (default: <output>.manifest.json)", ""},
  };
  return keys;
}

const std::vector<KeyDoc>& plot_keys() {
  static const std::vector<KeyDoc> keys{
      {"kind", "pronoun_surprisal | pronoun_similarity | rc_similarity_who | rc_surprisal | rc_similarity_verb", ""},
      {"input", "record table", ""},
      {"output", "SVG path; the aggregated table is written next to it as .tsv", ""},
      {"facet", "facet column", "model_id"},
      {"layer_stride", "keep every n-th layer", "1"},
      {"manifest", "run manifest path (default: <output>.manifest.json)", ""},
  };
  return keys;
}

std::vector<std::string> key_names(const std::vector<KeyDoc>& keys) {
  std::vector<std::string> names;
  for (auto& k : keys) names.push_back(k.name);
  return names;
}

// Resolved settings for one subcommand: defaults < config file < flags.
struct Settings {
  std::string section;
  std::map<std::string, std::string> values;
  BackendParams backend;
  std::string config_path;

  const std::string& get(const std::string& key) const {
    static const std::string empty;
    auto it = values.find(key);
    return it == values.end() ? empty : it->second;
  }
  const std::string& required(const std::string& key) const {
    const auto& v = get(key);
    if (v.empty()) throw UsageError(section + ": '" + key + "' is required");
    return v;
  }
};

struct Command {
  CLI::App* app = nullptr;
  std::string config;
  std::vector<std::string> params;  // backend key=value
  std::map<std::string, std::string> flags;
};

void bind_keys(Command& c, const std::vector<KeyDoc>& keys, bool backend_params) {
  c.app->add_option("--config", c.config, "INI config file; keys are read from the [" + c.app->get_name() + "] section");
  for (auto& k : keys) {
    std::string help = k.help;
    if (!k.fallback.empty()) help += " [default: " + k.fallback + "]";
    c.app->add_option("--" + k.name, c.flags[k.name], help);
  }
  if (backend_params) {
    c.app->add_option("--param", c.params, "backend parameter key=value (also the [backend] section)");
  }
}

Settings resolve(const Command& c, const std::vector<KeyDoc>& keys) {
  Settings s;
  s.section = c.app->get_name();
  s.config_path = c.config;
  for (auto& k : keys) {
    if (!k.fallback.empty()) s.values[k.name] = k.fallback;
  }
  if (!c.config.empty()) {
    auto cfg = Config::load(c.config);
    cfg.check_keys(s.section, key_names(keys));
    for (auto& [k, v] : cfg.section(s.section)) s.values[k] = v;
    for (auto& [k, v] : cfg.section("backend")) s.backend[k] = v;
  }
  for (auto& [k, v] : c.flags) {
    if (!v.empty()) s.values[k] = v;
  }
  for (auto& p : c.params) {
    auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + p + "'");
    s.backend[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return s;
}

LexiconPaths lexicon_paths(const Settings& s) {
  auto p = LexiconPaths::bundled();
  if (!s.get("norms").empty()) p.norms = s.get("norms");
  if (!s.get("pairs").empty()) p.pairs = s.get("pairs");
  if (!s.get("completion").empty()) p.completion = s.get("completion");
  if (!s.get("reading").empty()) p.reading = s.get("reading");
  if (s.get("vocab") == "none") p.vocab.clear();
  else if (!s.get("vocab").empty()) p.vocab = s.get("vocab");
  return p;
}

void add_lexicon_inputs(RunManifest& m, const LexiconPaths& p) {
  add_input(m, "norms", p.norms);
  add_input(m, "pairs", p.pairs);
  add_input(m, "completion", p.completion);
  add_input(m, "reading", p.reading);
  if (!p.vocab.empty()) add_input(m, "vocab", p.vocab);
}

std::filesystem::path manifest_path(const Settings& s, const std::string& output) {
  if (s.get("manifest").empty()) return output + ".manifest.json";
  return s.get("manifest");
}

RunManifest start_manifest(const Settings& s) {
  RunManifest m;
  m.command = s.section;
  m.created = utc_timestamp();
  for (auto& [k, v] : s.values) m.spec[k] = v;
  for (auto& [k, v] : s.backend) m.spec["backend." + k] = v;
  if (!s.config_path.empty()) add_input(m, "config", s.config_path);
  return m;
}

uint64_t parse_u64(const std::string& s, const std::string& what) {
  auto v = parse_double(s);
  if (!v || *v < 0 || std::floor(*v) != *v) throw UsageError(what + ": '" + s + "' is not a non-negative integer");
  return static_cast<uint64_t>(*v);
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
  std::vector<uint64_t> seeds;
  for (auto& part : split_list(s)) {
    auto dash = part.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(parse_u64(part, "seeds"));
      continue;
    }
    const auto lo = parse_u64(part.substr(0, dash), "seeds"), hi = parse_u64(part.substr(dash + 1), "seeds");
    if (hi < lo) throw UsageError("seeds: empty range '" + part + "'");
    for (auto x = lo; x <= hi; ++x) seeds.push_back(x);
  }
  if (seeds.empty()) throw UsageError("seeds: no seeds given");
  return seeds;
}

int cmd_gen(const Settings& s, std::ostream& out) {
  const auto output = s.required("output");
  const auto paths = lexicon_paths(s);
  const auto lex = load_lexicons(paths);
  const auto kind = parse_stimulus_kind(s.get("kind"));
  StimulusSet set;
  if (kind == StimulusKind::referential) {
    set = gen_referential(lex.norms, lex.pairs, parse_gender_condition(s.get("condition")));
    const auto& pronoun = s.get("pronoun");
    if (pronoun == "she" || pronoun == "he") {
      const Gender g = pronoun == "she" ? Gender::female : Gender::male;
      for (auto& st : set.stimuli) st = append_pronoun(st, g);
      set.provenance["pronoun"] = pronoun;
    } else if (pronoun != "none") {
      throw UsageError("gen: pronoun must be none, she or he");
    }
  } else if (kind == StimulusKind::completion) {
    set = gen_completion(lex.completion_items);
  } else {
    set = gen_rc_reading(lex.reading_items);
  }
  {
    std::ofstream f(output, std::ios::binary);
    if (!f) throw IoError("cannot write " + output);
    write_stimuli(f, set);
    if (!(f << std::flush)) throw IoError("error writing " + output);
  }
  auto m = start_manifest(s);
  add_lexicon_inputs(m, paths);
  m.counts["stimuli"] = set.stimuli.size();
  m.counts["verbs_dropped_by_vocab"] = lex.norms_dropped.size();
  write_manifest(m, manifest_path(s, output));
  out << "wrote " << set.stimuli.size() << " " << to_string(kind) << " stimuli to " << output << '\n';
  return 0;
}

std::filesystem::path sibling(const std::string& output, const std::string& suffix) {
  std::filesystem::path p(output);
  return p.parent_path() / (p.stem().string() + suffix);
}

int cmd_run(const Settings& s, std::ostream& out) {
  ExperimentSpec spec;
  spec.experiment = parse_experiment(s.required("experiment"));
  spec.backend = s.required("backend");
  spec.backend_params = s.backend;
  spec.lexicons = lexicon_paths(s);
  spec.cloze_k = static_cast<size_t>(parse_u64(s.get("k"), "k"));
  spec.output = s.required("output");
  spec.seeds = parse_seeds(s.get("seeds"));
  spec.e4_stimuli = parse_stimulus_kind(s.get("e4_stimuli"));
  if (s.get("policy") == "serial") spec.policy = ExecutionPolicy::serial;
  else if (s.get("policy") == "parallel") spec.policy = ExecutionPolicy::parallel;
  else throw UsageError("run: policy must be parallel or serial");
  if (!s.get("verb_forms").empty()) spec.verb_forms = s.get("verb_forms");
  if (auto threads = parse_u64(s.get("threads"), "threads"); threads > 0) omp_set_num_threads(static_cast<int>(threads));

  const auto lex = load_lexicons(spec.lexicons);
  std::vector<BackendDescriptor> descriptors;
  auto result = run_experiment(spec, lex, &descriptors);

  const auto output = spec.output.string();
  write_table(result.records, spec.output, format_for(spec.output));
  write_text_table(drops_to_table(result.drops), sibling(output, ".drops.tsv"));
  if (spec.experiment == Experiment::E3_syn_behavior) {
    write_text_table(preferences_to_table(result.preferences), sibling(output, ".preferences.tsv"));
  }

  auto m = start_manifest(s);
  m.seed = spec.seeds.front();
  m.backends = descriptors;
  add_lexicon_inputs(m, spec.lexicons);
  if (spec.experiment == Experiment::E3_syn_behavior) {
    add_input(m, "verb_forms", spec.verb_forms.empty() ? data_dir() / "verb_forms.txt" : spec.verb_forms);
  }
  for (const char* key : {"corpus", "checkpoint", "path"}) {
    auto it = spec.backend_params.find(key);
    if (it != spec.backend_params.end() && std::filesystem::is_regular_file(it->second)) {
      add_input(m, std::string("backend.") + key, it->second);
    }
  }
  if ((spec.backend == "bigram" || spec.backend == "tiny_lstm") && !spec.backend_params.contains("corpus") &&
      !spec.backend_params.contains("checkpoint")) {
    add_input(m, "backend.corpus", data_dir() / "toy_corpus.txt");
  }
  m.counts["records"] = result.records.size();
  m.counts["dropped"] = result.drops.size();
  m.counts["expected"] = result.expected;
  m.counts["preferences"] = result.preferences.size();
  m.drops = summarize_drops(result.drops);
  write_manifest(m, manifest_path(s, output));

  out << to_string(spec.experiment) << ": " << result.records.size() << " records, " << result.drops.size()
      << " dropped of " << result.expected << " expected -> " << output << '\n';
  for (auto& [k, v] : result.summary) {
    if (k.rfind("higher_preference_pct", 0) == 0) out << "  " << k << " = " << format_fixed(v) << '\n';
  }
  return 0;
}

Table apply_where(Table t, const std::string& where) {
  for (auto& clause : split_list(where, ';')) {
    auto eq = clause.find('=');
    if (eq == std::string::npos) throw UsageError("where: expected col=value, got '" + clause + "'");
    auto col = clause.substr(0, eq);
    while (!col.empty() && col.back() == ' ') col.pop_back();
    auto values = split_list(clause.substr(eq + 1), '|');
    t = t.filter(col, std::set<std::string>(values.begin(), values.end()));
  }
  return t;
}

std::vector<StatResult> run_posthoc(const Table& t, const Settings& s, double threshold) {
  const auto& col = s.get("posthoc_column");
  if (col.empty()) return {};
  const auto a = s.required("posthoc_a"), b = s.required("posthoc_b");
  const bool paired = parse_bool(s.get("posthoc_paired"));
  const auto by = split_list(s.get("posthoc_by"));
  const auto pair_on = split_list(s.get("posthoc_pair_on"));
  if (paired && pair_on.empty()) throw UsageError("stats: posthoc_paired needs posthoc_pair_on");
  const size_t c = t.column(col);
  const size_t v = t.column(s.get("response"));
  std::vector<size_t> by_cols, pair_cols;
  for (auto& x : by) by_cols.push_back(t.column(x));
  for (auto& x : pair_on) pair_cols.push_back(t.column(x));

  auto key_of = [&](size_t row, const std::vector<size_t>& cols) {
    std::string k;
    for (size_t i = 0; i < cols.size(); ++i) k += (i ? "," : "") + t.at(row, cols[i]);
    return k;
  };
  // by-level -> group -> pair key -> value
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> groups;
  std::map<std::string, std::map<std::string, std::vector<double>>> lists;
  for (size_t r = 0; r < t.size(); ++r) {
    const auto& g = t.at(r, c);
    if (g != a && g != b) continue;
    auto value = parse_double(t.at(r, v));
    if (!value || std::isnan(*value)) continue;
    const auto level = key_of(r, by_cols);
    if (paired) {
      auto [it, fresh] = groups[level][g].emplace(key_of(r, pair_cols), *value);
      if (!fresh) throw UsageError("stats: pair key '" + it->first + "' is not unique within group " + g);
    } else {
      lists[level][g].push_back(*value);
    }
  }
  std::vector<StatResult> out;
  std::set<std::string> levels;
  for (auto& [l, x] : groups) levels.insert(l);
  for (auto& [l, x] : lists) levels.insert(l);
  for (auto& level : levels) {
    std::vector<double> va, vb;
    if (paired) {
      auto& ga = groups[level][a];
      auto& gb = groups[level][b];
      for (auto& [k, x] : ga) {
        auto it = gb.find(k);
        if (it == gb.end()) continue;
        va.push_back(x);
        vb.push_back(it->second);
      }
    } else {
      va = lists[level][a];
      vb = lists[level][b];
    }
    std::string label = "posthoc " + col + ": " + b + " - " + a;
    if (!by.empty()) label += " [" + s.get("posthoc_by") + "=" + level + "]";
    try {
      auto r = posthoc_ttest(va, vb, paired, threshold);
      r.term = label;
      out.push_back(r);
    } catch (const DegenerateTest& e) {
      StatResult r;
      r.term = label + " (degenerate: " + e.what() + ")";
      r.t_value = std::numeric_limits<double>::quiet_NaN();
      out.push_back(r);
    }
  }
  return out;
}

int cmd_stats(const Settings& s, std::ostream& out) {
  const auto input = s.required("input");
  const auto output = s.required("output");
  Table t = apply_where(records_to_table(read_table(input)), s.get("where"));

  ModelSpec spec;
  spec.response = s.get("response");
  spec.interaction_order = static_cast<int>(parse_u64(s.get("order"), "order"));
  spec.item_effects = parse_bool(s.get("item_effects"));
  spec.item_column = s.get("item_column");
  spec.threshold = *parse_double(s.get("threshold"));
  spec.bonferroni = parse_bool(s.get("bonferroni"));
  for (auto& f : split_list(s.get("factors"))) {
    auto colon = f.find(':');
    if (colon == std::string::npos) spec.factors.push_back({f, Coding::sum});
    else spec.factors.push_back({f.substr(0, colon), parse_coding(f.substr(colon + 1))});
  }

  std::vector<StatResult> results;
  if (!spec.factors.empty()) results = fit_linear(t, spec);
  auto posthoc = run_posthoc(t, s, spec.threshold);
  results.insert(results.end(), posthoc.begin(), posthoc.end());
  if (results.empty()) throw UsageError("stats: nothing to do (set factors and/or posthoc_column)");

  write_text_table(to_table(results, spec.threshold), output);
  std::ostringstream summary;
  summary << "rows used: " << t.size() << "\n";
  for (auto& r : results) {
    char p[32];
    std::snprintf(p, sizeof p, "%.3g", r.p_value);
    summary << r.term << ": estimate " << format_fixed(r.estimate) << ", t(" << format_fixed(r.df) << ") = "
            << format_fixed(r.t_value) << ", p = " << p;
    if (!std::isnan(r.t_value)) summary << " [" << significance_label(r.p_value, spec.threshold) << "]";
    summary << '\n';
  }
  {
    auto path = std::filesystem::path(output).replace_extension(".summary.txt");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << summary.str();
  }
  auto m = start_manifest(s);
  add_input(m, "input", input);
  m.counts["rows"] = t.size();
  m.counts["results"] = results.size();
  write_manifest(m, manifest_path(s, output));
  out << summary.str();
  return 0;
}

int cmd_plot(const Settings& s, std::ostream& out) {
  FigureSpec spec;
  spec.kind = parse_figure_kind(s.required("kind"));
  spec.input = s.required("input");
  spec.output = s.required("output");
  spec.facet = s.get("facet");
  spec.layer_stride = static_cast<int>(parse_u64(s.get("layer_stride"), "layer_stride"));
  auto files = emit_figure(spec);
  auto m = start_manifest(s);
  add_input(m, "input", spec.input);
  add_input(m, "figure_table", files.table);
  add_input(m, "figure_image", files.image);
  write_manifest(m, manifest_path(s, spec.output.string()));
  out << "wrote " << files.image.string() << " and " << files.table.string() << '\n';
  return 0;
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Implicit-causality probing toolkit: stimulus generation, LM measurement, statistics and figures."};
  app.name("icprobe");
  app.require_subcommand(1);

  std::vector<std::pair<Command, const std::vector<KeyDoc>*>> commands;
  auto make = [&](const std::string& name, const std::string& help, const std::vector<KeyDoc>& keys) {
    Command c;
    c.app = app.add_subcommand(name, help);
    commands.emplace_back(std::move(c), &keys);
  };
  commands.reserve(5);
  make("gen", "generate a stimulus set", gen_keys());
  make("run", "run an experiment (E1-E4) and write its record table", run_keys());
  make("stats", "fit a linear model and post-hoc t-tests on a record table", stats_keys());
  make("plot", "aggregate a record table and draw a figure", plot_keys());
  auto* selfcheck = app.add_subcommand("selfcheck", "run the analytic-backend invariant suite");
  for (auto& [c, keys] : commands) bind_keys(c, *keys, c.app->get_name() == "run");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (selfcheck->parsed()) return print_checks(out, run_selfcheck()) ? 0 : 1;
    for (auto& [c, keys] : commands) {
      if (!c.app->parsed()) continue;
      const auto s = resolve(c, *keys);
      const auto& name = c.app->get_name();
      if (name == "gen") return cmd_gen(s, out);
      if (name == "run") return cmd_run(s, out);
      if (name == "stats") return cmd_stats(s, out);
      return cmd_plot(s, out);
    }
  } catch (const UsageError& e) {
    err << "icprobe: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "icprobe: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace icprobe
