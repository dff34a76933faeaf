#include "icprobe/backends/registry.hpp"

#include <set>

#include "icprobe/backends/bigram.hpp"
#include "icprobe/backends/planted.hpp"
#include "icprobe/backends/precomputed.hpp"
#include "icprobe/backends/subword.hpp"
#include "icprobe/backends/tiny_lstm.hpp"
#include "icprobe/backends/uniform.hpp"

namespace icprobe {
namespace {

class ParamReader {
 public:
  ParamReader(const std::string& backend, const BackendParams& params) : backend_(backend), params_(params) {}

  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) {
    auto s = str(key, "");
    if (s.empty()) return fallback;
    try {
      size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("backend " + backend_ + ": parameter '" + key + "' is not a number: '" + s + "'");
    }
  }
  int integer(const std::string& key, int fallback) { return static_cast<int>(num(key, fallback)); }

  void finish() const {
    for (const auto& [k, v] : params_) {
      if (!used_.contains(k)) throw UsageError("backend " + backend_ + ": unknown parameter '" + k + "'");
    }
  }

 private:
  std::string backend_;
  const BackendParams& params_;
  std::set<std::string> used_;
};

std::vector<std::string> sorted(const WordSet& words) {
  std::set<std::string> s(words.begin(), words.end());
  return {s.begin(), s.end()};
}

}  // namespace

std::vector<std::string> backend_names() {
  return {"bigram", "planted", "precomputed", "subword", "tiny_lstm", "uniform"};
}

std::vector<std::string> chunked_pieces(const WordSet& words, size_t max_piece) {
  std::set<std::string> pieces;
  for (const auto& w : sorted(words)) {
    if (w.size() <= max_piece) {
      pieces.insert(w);
      continue;
    }
    for (size_t i = 0; i < w.size(); i += max_piece - 1) {
      auto chunk = w.substr(i, max_piece - 1);
      pieces.insert(i == 0 ? chunk : std::string(SubwordBackend::kContinuation) + chunk);
    }
  }
  return {pieces.begin(), pieces.end()};
}

std::unique_ptr<Backend> make_backend(const std::string& name, const BackendParams& params, const BackendContext& ctx,
                                      uint64_t seed) {
  ParamReader p(name, params);
  std::unique_ptr<Backend> backend;
  if (name == "uniform") {
    backend = std::make_unique<UniformBackend>(sorted(ctx.vocabulary), p.integer("n_layers", 2),
                                               p.integer("hidden_dim", 16), seed);
  } else if (name == "bigram") {
    auto corpus = load_corpus(p.str("corpus", (data_dir() / "toy_corpus.txt").string()));
    backend = std::make_unique<BigramBackend>(corpus, sorted(ctx.vocabulary), p.num("alpha", 0.1));
  } else if (name == "subword") {
    backend = std::make_unique<SubwordBackend>(chunked_pieces(ctx.vocabulary,
                                                              static_cast<size_t>(p.integer("max_piece", 5))),
                                               p.integer("n_layers", 2), p.integer("hidden_dim", 16), seed);
  } else if (name == "planted") {
    if (!ctx.lexicons) throw UsageError("planted backend needs lexicons");
    const auto effect = p.str("effect", "ic");
    PlantedDesign d;
    if (effect == "null") {
      d = PlantedDesign::null_design();
    } else if (effect == "local") {
      d.attachment = PlantedDesign::Attachment::local;
    } else if (effect != "ic") {
      throw UsageError("planted backend: effect must be ic, local or null");
    }
    d.p_favored = p.num("p_favored", d.p_favored);
    d.p_other = p.num("p_other", d.p_other);
    d.rc_mass = p.num("rc_mass", d.rc_mass);
    d.attachment_ratio = p.num("attachment_ratio", d.attachment_ratio);
    d.rep_weight = p.num("rep_weight", d.rep_weight);
    d.exact_layer = p.integer("exact_layer", d.exact_layer);
    d.base.n_layers = p.integer("n_layers", d.base.n_layers);
    d.base.hidden_dim = p.integer("hidden_dim", d.base.hidden_dim);
    d.base.noise = p.num("noise", d.base.noise);
    d.base.jitter_bits = p.num("jitter_bits", 0.1);
    d.base.seed = seed;
    backend = make_planted_backend(d, *ctx.lexicons, ctx.vocabulary);
  } else if (name == "tiny_lstm") {
    const auto checkpoint = p.str("checkpoint", "");
    if (!checkpoint.empty()) {
      backend = TinyLstmBackend::load(checkpoint);
    } else {
      TinyLmConfig c;
      c.n_layers = p.integer("n_layers", c.n_layers);
      c.hidden_dim = p.integer("hidden_dim", c.hidden_dim);
      c.embed_dim = p.integer("embed_dim", c.embed_dim);
      c.epochs = p.integer("epochs", c.epochs);
      c.batch_size = p.integer("batch_size", c.batch_size);
      c.learning_rate = p.num("learning_rate", c.learning_rate);
      c.seed = seed;
      auto corpus = load_corpus(p.str("corpus", (data_dir() / "toy_corpus.txt").string()));
      backend = TinyLstmBackend::train(corpus, sorted(ctx.vocabulary), c);
    }
  } else if (name == "precomputed") {
    const auto path = p.str("path", "");
    const auto model = p.str("model", "");
    if (!path.empty()) {
      backend = std::make_unique<PrecomputedBackend>(path, model);
    } else if (!model.empty()) {
      backend = PrecomputedBackend::from_cache(model);
    } else {
      throw UsageError("precomputed backend needs 'path' or 'model'");
    }
  } else {
    std::string names;
    for (const auto& n : backend_names()) names += (names.empty() ? "" : ", ") + n;
    throw UnknownBackend("unknown backend '" + name + "'; registered backends: " + names);
  }
  p.finish();
  return backend;
}

}  // namespace icprobe
