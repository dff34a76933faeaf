#include "icprobe/backends/tiny_lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "icprobe/error.hpp"
#include "icprobe/hashing.hpp"
#include "icprobe/lexicon.hpp"

namespace icprobe {

// Offsets into the flat parameter vector. Row-major matrices.
struct TinyLstmBackend::Layout {
  size_t vocab = 0;  // output vocabulary; embedding row `vocab` is the boundary token
  size_t embed = 0;
  size_t hidden = 0;
  size_t layers = 0;
  size_t emb = 0;
  std::vector<size_t> w, b, in_dim;
  size_t out_w = 0, out_b = 0, total = 0;

  Layout(size_t v, const TinyLmConfig& c)
      : vocab(v), embed(static_cast<size_t>(c.embed_dim)), hidden(static_cast<size_t>(c.hidden_dim)),
        layers(static_cast<size_t>(c.n_layers)) {
    size_t off = 0;
    emb = off;
    off += (vocab + 1) * embed;
    for (size_t l = 0; l < layers; ++l) {
      in_dim.push_back(l == 0 ? embed : hidden);
      w.push_back(off);
      off += 4 * hidden * (in_dim[l] + hidden);
      b.push_back(off);
      off += 4 * hidden;
    }
    out_w = off;
    off += vocab * hidden;
    out_b = off;
    off += vocab;
    total = off;
  }
};

namespace {

using Layout = TinyLstmBackend::Layout;
using Vec = std::vector<double>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-layer activations of one time step.
struct LayerStep {
  Vec in, h_prev, c_prev, i, f, g, o, c, tanh_c, h;
};

struct Step {
  std::vector<LayerStep> layers;
  Vec logits;
};

// Runs the network over `inputs` (embedding rows), returning every step.
std::vector<Step> forward(const Layout& L, const Vec& p, const std::vector<size_t>& inputs) {
  const size_t H = L.hidden;
  std::vector<Vec> h(L.layers, Vec(H, 0.0)), c(L.layers, Vec(H, 0.0));
  std::vector<Step> steps(inputs.size());
  for (size_t t = 0; t < inputs.size(); ++t) {
    Step& st = steps[t];
    st.layers.resize(L.layers);
    Vec x(p.begin() + static_cast<std::ptrdiff_t>(L.emb + inputs[t] * L.embed),
          p.begin() + static_cast<std::ptrdiff_t>(L.emb + (inputs[t] + 1) * L.embed));
    for (size_t l = 0; l < L.layers; ++l) {
      LayerStep& ls = st.layers[l];
      const size_t in = L.in_dim[l];
      const size_t cols = in + H;
      ls.in = x;
      ls.h_prev = h[l];
      ls.c_prev = c[l];
      Vec z(4 * H);
      const double* W = p.data() + L.w[l];
      const double* B = p.data() + L.b[l];
      for (size_t r = 0; r < 4 * H; ++r) {
        const double* row = W + r * cols;
        double acc = B[r];
        for (size_t k = 0; k < in; ++k) acc += row[k] * x[k];
        for (size_t k = 0; k < H; ++k) acc += row[in + k] * h[l][k];
        z[r] = acc;
      }
      ls.i.resize(H), ls.f.resize(H), ls.g.resize(H), ls.o.resize(H), ls.c.resize(H), ls.tanh_c.resize(H),
          ls.h.resize(H);
      for (size_t k = 0; k < H; ++k) {
        ls.i[k] = sigmoid(z[k]);
        ls.f[k] = sigmoid(z[H + k]);
        ls.g[k] = std::tanh(z[2 * H + k]);
        ls.o[k] = sigmoid(z[3 * H + k]);
        ls.c[k] = ls.f[k] * ls.c_prev[k] + ls.i[k] * ls.g[k];
        ls.tanh_c[k] = std::tanh(ls.c[k]);
        ls.h[k] = ls.o[k] * ls.tanh_c[k];
      }
      h[l] = ls.h;
      c[l] = ls.c;
      x = ls.h;
    }
    st.logits.resize(L.vocab);
    const double* Wo = p.data() + L.out_w;
    const double* Bo = p.data() + L.out_b;
    for (size_t v = 0; v < L.vocab; ++v) {
      double acc = Bo[v];
      const double* row = Wo + v * H;
      for (size_t k = 0; k < H; ++k) acc += row[k] * x[k];
      st.logits[v] = acc;
    }
  }
  return steps;
}

Vec softmax(const Vec& logits) {
  Vec out(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) z += (out[i] = std::exp(logits[i] - m));
  for (auto& v : out) v /= z;
  return out;
}

double log_sum_exp(const Vec& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return m + std::log(z);
}

// Accumulates d(loss)/d(params) into `grad` for one sentence; returns the
// summed negative log-likelihood in nats.
double backward(const Layout& L, const Vec& p, const std::vector<size_t>& inputs, const std::vector<size_t>& targets,
                Vec& grad) {
  const size_t H = L.hidden;
  auto steps = forward(L, p, inputs);
  double nll = 0.0;
  std::vector<Vec> dh_next(L.layers, Vec(H, 0.0)), dc_next(L.layers, Vec(H, 0.0));
  for (size_t t = steps.size(); t-- > 0;) {
    Step& st = steps[t];
    Vec probs = softmax(st.logits);
    nll -= std::log(probs[targets[t]]);
    probs[targets[t]] -= 1.0;

    const Vec& top = st.layers.back().h;
    Vec dh(H, 0.0);
    for (size_t v = 0; v < L.vocab; ++v) {
      const double d = probs[v];
      grad[L.out_b + v] += d;
      double* gw = grad.data() + L.out_w + v * H;
      const double* w = p.data() + L.out_w + v * H;
      for (size_t k = 0; k < H; ++k) {
        gw[k] += d * top[k];
        dh[k] += d * w[k];
      }
    }
    for (size_t l = L.layers; l-- > 0;) {
      const LayerStep& ls = st.layers[l];
      const size_t in = L.in_dim[l];
      const size_t cols = in + H;
      Vec dz(4 * H);
      for (size_t k = 0; k < H; ++k) {
        const double dhk = dh[k] + dh_next[l][k];
        const double dc = dhk * ls.o[k] * (1.0 - ls.tanh_c[k] * ls.tanh_c[k]) + dc_next[l][k];
        dz[k] = dc * ls.g[k] * ls.i[k] * (1.0 - ls.i[k]);
        dz[H + k] = dc * ls.c_prev[k] * ls.f[k] * (1.0 - ls.f[k]);
        dz[2 * H + k] = dc * ls.i[k] * (1.0 - ls.g[k] * ls.g[k]);
        dz[3 * H + k] = dhk * ls.tanh_c[k] * ls.o[k] * (1.0 - ls.o[k]);
        dc_next[l][k] = dc * ls.f[k];
      }
      Vec dx(in, 0.0), dhp(H, 0.0);
      const double* W = p.data() + L.w[l];
      double* gW = grad.data() + L.w[l];
      for (size_t r = 0; r < 4 * H; ++r) {
        const double d = dz[r];
        grad[L.b[l] + r] += d;
        const double* row = W + r * cols;
        double* grow = gW + r * cols;
        for (size_t k = 0; k < in; ++k) {
          grow[k] += d * ls.in[k];
          dx[k] += d * row[k];
        }
        for (size_t k = 0; k < H; ++k) {
          grow[in + k] += d * ls.h_prev[k];
          dhp[k] += d * row[in + k];
        }
      }
      dh_next[l] = std::move(dhp);
      if (l > 0) {
        dh = std::move(dx);
      } else {
        double* ge = grad.data() + L.emb + inputs[t] * L.embed;
        for (size_t k = 0; k < L.embed; ++k) ge[k] += dx[k];
      }
    }
  }
  return nll;
}

constexpr char kMagic[] = "ICPTLM01";

}  // namespace

TinyLstmBackend::TinyLstmBackend(std::vector<std::string> vocab, TinyLmConfig config)
    : vocab_(std::make_shared<Vocabulary>(std::move(vocab))), config_(config) {
  if (config_.n_layers < 1 || config_.hidden_dim < 1 || config_.embed_dim < 1) {
    throw UsageError("tiny LM: layer count and widths must be >= 1");
  }
  desc_.name = "tiny_lstm";
  desc_.vocab_size = vocab_->size();
  desc_.n_layers = config_.n_layers;
  desc_.hidden_dim = config_.hidden_dim;
  desc_.seed = config_.seed;
  desc_.params["embed_dim"] = std::to_string(config_.embed_dim);
  desc_.params["epochs"] = std::to_string(config_.epochs);
  desc_.params["learning_rate"] = std::to_string(config_.learning_rate);
  desc_.params["batch_size"] = std::to_string(config_.batch_size);
  Layout L(vocab_->size(), config_);
  params_.assign(L.total, 0.0);
  for (size_t j = 0; j < L.total; ++j) {
    params_[j] = config_.init_scale * (2.0 * hash_uniform(mix(config_.seed, j)) - 1.0);
  }
  for (size_t l = 0; l < L.layers; ++l) {
    for (size_t k = 0; k < L.hidden; ++k) params_[L.b[l] + L.hidden + k] = 1.0;  // forget-gate bias
  }
}

std::vector<size_t> TinyLstmBackend::indices(std::span<const std::string> words) const {
  std::vector<size_t> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    auto i = vocab_->find(w);
    if (!i) throw OovError(w, "'" + join_words(words) + "'");
    out.push_back(*i);
  }
  return out;
}

std::unique_ptr<TinyLstmBackend> TinyLstmBackend::train(const Corpus& corpus,
                                                        const std::vector<std::string>& extra_vocab,
                                                        const TinyLmConfig& config, TrainingLog* log) {
  if (corpus.empty()) throw UsageError("train_tiny_lm: empty corpus");
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  for (const auto& s : corpus) {
    for (const auto& w : s) {
      if (seen.insert(w).second) vocab.push_back(w);
    }
  }
  if (vocab.size() > config.max_vocab) {
    throw UsageError("train_tiny_lm: corpus has " + std::to_string(vocab.size()) + " distinct words, max_vocab is " +
                     std::to_string(config.max_vocab));
  }
  for (const auto& w : extra_vocab) {
    if (seen.insert(w).second) vocab.push_back(w);
  }

  std::unique_ptr<TinyLstmBackend> model(new TinyLstmBackend(std::move(vocab), config));
  const Layout L(model->vocab_->size(), config);
  const size_t bos = L.vocab;

  std::vector<std::vector<size_t>> inputs, targets;
  for (const auto& s : corpus) {
    if (s.empty()) continue;
    auto idx = model->indices(s);
    std::vector<size_t> in{bos};
    in.insert(in.end(), idx.begin(), idx.end() - 1);
    inputs.push_back(std::move(in));
    targets.push_back(std::move(idx));
  }
  if (inputs.empty()) throw UsageError("train_tiny_lm: corpus has no nonempty sentence");
  if (log) log->initial_perplexity = model->perplexity(corpus);

  Vec m(L.total, 0.0), v(L.total, 0.0), grad(L.total, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t step = 0;
  std::vector<size_t> order(inputs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const size_t batch = static_cast<size_t>(std::max(1, config.batch_size));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = splitmix64(mix(config.seed, (static_cast<uint64_t>(epoch) << 32) + i)) % i;
      std::swap(order[i - 1], order[j]);
    }
    for (size_t start = 0; start < order.size(); start += batch) {
      std::fill(grad.begin(), grad.end(), 0.0);
      size_t tokens = 0;
      const size_t end = std::min(order.size(), start + batch);
      for (size_t k = start; k < end; ++k) {
        backward(L, model->params_, inputs[order[k]], targets[order[k]], grad);
        tokens += targets[order[k]].size();
      }
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm) / static_cast<double>(tokens);
      const double scale = (norm > config.clip_norm ? config.clip_norm / norm : 1.0) / static_cast<double>(tokens);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (size_t j = 0; j < L.total; ++j) {
        const double g = grad[j] * scale;
        m[j] = beta1 * m[j] + (1.0 - beta1) * g;
        v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
        model->params_[j] -= config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      }
    }
    if (log) log->epoch_perplexity.push_back(model->perplexity(corpus));
  }
  return model;
}

double TinyLstmBackend::perplexity(const Corpus& corpus) const {
  double nats = 0.0;
  size_t tokens = 0;
  for (const auto& s : corpus) {
    if (s.empty()) continue;
    nats -= joint_log2_prob(s) * std::log(2.0);
    tokens += s.size();
  }
  return tokens ? std::exp(nats / static_cast<double>(tokens)) : 0.0;
}

BackendOutput TinyLstmBackend::score(std::span<const std::string> words, const ScoreOptions& opts) const {
  if (words.empty()) throw UsageError("score: empty word sequence");
  const Layout L(vocab_->size(), config_);
  BackendOutput out;
  out.alignment = align(words);
  auto idx = indices(words);
  std::vector<size_t> in{L.vocab};
  in.insert(in.end(), idx.begin(), idx.end());
  auto steps = forward(L, params_, in);
  for (size_t i = 0; i < words.size(); ++i) {
    out.per_word_surprisal.push_back(-std::log2(softmax(steps[i].logits)[idx[i]]));
  }
  if (opts.distribution) {
    out.next_distribution.vocab = vocab_;
    out.next_distribution.probs = softmax(steps.back().logits);
  }
  if (opts.hidden) {
    out.hidden.resize(L.layers);
    for (size_t l = 0; l < L.layers; ++l) {
      for (size_t t = 1; t < steps.size(); ++t) out.hidden[l].push_back(steps[t].layers[l].h);
    }
  }
  return out;
}

WordDistribution TinyLstmBackend::next_distribution(std::span<const std::string> prefix) const {
  const Layout L(vocab_->size(), config_);
  auto idx = indices(prefix);
  std::vector<size_t> in{L.vocab};
  in.insert(in.end(), idx.begin(), idx.end());
  auto steps = forward(L, params_, in);
  WordDistribution d;
  d.vocab = vocab_;
  d.probs = softmax(steps.back().logits);
  return d;
}

double TinyLstmBackend::joint_log2_prob(std::span<const std::string> words) const {
  const Layout L(vocab_->size(), config_);
  auto idx = indices(words);
  std::vector<size_t> in{L.vocab};
  in.insert(in.end(), idx.begin(), idx.end() - (idx.empty() ? 0 : 1));
  if (idx.empty()) return 0.0;
  auto steps = forward(L, params_, in);
  double total = 0.0;
  for (size_t t = 0; t < idx.size(); ++t) total += steps[t].logits[idx[t]] - log_sum_exp(steps[t].logits);
  return total / std::log(2.0);
}

void TinyLstmBackend::save(const std::filesystem::path& checkpoint) const {
  nlohmann::ordered_json j;
  j["name"] = desc_.name;
  j["vocab"] = vocab_->words();
  j["embed_dim"] = config_.embed_dim;
  j["hidden_dim"] = config_.hidden_dim;
  j["n_layers"] = config_.n_layers;
  j["epochs"] = config_.epochs;
  j["batch_size"] = config_.batch_size;
  j["learning_rate"] = config_.learning_rate;
  j["init_scale"] = config_.init_scale;
  j["clip_norm"] = config_.clip_norm;
  j["seed"] = config_.seed;
  j["max_vocab"] = config_.max_vocab;
  const std::string header = j.dump();

  std::ofstream out(checkpoint, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + checkpoint.string());
  out.write(kMagic, sizeof kMagic - 1);
  const uint64_t hlen = header.size(), plen = params_.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(&plen), sizeof plen);
  out.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(plen * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint " + checkpoint.string());
}

std::unique_ptr<TinyLstmBackend> TinyLstmBackend::load(const std::filesystem::path& checkpoint) {
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + checkpoint.string());
  char magic[sizeof kMagic - 1];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError("not a tiny LM checkpoint: " + checkpoint.string());
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  auto j = nlohmann::json::parse(header);
  TinyLmConfig c;
  c.embed_dim = j.at("embed_dim");
  c.hidden_dim = j.at("hidden_dim");
  c.n_layers = j.at("n_layers");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.init_scale = j.at("init_scale");
  c.clip_norm = j.at("clip_norm");
  c.seed = j.at("seed");
  c.max_vocab = j.at("max_vocab");
  std::unique_ptr<TinyLstmBackend> model(new TinyLstmBackend(j.at("vocab").get<std::vector<std::string>>(), c));
  uint64_t plen = 0;
  in.read(reinterpret_cast<char*>(&plen), sizeof plen);
  if (plen != model->params_.size()) throw IoError("checkpoint parameter count mismatch");
  in.read(reinterpret_cast<char*>(model->params_.data()), static_cast<std::streamsize>(plen * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint " + checkpoint.string());
  return model;
}

std::unique_ptr<TinyLstmBackend> train_tiny_lm(const TinyLstmBackend::Corpus& corpus,
                                               const BackendDescriptor& descriptor,
                                               const std::vector<std::string>& extra_vocab, TrainingLog* log) {
  if (descriptor.n_layers < 1 || descriptor.hidden_dim < 1) throw UsageError("train_tiny_lm: invalid descriptor");
  TinyLmConfig c;
  c.n_layers = descriptor.n_layers;
  c.hidden_dim = descriptor.hidden_dim;
  c.seed = descriptor.seed;
  auto get = [&](const char* key) -> const std::string* {
    auto it = descriptor.params.find(key);
    return it == descriptor.params.end() ? nullptr : &it->second;
  };
  if (auto v = get("embed_dim")) c.embed_dim = std::stoi(*v);
  if (auto v = get("epochs")) c.epochs = std::stoi(*v);
  if (auto v = get("batch_size")) c.batch_size = std::stoi(*v);
  if (auto v = get("learning_rate")) c.learning_rate = std::stod(*v);
  if (auto v = get("max_vocab")) c.max_vocab = std::stoul(*v);
  return TinyLstmBackend::train(corpus, extra_vocab, c, log);
}

std::vector<std::vector<std::string>> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_words(line);
    if (!words.empty()) corpus.push_back(std::move(words));
  }
  return corpus;
}

}  // namespace icprobe
