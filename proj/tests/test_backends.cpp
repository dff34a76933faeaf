#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>

#include <json.hpp>

#include "helpers.hpp"
#include "icprobe/backends/bigram.hpp"
#include "icprobe/backends/planted.hpp"
#include "icprobe/backends/precomputed.hpp"
#include "icprobe/backends/registry.hpp"
#include "icprobe/backends/subword.hpp"
#include "icprobe/backends/uniform.hpp"
#include "icprobe/error.hpp"
#include "icprobe/measures.hpp"

using namespace icprobe;

namespace {

using Sentence = std::vector<std::string>;

const std::vector<std::string> kToyText = {
    "the girl cried because she was sad",
    "the boy laughed because he was happy",
    "the girl smiled because she won",
    "the boy cried because the girl left",
    "the girl left because she was tired",
    "the mother called the girl because she was late",
    "the father called the boy because he was late",
    "the girl waved because the boy waved",
    "the boy ran because he was late",
    "the girl ran because the mother called",
};

std::vector<Sentence> toy_corpus() {
  std::vector<Sentence> c;
  for (const auto& s : kToyText) c.push_back(split_words(s));
  return c;
}

// Counted directly from the text.
double bigram_count(const std::string& a, const std::string& b) {
  double n = 0;
  for (const auto& s : kToyText) {
    auto w = split_words(s);
    for (size_t i = 1; i < w.size(); ++i) n += (w[i - 1] == a && w[i] == b);
  }
  return n;
}

double context_count(const std::string& a) {
  double n = 0;
  for (const auto& s : kToyText) {
    auto w = split_words(s);
    for (size_t i = 0; i + 1 < w.size(); ++i) n += (w[i] == a);
  }
  return n;
}

std::vector<std::string> small_vocab() { return {"the", "girl", "boy", "because", "she", "he", "was", "sad"}; }

std::vector<std::unique_ptr<Backend>> all_simple_backends() {
  std::vector<std::unique_ptr<Backend>> out;
  out.push_back(std::make_unique<UniformBackend>(small_vocab(), 3, 8, 7));
  out.push_back(std::make_unique<BigramBackend>(toy_corpus(), small_vocab(), 0.1));
  out.push_back(std::make_unique<SubwordBackend>(std::vector<std::string>{"the", "girl", "boy", "be", "##cause", "she",
                                                                          "he", "was", "sad"},
                                                 2, 8, 3));
  PlantedConfig pc;
  pc.vocab = small_vocab();
  pc.n_layers = 2;
  pc.hidden_dim = 8;
  pc.jitter_bits = 0.2;
  out.push_back(make_planted_backend(pc, {}));
  return out;
}

Sentence random_sentence(std::mt19937_64& rng, const std::vector<std::string>& vocab, size_t max_len) {
  std::uniform_int_distribution<size_t> len(1, max_len), pick(0, vocab.size() - 1);
  Sentence s(len(rng));
  for (auto& w : s) w = vocab[pick(rng)];
  return s;
}

}  // namespace

TEST_CASE("uniform backend") {
  UniformBackend b(small_vocab(), 2, 16, 0);
  const double expected = std::log2(8.0);
  auto out = b.score(split_words("the girl was sad"));
  for (double s : out.per_word_surprisal) CHECK(s == doctest::Approx(expected).epsilon(1e-12));
  for (double p : out.next_distribution.probs) CHECK(p == doctest::Approx(1.0 / 8));
  for (auto [first, last] : out.alignment.word_spans) CHECK(last - first == 1);
  REQUIRE(out.hidden.size() == 2);
  CHECK(out.hidden[0].size() == 4);
  CHECK(out.hidden[0][0].size() == 16);
  CHECK_THROWS_AS(b.score(split_words("the dog")), OovError);
  CHECK_THROWS_AS(UniformBackend({}, 2, 16, 0), UsageError);
}

TEST_CASE("bigram backend matches counts from the corpus") {
  BigramBackend b(toy_corpus());
  CHECK(b.count("girl", "because") == bigram_count("girl", "because"));
  CHECK(b.count("because", "she") == bigram_count("because", "she"));

  auto words = split_words("the girl cried because she");
  const double p_because = bigram_count("cried", "because") / context_count("cried");
  const double p_she = bigram_count("because", "she") / context_count("because");
  CHECK(b.surprisal_at(words, 3) == doctest::Approx(-std::log2(p_because)).epsilon(1e-12));
  CHECK(b.surprisal_at(words, 4) == doctest::Approx(-std::log2(p_she)).epsilon(1e-12));

  auto after_the = b.next_distribution(split_words("the"));
  for (const auto& w : {"girl", "boy", "mother", "father"}) {
    CHECK(after_the.prob(w) == doctest::Approx(bigram_count("the", w) / context_count("the")));
  }
  CHECK(after_the.total() == doctest::Approx(1.0));

  // Every sentence starts with "the".
  CHECK(b.surprisal_at(words, 0) == doctest::Approx(0.0));

  BigramBackend smooth(toy_corpus(), {"zebra"}, 1.0);
  const double v = static_cast<double>(smooth.vocabulary().size());
  auto d = smooth.next_distribution(split_words("the girl"));
  CHECK(d.prob("zebra") == doctest::Approx(1.0 / (context_count("girl") + v)));
  CHECK(smooth.score(split_words("the girl")).hidden.at(0).at(1).size() == smooth.vocabulary().size());
  CHECK_THROWS_AS(BigramBackend(toy_corpus(), {}, -1.0), UsageError);
}

TEST_CASE("planted backend applies explicit rules") {
  PlantedConfig pc;
  pc.vocab = {"x", "a", "b", "c", "d"};
  pc.noise = 0.0;
  std::vector<PlantRule> rules{{"ab", [](std::span<const std::string> prefix) -> std::optional<WordProbs> {
                                  if (prefix.size() == 1 && prefix[0] == "x") return WordProbs{{"a", 0.6}, {"b", 0.3}};
                                  return std::nullopt;
                                }}};
  std::vector<RepresentationRule> reps{{"copy", [](std::span<const std::string>, size_t pos, int) -> std::optional<Mixture> {
                                         if (pos != 1) return std::nullopt;
                                         return Mixture{{{0, 1.0}}, 0.0};
                                       }}};
  auto b = make_planted_backend(pc, rules, reps);
  const Sentence xa{"x", "a"}, xb{"x", "b"}, xc{"x", "c"};
  CHECK(b->surprisal_at(xb, 1) - b->surprisal_at(xa, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b->prob(Sentence{"x"}, "c") == doctest::Approx(0.1 / 3));
  CHECK(b->surprisal_at(xa, 0) == doctest::Approx(std::log2(5.0)));

  auto out = b->score(xc);
  for (size_t l = 0; l < out.hidden.size(); ++l) {
    CHECK(pearson_r(out.hidden[l][0], out.hidden[l][1]) == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::vector<PlantRule> bad{{"over", [](std::span<const std::string>) -> std::optional<WordProbs> {
                                return WordProbs{{"a", 0.7}, {"b", 0.5}};
                              }}};
  auto broken = make_planted_backend(pc, bad);
  CHECK_THROWS_AS(broken->next_distribution(Sentence{"x"}), UsageError);
  std::vector<PlantRule> unknown{{"unknown", [](std::span<const std::string>) -> std::optional<WordProbs> {
                                    return WordProbs{{"zebra", 0.5}};
                                  }}};
  CHECK_THROWS_AS(make_planted_backend(pc, unknown)->next_distribution(Sentence{"x"}), UsageError);
}

TEST_CASE("subword backend splits words into pieces") {
  SubwordBackend b({"the", "aris", "##toc", "##rats", "girl", "a", "##r"}, 2, 8, 1);
  auto pieces = b.tokenize("aristocrats");
  REQUIRE(pieces.size() == 3);
  std::string joined;
  for (const auto& p : pieces) joined += p.starts_with("##") ? p.substr(2) : p;
  CHECK(joined == "aristocrats");

  auto out = b.score(split_words("the aristocrats"));
  CHECK(out.alignment.word_spans.at(1) == std::pair<size_t, size_t>{1, 4});
  CHECK(out.alignment.n_subwords == 4);
  CHECK(out.per_word_surprisal.at(1) == doctest::Approx(3 * std::log2(7.0)));
  CHECK(out.next_distribution.approximate);
  CHECK(out.next_distribution.coverage == doctest::Approx(4.0 / 7.0));
  CHECK(b.tokenize("xyz").empty());
  CHECK_THROWS_AS(b.score(split_words("the xyz")), OovError);

  // The word reads the last piece's state, which sees the earlier pieces.
  auto shorter = b.score(split_words("the ar"));
  CHECK(shorter.hidden[0][1] != out.hidden[0][1]);
}

TEST_CASE("precomputed backend reads the cached outputs") {
  auto dir = testing::tmp_dir("precomputed");
  auto path = dir / "toy.jsonl";
  {
    nlohmann::json j;
    j["words"] = {"the", "aristocrats", "who"};
    j["tokens"] = {"the", "ar", "isto", "crats", "who"};
    j["word_spans"] = {{0, 1}, {1, 4}, {4, 5}};
    j["token_surprisal"] = {1.0, 2.0, 0.5, 0.25, 3.0};
    j["hidden"] = {{{1, 0}, {0, 1}, {1, 1}, {2, 3}, {5, 8}}};
    j["next"] = {{"was", 0.3}, {"were", 0.2}};
    std::ofstream(path) << j.dump() << "\n";
  }
  PrecomputedBackend b(path);
  CHECK(b.descriptor().name == "toy");
  auto words = split_words("the aristocrats who");
  auto out = b.score(words);
  CHECK(out.per_word_surprisal == std::vector<double>{1.0, 2.75, 3.0});
  CHECK(out.hidden[0][1] == std::vector<double>{2, 3});
  CHECK(out.next_distribution.prob("was") == doctest::Approx(0.3));
  CHECK(out.next_distribution.prob(PrecomputedBackend::kOther) == doctest::Approx(0.5));
  CHECK(b.surprisal_at(words, 1) == doctest::Approx(2.75));
  CHECK(b.joint_log2_prob(words) == doctest::Approx(-6.75));
  CHECK_THROWS_AS(b.score(split_words("the dog")), OovError);
  CHECK_THROWS_AS(PrecomputedBackend(dir / "missing.jsonl"), IoError);
}

TEST_CASE("registry rejects unknown names and parameters") {
  BackendContext ctx;
  ctx.vocabulary = {"the", "girl"};
  try {
    make_backend("gpt7", {}, ctx, 1);
    FAIL("expected UnknownBackend");
  } catch (const UnknownBackend& e) {
    std::string msg = e.what();
    for (const auto& n : backend_names()) CHECK(msg.find(n) != std::string::npos);
  }
  CHECK_THROWS_AS(make_backend("uniform", {{"colour", "red"}}, ctx, 1), UsageError);
  CHECK_THROWS_AS(make_backend("uniform", {{"n_layers", "two"}}, ctx, 1), UsageError);
  auto u = make_backend("uniform", {{"n_layers", "3"}}, ctx, 1);
  CHECK(u->descriptor().n_layers == 3);

  auto pieces = chunked_pieces({"aristocrats", "the"}, 5);
  Vocabulary v(pieces);
  CHECK(v.contains("the"));
  CHECK(v.contains("aris"));
  CHECK(v.contains("##tocr"));
  CHECK(v.contains("##ats"));
}

TEST_CASE("backend contract holds for every simple backend") {
  std::mt19937_64 rng(11);
  for (const auto& b : all_simple_backends()) {
    CAPTURE(b->descriptor().name);
    const auto& vocab = b->vocabulary().words();
    for (int trial = 0; trial < 50; ++trial) {
      auto s = random_sentence(rng, {"the", "girl", "boy", "because", "she", "he", "was", "sad"}, 8);
      auto out = b->score(s);
      const double sum = std::accumulate(out.per_word_surprisal.begin(), out.per_word_surprisal.end(), 0.0);
      CHECK(-b->joint_log2_prob(s) == doctest::Approx(sum).epsilon(1e-9));
      CHECK(out.next_distribution.total() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(out.next_distribution.probs.size() == vocab.size());
      REQUIRE(out.hidden.size() == static_cast<size_t>(b->descriptor().n_layers));
      for (const auto& layer : out.hidden) {
        REQUIRE(layer.size() == s.size());
        for (const auto& h : layer) CHECK(h.size() == static_cast<size_t>(b->descriptor().hidden_dim));
      }
      auto again = b->score(s);
      CHECK(again.per_word_surprisal == out.per_word_surprisal);
      CHECK(again.hidden == out.hidden);
      CHECK(b->surprisal_at(s, s.size() - 1) == doctest::Approx(out.per_word_surprisal.back()).epsilon(1e-12));
    }
  }
}

TEST_CASE("top_k breaks ties by index") {
  WordDistribution d;
  d.vocab = std::make_shared<Vocabulary>(std::vector<std::string>{"a", "b", "c", "d"});
  d.probs = {0.25, 0.25, 0.4, 0.1};
  CHECK(d.top_k(3) == std::vector<size_t>{2, 0, 1});
  CHECK(d.argmax() == 2);
  CHECK(d.top_k(10).size() == 4);
}
