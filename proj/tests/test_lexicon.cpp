#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "icprobe/error.hpp"
#include "icprobe/lexicon.hpp"

using namespace icprobe;

namespace {

std::vector<VerbNorm> norms_from(const std::string& text) {
  std::istringstream in(text);
  return load_verb_norms(in, "test");
}

}  // namespace

TEST_CASE("quoted norms get the sign-derived category") {
  auto n = norms_from("lemma\tpast\tbias\namuse\tamused\t67\napplaud\tapplauded\t-84\ntie\ttied\t0\n");
  REQUIRE(n.size() == 3);
  CHECK(n[0].bias_category == BiasCategory::subject_biased);
  CHECK(n[1].bias_category == BiasCategory::object_biased);
  CHECK(n[2].bias_category == BiasCategory::excluded);
  CHECK(n[0].past_form == "amused");
}

TEST_CASE("category is determined by the sign of the score") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng);
    auto c = categorize_bias(s);
    CHECK(c == (s > 0 ? BiasCategory::subject_biased : s < 0 ? BiasCategory::object_biased : BiasCategory::excluded));
  }
}

TEST_CASE("malformed norm rows name the row and column") {
  auto fails_with = [](const std::string& body, const std::string& needle) {
    try {
      norms_from("lemma\tpast\tbias\n" + body);
    } catch (const LoadError& e) {
      const std::string msg = e.what();
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
      return true;
    }
    return false;
  };
  CHECK(fails_with("amuse\tamused\tlots\n", "column 'bias'"));
  CHECK(fails_with("amuse\tamused\t101\n", "row 2"));
  CHECK(fails_with("amuse\tamused\t10\namuse\tamused\t12\n", "duplicate"));
  CHECK(fails_with("Amuse\tamused\t10\n", "column 'lemma'"));
  CHECK(fails_with("amuse\tamused\n", "row 2"));
  CHECK_THROWS_AS(norms_from("verb\tpast\tbias\n"), LoadError);
}

TEST_CASE("norms round trip through the tabular format") {
  const auto& original = testing::bundled();
  auto all = load_verb_norms(LexiconPaths::bundled().norms);
  std::ostringstream out;
  write_verb_norms(out, all);
  auto again = norms_from(out.str());
  CHECK(again == all);
  CHECK(original.norms.size() == 246);
}

TEST_CASE("vocabulary filter partitions the norms") {
  auto all = load_verb_norms(LexiconPaths::bundled().norms);
  REQUIRE(all.size() == 305);
  auto f = filter_by_vocabulary(all, load_word_list(LexiconPaths::bundled().vocab));
  CHECK(f.kept.size() == 246);
  CHECK(f.dropped.size() == 59);

  WordSet everything;
  for (auto& n : all) everything.insert(n.past_form);
  CHECK(filter_by_vocabulary(all, everything).dropped.empty());
  auto none = filter_by_vocabulary(all, {});
  CHECK(none.kept.empty());
  CHECK(none.dropped.size() == all.size());

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    WordSet some;
    for (auto& n : all) {
      if (rng() % 2) some.insert(n.past_form);
    }
    auto p = filter_by_vocabulary(all, some);
    CHECK(p.kept.size() + p.dropped.size() == all.size());
    for (auto& k : p.kept) CHECK(some.contains(k.past_form));
    for (auto& d : p.dropped) CHECK_FALSE(some.contains(d.past_form));
  }
}

TEST_CASE("bundled noun pairs") {
  auto pairs = load_noun_pairs(LexiconPaths::bundled().pairs);
  REQUIRE(pairs.size() == 14);
  CHECK(pairs[0] == NounPair{"man", "woman"});
  CHECK(std::count(pairs.begin(), pairs.end(), NounPair{"king", "queen"}) == 1);

  std::istringstream bad("male\tfemale\nking\t\n");
  CHECK_THROWS_AS(load_noun_pairs(bad, "t"), LoadError);
  std::istringstream dup("male\tfemale\nking\tqueen\nking\tqueen\n");
  CHECK_THROWS_AS(load_noun_pairs(dup, "t"), LoadError);
}

TEST_CASE("bundled relative-clause items") {
  auto reading = load_rc_items(LexiconPaths::bundled().reading);
  auto completion = load_rc_items(LexiconPaths::bundled().completion);
  CHECK(reading.size() == 12);
  CHECK(completion.size() == 14);
  RCItem chef{1, {"the", "woman"}, {"scolded"}, {"studied", "with"}, {"chef", "chefs"}, {"aristocrat", "aristocrats"}};
  CHECK(reading[0] == chef);
  CHECK(completion[0].higher == NounForms{"agent", "agents"});
  CHECK(completion[0].lower == NounForms{"rocker", "rockers"});
}

TEST_CASE("relative-clause items round trip and validate") {
  auto items = load_rc_items(LexiconPaths::bundled().completion);
  std::ostringstream out;
  write_rc_items(out, items);
  std::istringstream in(out.str());
  CHECK(load_rc_items(in, "rt") == items);
  std::ostringstream again;
  write_rc_items(again, load_rc_items(LexiconPaths::bundled().completion));
  CHECK(again.str() == out.str());

  const std::string header = "item_id\tsubject\tic_verb\tnonic_verb\thigher_sg\thigher_pl\tlower_sg\tlower_pl\n";
  std::istringstream missing(header + "1\tthe man\tadmires\tworks with\tagent\tagents\trocker\n");
  CHECK_THROWS_AS(load_rc_items(missing, "t"), LoadError);
  std::istringstream same(header + "1\tthe man\tadmires\tworks with\tagent\tagent\trocker\trockers\n");
  CHECK_THROWS_AS(load_rc_items(same, "t"), LoadError);
}
