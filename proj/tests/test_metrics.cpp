#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmtprobe/error.hpp"
#include "nmtprobe/metrics.hpp"
#include "nmtprobe/random.hpp"

namespace nmtprobe {
namespace {

TagSchema schema() { return TagSchema({"X1", "X2", "Y1"}, {"X", "X", "Y"}); }

TaggingResult result(const std::vector<int>& gold, const std::vector<int>& predicted,
                     std::vector<std::size_t> starts = {}) {
  TaggingResult r;
  r.labels = schema().fine();
  r.gold = gold;
  r.predicted = predicted;
  r.sentence_starts = starts.empty() ? std::vector<std::size_t>{0, gold.size()} : std::move(starts);
  return r;
}

TEST(Accuracy, CountsExactMatches) {
  EXPECT_DOUBLE_EQ(accuracy(result({0, 1, 2, 2}, {0, 1, 1, -1})), 0.5);
  EXPECT_THROW(accuracy(TaggingResult{}), ValueError);
}

TEST(Result, ValidateCatchesInconsistencies) {
  EXPECT_THROW(result({0, 1}, {0}).validate(), ValueError);
  EXPECT_THROW(result({0, 5}, {0, 1}).validate(), ValueError);
  EXPECT_THROW(result({0, 1}, {0, 1}, {0, 1}).validate(), ValueError);
  EXPECT_NO_THROW(result({0, 1}, {-1, 1}, {0, 1, 2}).validate());
}

TEST(F1, HandCase) {
  TaggingResult r = result({0, 0, 0, 1, 1}, {0, 1, 1, 0, 1});
  const Prf p = per_tag_f1(r, 0);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 1.0 / 3.0);
  EXPECT_NEAR(p.f1, 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(per_tag_f1(r, "X1").f1, p.f1);
}

TEST(F1, ZeroOverZeroIsZero) {
  const Prf p = per_tag_f1(result({0, 1}, {0, 1}), 2);
  EXPECT_EQ(p.precision, 0.0);
  EXPECT_EQ(p.recall, 0.0);
  EXPECT_EQ(p.f1, 0.0);
  EXPECT_THROW(per_tag_f1(result({0}, {0}), "nope"), ValueError);
}

TEST(Collapse, MapsFineToCoarse) {
  const TaggingResult c = coarse_collapse(result({0, 1, 2, 2}, {1, 0, 0, -1}), schema());
  EXPECT_EQ(c.labels, (std::vector<std::string>{"X", "Y"}));
  EXPECT_EQ(c.gold, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(c.predicted, (std::vector<int>{0, 0, 0, -1}));
  EXPECT_DOUBLE_EQ(accuracy(c), 0.5);
  TaggingResult wrong = result({0}, {0});
  wrong.labels = {"X1", "Y1", "X2"};
  EXPECT_THROW(coarse_collapse(wrong, schema()), ValueError);
}

TEST(Collapse, NeverLowersAccuracy) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<int> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = static_cast<int>(rng.below(3));
      p[i] = static_cast<int>(rng.below(4)) - 1;
    }
    const TaggingResult r = result(g, p);
    EXPECT_GE(accuracy(coarse_collapse(r, schema())), accuracy(r));
  }
}

TEST(MicroF1, TenTokenHandCase) {
  // X1 X1 X2 X2 Y1 Y1 X1 X2 Y1 Y1 vs X1 X2 X2 Y1 Y1 X1 X1 X2 X1 Y1.
  // Pooled over X1 and X2: TP 4, FP 3, FN 2 -> F1 = 8/13.
  const TaggingResult r = result({0, 0, 1, 1, 2, 2, 0, 1, 2, 2}, {0, 1, 1, 2, 2, 0, 0, 1, 0, 2});
  EXPECT_NEAR(micro_f1_within_coarse(r, schema(), "X"), 8.0 / 13.0, 1e-15);
}

TEST(MicroF1, SingletonCoarseTagEqualsPerTagF1) {
  const TaggingResult r = result({0, 0, 1, 1, 2, 2, 0, 1, 2, 2}, {0, 1, 1, 2, 2, 0, 0, 1, 0, 2});
  EXPECT_DOUBLE_EQ(micro_f1_within_coarse(r, schema(), "Y"), per_tag_f1(r, "Y1").f1);
}

Sentence words(const std::string& s) {
  Sentence out;
  std::string cur;
  for (char c : s + " ") {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

TEST(Bleu, IdentityIsOneHundred) {
  const std::vector<Sentence> s = {words("the cat sat on the mat"), words("a b c d e f")};
  EXPECT_DOUBLE_EQ(bleu(s, s), 100.0);
}

TEST(Bleu, NoFourGramOverlapIsZero) {
  EXPECT_EQ(bleu({words("a b c d")}, {words("a b c e")}), 0.0);
  EXPECT_EQ(bleu({words("a b c")}, {words("a b c")}), 0.0);
}

TEST(Bleu, HandCases) {
  EXPECT_NEAR(bleu({words("a b c d e")}, {words("a b c d f")}), 66.8740304976422, 0.01);
  EXPECT_NEAR(bleu({words("a b c d")}, {words("a b c d e f")}), 60.653065971263345, 0.01);
  EXPECT_NEAR(bleu({words("a b c d"), words("x y z w")}, {words("a b c d"), words("x y z q")}), 72.31269021297695,
              0.01);
}

TEST(Bleu, ClipsRepeatedNgrams) {
  // Unigram "a" appears 6 times in the hypothesis but twice in the reference.
  const double b = bleu({words("a a a a a a")}, {words("a a b c d e")});
  EXPECT_EQ(b, 0.0);
  const double b2 = bleu({words("a b c d a b c d")}, {words("a b c d x y z w")});
  EXPECT_NEAR(b2, 100.0 * std::pow(4.0 / 8 * 3.0 / 7 * 2.0 / 6 * 1.0 / 5, 0.25), 1e-9);
}

TEST(Bleu, InvariantUnderSentencePermutation) {
  std::vector<Sentence> h = {words("a b c d e"), words("x y z w v"), words("p q r s t u")};
  std::vector<Sentence> r = {words("a b c d f"), words("x y z w v"), words("p q r s")};
  const double base = bleu(h, r);
  std::swap(h[0], h[2]);
  std::swap(r[0], r[2]);
  EXPECT_DOUBLE_EQ(bleu(h, r), base);
  EXPECT_THROW(bleu(h, {r[0]}), ValueError);
}

TEST(Significance, IdenticalSystemsGivePValueOne) {
  const TaggingResult a = result({0, 1, 2, 0}, {0, 2, 2, 1}, {0, 2, 4});
  const SignificanceReport rep = approx_randomization(a, a, 1000, 1);
  EXPECT_EQ(rep.observed, 0.0);
  EXPECT_EQ(rep.p_value, 1.0);
  EXPECT_EQ(rep.exceed, 1000u);
}

TEST(Significance, PValueIsBoundedBelowAndDeterministic) {
  std::vector<int> g, pa, pb;
  std::vector<std::size_t> starts = {0};
  for (int s = 0; s < 60; ++s) {
    for (int j = 0; j < 3; ++j) {
      g.push_back(j);
      pa.push_back(j);
      pb.push_back((j + 1) % 3);
    }
    starts.push_back(g.size());
  }
  const TaggingResult a = result(g, pa, starts), b = result(g, pb, starts);
  const SignificanceReport rep = approx_randomization(a, b, 500, 4, "good", "bad");
  EXPECT_DOUBLE_EQ(rep.observed, 1.0);
  EXPECT_DOUBLE_EQ(rep.p_value, 1.0 / 501.0);
  EXPECT_EQ(rep.system_a, "good");
  const SignificanceReport again = approx_randomization(a, b, 500, 4);
  EXPECT_EQ(again.exceed, rep.exceed);
}

TEST(Significance, RejectsMisalignedInputs) {
  const TaggingResult a = result({0, 1}, {0, 1});
  const TaggingResult b = result({0, 2}, {0, 1});
  EXPECT_THROW(approx_randomization(a, b, 10, 1), ValueError);
  EXPECT_THROW(approx_randomization(a, a, 0, 1), ValueError);
}

TaggedCorpus corpus() {
  TaggedCorpus c;
  c.sentences.push_back({{"the", "dog", "ran"}, {"X1", "X2", "Y1"}});
  c.sentences.push_back({{"it", "sat"}, {"X1", "Y1"}});
  return c;
}

TEST(Disagreement, ListsTokensWhereExactlyOneSystemIsRight) {
  const std::vector<std::size_t> starts = {0, 3, 5};
  const TaggingResult a = result({0, 1, 2, 0, 2}, {0, 0, 2, 1, 1}, starts);
  const TaggingResult b = result({0, 1, 2, 0, 2}, {0, 1, 1, 0, 1}, starts);
  const auto d = disagreement_report(a, b, corpus());
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].token, "dog");
  EXPECT_EQ(d[0].correct, "B");
  EXPECT_EQ(d[0].context, "the [[dog]] ran");
  EXPECT_EQ(d[1].token, "ran");
  EXPECT_EQ(d[1].correct, "A");
  EXPECT_EQ(d[1].predicted_b, "X2");
  EXPECT_EQ(d[2].sentence, 1u);
  EXPECT_EQ(d[2].position, 0u);
  const TagSchema s = schema();
  const auto only_y = disagreement_report(a, b, corpus(), &s, std::string("Y"));
  ASSERT_EQ(only_y.size(), 1u);
  EXPECT_EQ(only_y[0].token, "ran");
  EXPECT_THROW(disagreement_report(a, b, corpus(), nullptr, std::string("Y")), ValueError);
  const std::string tsv = disagreement_tsv(d);
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "sentence\tposition\ttoken\tgold\tpredicted_a\tpredicted_b\tcorrect\tcontext");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 4);
}

TEST(MakeResult, FromTagStrings) {
  const TaggingResult r = make_result(corpus(), schema().fine(), {{"X1", "", "Y1"}, {"X2"}});
  EXPECT_EQ(r.predicted, (std::vector<int>{0, -1, 2, 1, -1}));
  EXPECT_EQ(r.sentence_starts, (std::vector<std::size_t>{0, 3, 5}));
  EXPECT_THROW(make_result(corpus(), schema().fine(), {{"X1"}}), ValueError);
  EXPECT_THROW(make_result(corpus(), schema().fine(), {{"Q"}, {}}), ValueError);
}

}  // namespace
}  // namespace nmtprobe
