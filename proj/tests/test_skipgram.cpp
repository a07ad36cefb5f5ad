#include <gtest/gtest.h>

#include <cmath>

#include "nmtprobe/error.hpp"
#include "nmtprobe/skipgram.hpp"
#include "nmtprobe/synthetic.hpp"
#include "test_util.hpp"

namespace nmtprobe {
namespace {

using testing::TempDir;

std::vector<Sentence> topic_corpus(std::size_t n, std::size_t topics, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.generator = "copy";
  spec.sentences = n;
  spec.vocab_size = 48;
  spec.classes = 4;
  spec.topics = topics;
  spec.seed = seed;
  return make_synthetic(spec).parallel.sources();
}

SkipGramConfig small_config() {
  SkipGramConfig c;
  c.dim = 16;
  c.window = 3;
  c.negatives = 5;
  c.epochs = 5;
  c.seed = 3;
  return c;
}

TEST(NoiseSampler, ProbabilitiesFollowThreeQuarterPower) {
  const std::vector<double> counts = {1.0, 16.0, 0.0, 81.0};
  const NoiseSampler s(counts);
  const double z = 1.0 + 8.0 + 27.0;
  EXPECT_NEAR(s.probability(0), 1.0 / z, 1e-12);
  EXPECT_NEAR(s.probability(1), 8.0 / z, 1e-12);
  EXPECT_EQ(s.probability(2), 0.0);
  EXPECT_NEAR(s.probability(3), 27.0 / z, 1e-12);
}

TEST(NoiseSampler, EmpiricalFrequenciesWithinThreeSigma) {
  const std::vector<double> counts = {5.0, 1.0, 0.0, 30.0, 12.0, 2.0};
  const NoiseSampler s(counts);
  Rng rng(7);
  const std::size_t n = 1000000;
  std::vector<std::size_t> hits(counts.size(), 0);
  for (std::size_t i = 0; i < n; ++i) ++hits[s.sample(rng)];
  EXPECT_EQ(hits[2], 0u);
  for (std::size_t id = 0; id < counts.size(); ++id) {
    const double p = s.probability(id);
    const double sigma = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
    EXPECT_LE(std::abs(static_cast<double>(hits[id]) - p * static_cast<double>(n)), 3.0 * sigma + 1e-9) << id;
  }
}

TEST(NoiseSampler, RejectsBadCounts) {
  EXPECT_THROW(NoiseSampler(std::vector<double>{0.0, 0.0}), ValueError);
  EXPECT_THROW(NoiseSampler(std::vector<double>{1.0, -1.0}), ValueError);
}

TEST(SkipGram, ZeroEpochsReturnsTheInitialisation) {
  SkipGramConfig c = small_config();
  c.epochs = 0;
  const auto corpus = topic_corpus(50, 1, 1);
  const EmbeddingTable t = train_skipgram(corpus, c);
  const double bound = 0.5 / static_cast<double>(c.dim);
  EXPECT_LE(t.matrix().cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(t.matrix().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(train_skipgram(corpus, c), t);
}

TEST(SkipGram, DeterministicForAFixedSeed) {
  const auto corpus = topic_corpus(100, 1, 1);
  EXPECT_EQ(train_skipgram(corpus, small_config()), train_skipgram(corpus, small_config()));
  SkipGramConfig other = small_config();
  other.seed = 4;
  EXPECT_FALSE(train_skipgram(corpus, other) == train_skipgram(corpus, small_config()));
}

TEST(SkipGram, LossDecreases) {
  SkipGramReport report;
  train_skipgram(topic_corpus(300, 4, 1), small_config(), &report);
  ASSERT_EQ(report.epoch_loss.size(), 5u);
  EXPECT_LT(report.epoch_loss.back(), report.epoch_loss.front());
}

double cosine(const RowVector<double>& a, const RowVector<double>& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// Words only co-occur within their sentence's topic, so same-topic vectors
// end up closer than cross-topic ones.
TEST(SkipGram, SameTopicWordsAreCloser) {
  const std::size_t topics = 4;
  const auto corpus = topic_corpus(2000, topics, 2);
  SkipGramConfig c = small_config();
  c.epochs = 5;
  const EmbeddingTable t = train_skipgram(corpus, c);
  const SyntheticGrammar g([] {
    SyntheticSpec s;
    s.vocab_size = 48;
    return s;
  }());
  const std::size_t per_topic = 48 / topics;
  double same = 0.0, cross = 0.0;
  std::size_t n_same = 0, n_cross = 0;
  for (std::size_t i = 0; i < 48; ++i) {
    for (std::size_t j = i + 1; j < 48; ++j) {
      const double cs = cosine(t.lookup(g.word(i)), t.lookup(g.word(j)));
      if (i / per_topic == j / per_topic) {
        same += cs;
        ++n_same;
      } else {
        cross += cs;
        ++n_cross;
      }
    }
  }
  EXPECT_GE(same / static_cast<double>(n_same) - cross / static_cast<double>(n_cross), 0.2);
}

TEST(SkipGram, UnknownTokensGetTheUnkRow) {
  const EmbeddingTable t = train_skipgram(topic_corpus(50, 1, 1), small_config());
  EXPECT_EQ(t.lookup("definitely-not-a-word"), t.matrix().row(Vocab::kUnk));
  EXPECT_EQ(t.lookup("w000"), t.matrix().row(t.vocab().id("w000")));
}

TEST(SkipGram, RejectsBadSettings) {
  const auto corpus = topic_corpus(10, 1, 1);
  SkipGramConfig c = small_config();
  c.dim = 0;
  EXPECT_THROW(train_skipgram(corpus, c), ValueError);
  c = small_config();
  c.window = 0;
  EXPECT_THROW(train_skipgram(corpus, c), ValueError);
  c = small_config();
  c.learning_rate = 0.0;
  EXPECT_THROW(train_skipgram(corpus, c), ValueError);
  EXPECT_THROW(train_skipgram(std::vector<Sentence>{}, small_config()), ValueError);
}

TEST(EmbeddingTable, TextRoundTripIsExact) {
  TempDir dir;
  const EmbeddingTable t = train_skipgram(topic_corpus(60, 2, 1), small_config());
  t.save(dir / "emb.txt");
  EXPECT_EQ(EmbeddingTable::load(dir / "emb.txt"), t);
  EXPECT_THROW(EmbeddingTable::from_text("2 3\na 1 2 3\n", "mem"), FormatError);
  EXPECT_THROW(EmbeddingTable::from_text("1 2\na 1 x\n", "mem"), FormatError);
}

}  // namespace
}  // namespace nmtprobe
