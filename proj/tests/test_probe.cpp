#include <gtest/gtest.h>

#include <numeric>

#include "nmtprobe/error.hpp"
#include "nmtprobe/metrics.hpp"
#include "nmtprobe/probe.hpp"
#include "nmtprobe/seq2seq.hpp"
#include "nmtprobe/skipgram.hpp"
#include "test_util.hpp"

namespace nmtprobe {
namespace {

using testing::TempDir;

TagSchema schema() { return TagSchema({"X1", "X2", "Y1"}, {"X", "X", "Y"}); }

TaggedCorpus corpus_of(const std::vector<std::vector<std::pair<std::string, std::string>>>& sentences) {
  TaggedCorpus c;
  for (const auto& s : sentences) {
    TaggedSentence ts;
    for (const auto& [tok, tag] : s) {
      ts.tokens.push_back(tok);
      ts.tags.push_back(tag);
    }
    c.sentences.push_back(ts);
  }
  return c;
}

Seq2SeqModel model(std::size_t layers) {
  NmtConfig c;
  c.embed_dim = 5;
  c.hidden_dim = 6;
  c.num_layers = layers;
  c.init_range = 0.5;
  c.seed = 2;
  const std::vector<Sentence> words = {{"a", "b", "c", "d"}};
  Seq2SeqModel m(c, Vocab::build(words, 100), Vocab::build(words, 100));
  m.freeze();
  return m;
}

TEST(Features, LayerZeroDependsOnlyOnTheToken) {
  const TaggedCorpus c = corpus_of({{{"a", "X1"}, {"b", "Y1"}}, {{"c", "X2"}, {"b", "Y1"}}});
  const FeatureDataset f0 = extract_features(model(2), c, schema(), 0);
  EXPECT_EQ(f0.features.row(1), f0.features.row(3));
  const FeatureDataset f1 = extract_features(model(2), c, schema(), 1);
  EXPECT_NE(f1.features.row(1), f1.features.row(3));
  EXPECT_EQ(f0.width(), 5u);
  EXPECT_EQ(f1.width(), 6u);
}

TEST(Features, OneRowPerTokenInCorpusOrder) {
  std::vector<std::vector<std::pair<std::string, std::string>>> s(3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4 + i; ++j) s[i].push_back({j % 2 ? "a" : "zz-unknown", j % 3 ? "X1" : "Y1"});
  }
  const TaggedCorpus c = corpus_of(s);
  const FeatureDataset f = extract_features(model(2), c, schema(), 2);
  EXPECT_EQ(f.size(), 15u);
  EXPECT_EQ(f.features.rows(), 15);
  EXPECT_EQ(f.sentence_offsets(), (std::vector<std::size_t>{0, 4, 9, 15}));
  EXPECT_EQ(f.sentence[5], 1u);
  EXPECT_EQ(f.position[5], 1u);
  EXPECT_EQ(f.tokens[5], "a");
  EXPECT_EQ(f.tags[0], 2);
  EXPECT_EQ(f.labels, schema().fine());
}

TEST(Features, CoarseGranularityUsesCoarseLabels) {
  const TaggedCorpus c = corpus_of({{{"a", "X1"}, {"b", "X2"}, {"c", "Y1"}}});
  const FeatureDataset f = extract_features(model(1), c, schema(), 1, Granularity::coarse);
  EXPECT_EQ(f.labels, (std::vector<std::string>{"X", "Y"}));
  EXPECT_EQ(f.tags, (std::vector<int>{0, 0, 1}));
}

TEST(Features, LayerOutOfRangeIsAnError) {
  const TaggedCorpus c = corpus_of({{{"a", "X1"}}});
  EXPECT_THROW(extract_features(model(2), c, schema(), 3), ValueError);
}

TEST(Features, EmbeddingFeaturesAreTableRows) {
  const std::vector<Sentence> words = {{"a", "b"}};
  Rng rng(1);
  const Vocab v = Vocab::build(words, 100);
  const EmbeddingTable t(v, uniform_matrix<double>(static_cast<Index>(v.size()), 3, rng, 1.0));
  const TaggedCorpus c = corpus_of({{{"b", "X1"}, {"q", "Y1"}}});
  const FeatureDataset f = embedding_features(t, c, schema());
  EXPECT_EQ(f.features.row(0), t.lookup("b"));
  EXPECT_EQ(f.features.row(1), t.matrix().row(Vocab::kUnk));
  EXPECT_EQ(f.layer, 0u);
}

TEST(Features, FileRoundTripIsExactUpToFloat32) {
  TempDir dir;
  const TaggedCorpus c = corpus_of({{{"a", "X1"}, {"b,\"quoted\"", "Y1"}}, {{"c", "X2"}}});
  const FeatureDataset f = extract_features(model(2), c, schema(), 1);
  save_features(f, dir / "f.npf");
  const FeatureDataset back = load_features(dir / "f.npf");
  EXPECT_EQ(back.tags, f.tags);
  EXPECT_EQ(back.tokens, f.tokens);
  EXPECT_EQ(back.sentence, f.sentence);
  EXPECT_EQ(back.position, f.position);
  EXPECT_EQ(back.labels, f.labels);
  EXPECT_EQ(back.model_id, f.model_id);
  EXPECT_EQ(back.corpus_id, f.corpus_id);
  EXPECT_EQ(back.layer, 1u);
  EXPECT_EQ(back.features, f.features.cast<float>().cast<double>());
  save_features(back, dir / "g.npf");
  EXPECT_EQ(read_file(dir / "g.npf"), read_file(dir / "f.npf"));
  write_file_atomic(dir / "bad.npf", "NPFEAT01\x03");
  EXPECT_THROW(load_features(dir / "bad.npf"), FormatError);
}

// Three well separated Gaussian-ish blobs.
FeatureDataset blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureDataset d;
  d.labels = {"A", "B", "C"};
  d.features = Tensor(static_cast<Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(rng.below(3));
    for (Index j = 0; j < 4; ++j) d.features(static_cast<Index>(i), j) = rng.uniform(-0.5, 0.5);
    d.features(static_cast<Index>(i), cls) += 3.0;
    d.tags.push_back(cls);
    d.sentence.push_back(i);
    d.position.push_back(0);
    d.tokens.push_back("t" + std::to_string(i));
  }
  return d;
}

ProbeConfig fast_probe() {
  ProbeConfig c;
  c.epochs = 10;
  c.batch_size = 16;
  c.seed = 4;
  c.adam.lr = 0.01;
  return c;
}

TEST(Probe, SeparatesBlobs) {
  const FeatureDataset train = blobs(300, 1), dev = blobs(60, 2), test = blobs(300, 3);
  ProbeTrainReport report;
  const ProbeClassifier p = train_probe(train, dev, fast_probe(), &report);
  const auto pred = predict_probe(p, test.features);
  std::size_t right = 0;
  for (std::size_t i = 0; i < test.size(); ++i) right += pred[i] == test.tags[i];
  EXPECT_GE(static_cast<double>(right) / static_cast<double>(test.size()), 0.99);
  EXPECT_EQ(report.train_loss.size(), 10u);
  EXPECT_EQ(report.dev_loss.size(), 10u);
  EXPECT_GE(report.best_epoch, 1u);
  EXPECT_DOUBLE_EQ(probe_loss(p, dev), report.dev_loss[report.best_epoch - 1]);
}

TEST(Probe, DeterministicForAFixedSeed) {
  const FeatureDataset train = blobs(100, 1), dev = blobs(30, 2);
  const ProbeClassifier a = train_probe(train, dev, fast_probe());
  const ProbeClassifier b = train_probe(train, dev, fast_probe());
  EXPECT_EQ(serialize_checkpoint(a.to_checkpoint()), serialize_checkpoint(b.to_checkpoint()));
}

TEST(Probe, BatchPredictionEqualsRowByRow) {
  const FeatureDataset train = blobs(100, 1), dev = blobs(30, 2), test = blobs(57, 5);
  const ProbeClassifier p = train_probe(train, dev, fast_probe());
  const auto batch = predict_probe(p, test.features);
  for (Index r = 0; r < test.features.rows(); ++r) {
    const RowVector<double> x = test.features.row(r);
    EXPECT_EQ(batch[static_cast<std::size_t>(r)], static_cast<int>(argmax_row(p.score_row(x))));
    EXPECT_EQ(predict_probe(p, x)[0], batch[static_cast<std::size_t>(r)]);
  }
}

TEST(Probe, PredictionsCommuteWithRowPermutations) {
  const FeatureDataset train = blobs(100, 1), dev = blobs(30, 2), test = blobs(40, 6);
  const ProbeClassifier p = train_probe(train, dev, fast_probe());
  const auto pred = predict_probe(p, test.features);
  std::vector<Index> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(9);
  rng.shuffle(perm);
  Tensor shuffled(40, 4);
  for (Index i = 0; i < 40; ++i) shuffled.row(i) = test.features.row(perm[static_cast<std::size_t>(i)]);
  const auto pred2 = predict_probe(p, shuffled);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(pred2[i], pred[static_cast<std::size_t>(perm[i])]);
}

TEST(Probe, TiesGoToTheLowestLabelId) {
  ProbeClassifier p(4, {"A", "B", "C"}, fast_probe());
  for (auto& param : p.params()) param.value.setZero();
  const auto pred = predict_probe(p, blobs(20, 1).features);
  for (int v : pred) EXPECT_EQ(v, 0);
}

TEST(Probe, CheckpointRoundTrip) {
  TempDir dir;
  const ProbeClassifier p = train_probe(blobs(60, 1), blobs(20, 2), fast_probe());
  p.save(dir / "p.ckpt");
  const ProbeClassifier back = ProbeClassifier::load(dir / "p.ckpt");
  EXPECT_EQ(back.labels(), p.labels());
  const Tensor x = blobs(30, 3).features;
  EXPECT_EQ(predict_probe(back, x), predict_probe(p, x));
}

TEST(Probe, RejectsMismatchedInputs) {
  FeatureDataset train = blobs(30, 1);
  FeatureDataset dev = blobs(10, 2);
  dev.labels = {"A", "B", "Z"};
  EXPECT_THROW(train_probe(train, dev, fast_probe()), ValueError);
  const ProbeClassifier p(4, {"A", "B", "C"}, fast_probe());
  EXPECT_THROW(predict_probe(p, Tensor::Zero(2, 3)), ShapeError);
  ProbeConfig bad = fast_probe();
  bad.dropout = 1.0;
  EXPECT_THROW(ProbeClassifier(4, {"A"}, bad), ValueError);
}

TEST(Probe, PredictionDumpFormat) {
  FeatureDataset d = blobs(2, 1);
  d.tokens[1] = "a,b";
  const std::string csv = prediction_dump_csv(d, {d.tags[0], -1});
  const auto lines = split(csv, '\n');
  EXPECT_EQ(lines[0], "sentence,token_index,token,gold,predicted");
  EXPECT_EQ(lines[1], "0,0,t0," + d.labels[static_cast<std::size_t>(d.tags[0])] + "," +
                          d.labels[static_cast<std::size_t>(d.tags[0])]);
  EXPECT_EQ(lines[2], "1,0,\"a,b\"," + d.labels[static_cast<std::size_t>(d.tags[1])] + ",");
}

}  // namespace
}  // namespace nmtprobe
