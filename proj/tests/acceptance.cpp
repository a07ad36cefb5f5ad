// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "nmtprobe/baselines.hpp"
#include "nmtprobe/csv.hpp"
#include "nmtprobe/experiment.hpp"
#include "nmtprobe/gradcheck.hpp"
#include "nmtprobe/io.hpp"
#include "nmtprobe/metrics.hpp"
#include "nmtprobe/probe.hpp"
#include "nmtprobe/seq2seq.hpp"
#include "nmtprobe/synthetic.hpp"

using namespace nmtprobe;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Verdict criterion_grad_check() {
  const auto t0 = Clock::now();
  double worst[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    {
      ParameterSet ps;
      ps.add("w", uniform_matrix<double>(3 + 4, 16, rng, 1.0));
      ps.add("b", uniform_matrix<double>(1, 16, rng, 1.0));
      const Tensor x = uniform_matrix<double>(2, 3, rng, 1.0);
      const Tensor h0 = uniform_matrix<double>(2, 4, rng, 1.0);
      const Tensor c0 = uniform_matrix<double>(2, 4, rng, 1.0);
      const std::vector<int> tg = {1, 3};
      const auto r = grad_check(
          ps,
          [&](Graph& g) {
            const LstmState s = lstm_step(g.constant(x), {g.constant(h0), g.constant(c0)}, ps[0], ps[1]);
            return cross_entropy(add(s.h, s.c), tg, 2.0);
          },
          1e-3, Stencil::five_point);
      worst[0] = std::max(worst[0], r.max_rel_error);
    }
    {
      ParameterSet ps;
      ps.add("wq", uniform_matrix<double>(4, 5, rng, 1.0));
      ps.add("v", uniform_matrix<double>(5, 1, rng, 1.0));
      ps.add("wk", uniform_matrix<double>(4, 5, rng, 1.0));
      std::vector<Tensor> states;
      for (int j = 0; j < 3; ++j) states.push_back(uniform_matrix<double>(2, 4, rng, 1.0));
      const Tensor q = uniform_matrix<double>(2, 4, rng, 1.0);
      const std::vector<int> tg = {0, 2};
      const auto r = grad_check(
          ps,
          [&](Graph& g) {
            std::vector<Var> s, keys;
            for (const auto& t : states) {
              s.push_back(g.constant(t));
              keys.push_back(matmul(s.back(), g.param(ps[2])));
            }
            const AttentionOutput a = additive_attention(g.constant(q), keys, s, ps[0], ps[1]);
            return cross_entropy(a.context, tg, 2.0);
          },
          1e-3, Stencil::five_point);
      worst[1] = std::max(worst[1], r.max_rel_error);
    }
    {
      ProbeConfig pc;
      pc.init_range = 1.0;
      pc.seed = seed;
      ProbeClassifier probe(5, {"A", "B", "C"}, pc);
      const Tensor x = uniform_matrix<double>(4, 5, rng, 1.0);
      const std::vector<int> tg = {0, 1, 2, 1};
      // ReLU kinks rule out a wide stencil here; a small step stays on one side.
      const auto r = grad_check(probe.params(), [&](Graph& g) {
        return cross_entropy(probe.logits(g, g.constant(x)), tg, 4.0);
      });
      worst[2] = std::max(worst[2], r.max_rel_error);
    }
    {
      NmtConfig c;
      c.embed_dim = 4;
      c.hidden_dim = 4;
      c.num_layers = 2;
      c.dropout = 0.0;
      c.init_range = 1.0;
      c.bidirectional = seed % 2 == 1;
      c.residual = (seed / 2) % 2 == 1;
      c.seed = seed;
      const std::vector<Sentence> words = {{"a", "b", "c", "d"}};
      Seq2SeqModel m(c, Vocab::build(words, 100), Vocab::build(words, 100));
      const std::vector<std::vector<int>> src = {{4, 5, 6}, {5, 4, 7}};
      const std::vector<std::vector<int>> tgt = {{4}, {6}};
      const auto r = grad_check(
          m.params(), [&](Graph& g) { return m.decoder_loss(g, m.encode_batch(g, src), tgt, 2.0); }, 1e-3,
          Stencil::five_point);
      worst[3] = std::max(worst[3], r.max_rel_error);
    }
  }
  const double elapsed = seconds_since(t0);
  const double max_err = *std::max_element(worst, worst + 4);
  Verdict v;
  v.pass = max_err < 1e-4 && elapsed < 60.0;
  v.detail = "max rel error lstm=" + fmt("%.1e", worst[0]) + " attention=" + fmt("%.1e", worst[1]) +
             " probe=" + fmt("%.1e", worst[2]) + " seq2seq=" + fmt("%.1e", worst[3]) + " over 10 seeds, " +
             fmt("%.1f", elapsed) + "s";
  return v;
}

// ---------------------------------------------------------------------------
// 2. MFT oracle equivalence

// Independent oracle: for each type, score every candidate tag by the number
// of training tokens it would get right and keep the best (smallest name on
// ties); unseen types fall back to the best tag over all tokens.
std::vector<std::string> oracle_predict(const TaggedCorpus& train, const std::vector<std::string>& tagset,
                                        const Sentence& tokens) {
  auto best_for = [&](const std::string* type) {
    std::string best;
    long best_hits = -1;
    for (const auto& tag : tagset) {
      long hits = 0;
      for (const auto& s : train.sentences) {
        for (std::size_t j = 0; j < s.tokens.size(); ++j) {
          if ((!type || s.tokens[j] == *type) && s.tags[j] == tag) ++hits;
        }
      }
      if (hits > best_hits) {
        best = tag;
        best_hits = hits;
      }
    }
    return best;
  };
  std::set<std::string> seen;
  for (const auto& s : train.sentences) seen.insert(s.tokens.begin(), s.tokens.end());
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(seen.count(t) ? best_for(&t) : best_for(nullptr));
  return out;
}

Verdict criterion_mft_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t mismatches = 0, tokens = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_tags = 2 + rng.below(5);
    std::vector<std::string> tagset;
    for (std::size_t i = 0; i < n_tags; ++i) tagset.push_back("T" + std::to_string(i));
    const std::size_t n_types = 1 + rng.below(15);
    auto sentence = [&] {
      TaggedSentence s;
      const std::size_t len = 1 + rng.below(8);
      for (std::size_t j = 0; j < len; ++j) {
        s.tokens.push_back("w" + std::to_string(rng.below(n_types + 3)));
        s.tags.push_back(tagset[rng.below(n_tags)]);
      }
      return s;
    };
    TaggedCorpus train, test;
    const std::size_t n = 1 + rng.below(50);
    for (std::size_t i = 0; i < n; ++i) train.sentences.push_back(sentence());
    for (std::size_t i = 0; i < 10; ++i) test.sentences.push_back(sentence());
    const MftModel model = fit_mft(train);
    for (const auto& s : test.sentences) {
      const auto got = predict_mft(model, s.tokens);
      const auto want = oracle_predict(train, tagset, s.tokens);
      for (std::size_t j = 0; j < got.size(); ++j) mismatches += got[j] != want[j];
      tokens += got.size();
    }
  }
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = mismatches == 0 && elapsed < 60.0;
  v.detail = std::to_string(mismatches) + " mismatches over " + std::to_string(tokens) +
             " test tokens in 100 corpora, " + fmt("%.1f", elapsed) + "s";
  return v;
}

// ---------------------------------------------------------------------------
// 3. Approximate randomization vs exact enumeration; null calibration

struct Pair {
  TaggingResult a, b;
};

Pair random_pair(Rng& rng, std::size_t sentences, double acc_a, double acc_b) {
  Pair p;
  for (TaggingResult* r : {&p.a, &p.b}) r->labels = {"A", "B", "C"};
  for (std::size_t s = 0; s < sentences; ++s) {
    p.a.sentence_starts.push_back(p.a.gold.size());
    const std::size_t len = 1 + rng.below(5);
    for (std::size_t j = 0; j < len; ++j) {
      const int gold = static_cast<int>(rng.below(3));
      auto guess = [&](double acc) {
        return rng.bernoulli(acc) ? gold : (gold + 1 + static_cast<int>(rng.below(2))) % 3;
      };
      p.a.gold.push_back(gold);
      p.a.predicted.push_back(guess(acc_a));
      p.b.predicted.push_back(guess(acc_b));
    }
  }
  p.a.sentence_starts.push_back(p.a.gold.size());
  p.b.gold = p.a.gold;
  p.b.sentence_starts = p.a.sentence_starts;
  return p;
}

double exact_p(const Pair& p) {
  std::vector<long> d;
  long observed = 0;
  for (std::size_t s = 0; s + 1 < p.a.sentence_starts.size(); ++s) {
    long x = 0;
    for (std::size_t i = p.a.sentence_starts[s]; i < p.a.sentence_starts[s + 1]; ++i) {
      x += (p.a.predicted[i] == p.a.gold[i]) - (p.b.predicted[i] == p.b.gold[i]);
    }
    d.push_back(x);
    observed += x;
  }
  observed = std::labs(observed);
  const std::size_t n = d.size();
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    long t = 0;
    for (std::size_t s = 0; s < n; ++s) t += (mask >> s & 1) ? -d[s] : d[s];
    hits += std::labs(t) >= observed;
  }
  return static_cast<double>(hits) / static_cast<double>(std::size_t{1} << n);
}

Verdict criterion_significance() {
  const auto t0 = Clock::now();
  Rng rng(77);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.below(10);
    const Pair p = random_pair(rng, n, rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9));
    const double ar = approx_randomization(p.a, p.b, 10000, derive_seed(1, "exact:" + std::to_string(i))).p_value;
    worst = std::max(worst, std::abs(ar - exact_p(p)));
  }
  std::size_t rejections = 0;
  const std::size_t trials = 500;
  for (std::size_t i = 0; i < trials; ++i) {
    const Pair p = random_pair(rng, 100, 0.75, 0.75);
    rejections += approx_randomization(p.a, p.b, 10000, derive_seed(2, "null:" + std::to_string(i))).p_value <= 0.05;
  }
  const double rate = static_cast<double>(rejections) / static_cast<double>(trials);
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = worst <= 0.02 && std::abs(rate - 0.05) <= 0.02 && elapsed < 300.0;
  v.detail = "max |p_AR - p_exact| = " + fmt("%.4f", worst) + " over 50 pairs (R=10000); null rejection rate " +
             fmt("%.3f", rate) + " over 500 trials; " + fmt("%.1f", elapsed) + "s";
  return v;
}

// ---------------------------------------------------------------------------
// 4. BLEU

Verdict criterion_bleu() {
  auto w = [](const std::string& s) { return split_whitespace(s); };
  const std::vector<Sentence> corpus = {w("the cat sat on the mat"), w("a b c d e f g")};
  const double identity = bleu(corpus, corpus);
  // Hand-derived: unigram..4-gram precisions, geometric mean, brevity penalty.
  const double c1 = bleu({w("a b c d e")}, {w("a b c d f")});  // (4/5 * 3/4 * 2/3 * 1/2)^(1/4)
  const double c2 = bleu({w("a b c d")}, {w("a b c d e f")});  // exp(1 - 6/4)
  const double c3 = bleu({w("a b c d"), w("x y z w")}, {w("a b c d"), w("x y z q")});  // (7/8*5/6*3/4*1/2)^(1/4)
  const double e1 = 66.87, e2 = 60.65, e3 = 72.31;
  Verdict v;
  v.pass = std::abs(identity - 100.0) < 1e-9 && std::abs(c1 - e1) <= 0.01 && std::abs(c2 - e2) <= 0.01 &&
           std::abs(c3 - e3) <= 0.01;
  v.detail = "identity=" + fmt("%.4f", identity) + " cases=" + fmt("%.4f", c1) + "/" + fmt("%.4f", c2) + "/" +
             fmt("%.4f", c3) + " expected 66.87/60.65/72.31";
  return v;
}

// ---------------------------------------------------------------------------
// 5. Coarse-collapse monotonicity

Verdict criterion_collapse() {
  Rng rng(5);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_coarse = 1 + rng.below(5);
    std::vector<std::string> fine, coarse_of;
    for (std::size_t c = 0; c < n_coarse; ++c) {
      const std::size_t members = 1 + rng.below(4);
      for (std::size_t m = 0; m < members; ++m) {
        fine.push_back("F" + std::to_string(c) + "_" + std::to_string(m));
        coarse_of.push_back("C" + std::to_string(c));
      }
    }
    const TagSchema schema(fine, coarse_of);
    TaggingResult r;
    r.labels = fine;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      r.gold.push_back(static_cast<int>(rng.below(fine.size())));
      r.predicted.push_back(static_cast<int>(rng.below(fine.size() + 1)) - 1);
    }
    r.sentence_starts = {0, n};
    violations += accuracy(coarse_collapse(r, schema)) < accuracy(r);
  }
  Verdict v;
  v.pass = violations == 0;
  v.detail = std::to_string(violations) + " violations over 1000 random results";
  return v;
}

// ---------------------------------------------------------------------------
// 6. Layer ordering on the synthetic context-tag language

TaggedCorpus slice(const TaggedCorpus& c, std::size_t a, std::size_t b) {
  TaggedCorpus out;
  out.kind = c.kind;
  out.sentences.assign(c.sentences.begin() + static_cast<long>(a), c.sentences.begin() + static_cast<long>(b));
  return out;
}

ParallelCorpus pslice(const ParallelCorpus& c, std::size_t a, std::size_t b, Split split) {
  ParallelCorpus out;
  out.split = split;
  out.pairs.assign(c.pairs.begin() + static_cast<long>(a), c.pairs.begin() + static_cast<long>(b));
  return out;
}

double probe_accuracy(const Seq2SeqModel& model, std::size_t k, const TaggedCorpus& train, const TaggedCorpus& dev,
                      const TaggedCorpus& test, const TagSchema& schema) {
  const FeatureDataset tr = extract_features(model, train, schema, k);
  const FeatureDataset dv = extract_features(model, dev, schema, k);
  const FeatureDataset te = extract_features(model, test, schema, k);
  const ProbeClassifier probe = train_probe(tr, dv, ProbeConfig{});
  return accuracy(make_result(te, predict_probe(probe, te.features), TagKind::sem));
}

Verdict criterion_layer_ordering() {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.generator = "context-tag";
  spec.sentences = 2000;
  spec.vocab_size = 48;
  spec.classes = 4;
  spec.seed = 7;
  const SyntheticData nmt_data = make_synthetic(spec);
  spec.seed = 8;
  spec.sentences = 2200;
  const SyntheticData tag_data = make_synthetic(spec);
  const double ceiling = nmt_data.sem_ceiling;

  NmtConfig c;
  c.embed_dim = 64;
  c.hidden_dim = 64;
  c.num_layers = 2;
  c.dropout = 0.0;
  c.epochs = 15;
  c.lr_decay = 0.5;
  c.batch_size = 16;
  c.init_range = 0.3;
  c.learning_rate = 0.25;
  c.seed = 1;
  const ParallelCorpus train = pslice(nmt_data.parallel, 0, 1800, Split::train);
  const ParallelCorpus dev = pslice(nmt_data.parallel, 1800, 2000, Split::dev);
  Seq2SeqModel model = make_model_for(train, c);
  Seq2SeqModel untrained = model;
  untrained.freeze();
  train_nmt(model, train, dev);

  const TaggedCorpus ttr = slice(tag_data.sem, 0, 1000), tdv = slice(tag_data.sem, 1000, 1200),
                     tte = slice(tag_data.sem, 1200, 2200);
  const TagSchema& schema = tag_data.sem_schema;
  const double k0 = probe_accuracy(model, 0, ttr, tdv, tte, schema);
  const double k1 = probe_accuracy(model, 1, ttr, tdv, tte, schema);
  const double u1 = probe_accuracy(untrained, 1, ttr, tdv, tte, schema);
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = k0 <= ceiling + 0.02 && k1 >= ceiling + 0.20 && k1 - u1 >= 0.10 && elapsed < 900.0;
  v.detail = "ceiling=" + fmt("%.2f", 100 * ceiling) + " layer0=" + fmt("%.2f", 100 * k0) +
             " layer1=" + fmt("%.2f", 100 * k1) + " untrained layer1=" + fmt("%.2f", 100 * u1) + "; " +
             fmt("%.0f", elapsed) + "s";
  return v;
}

// ---------------------------------------------------------------------------
// 7. Causality and residual identity

Verdict criterion_encoder_invariants() {
  Rng rng(31);
  std::size_t causal_checks = 0, causal_fail = 0, bi_checks = 0, bi_fail = 0, res_checks = 0, res_fail = 0;
  const std::vector<Sentence> words = {{"a", "b", "c", "d", "e", "f", "g", "h"}};
  const Vocab vocab = Vocab::build(words, 100);
  for (int trial = 0; trial < 100; ++trial) {
    NmtConfig c;
    c.num_layers = 1 + rng.below(4);
    c.bidirectional = rng.bernoulli(0.3);
    c.residual = rng.bernoulli(0.5);
    c.hidden_dim = 2 * (1 + rng.below(5));
    c.embed_dim = c.residual ? c.hidden_dim : 1 + rng.below(9);
    c.init_range = rng.uniform(0.05, 1.0);
    c.dropout = rng.uniform(0.0, 0.5);  // must not matter: encode runs in eval mode
    c.seed = rng.next();
    Seq2SeqModel model(c, vocab, vocab);
    model.freeze();
    const std::size_t len = 2 + rng.below(10);
    std::vector<int> ids(len);
    for (int& id : ids) id = 4 + static_cast<int>(rng.below(8));
    const LayerStates base = encode(model, ids);
    const std::size_t j = 1 + rng.below(len - 1);
    std::vector<int> changed = ids;
    for (std::size_t i = j; i < len; ++i) changed[i] = 4 + (changed[i] - 4 + 1 + static_cast<int>(rng.below(7))) % 8;
    const LayerStates other = encode(model, changed);
    if (!c.bidirectional) {
      ++causal_checks;
      bool ok = true;
      for (std::size_t k = 0; k < base.layers.size(); ++k) {
        ok = ok && base.layers[k].topRows(static_cast<Index>(j)) == other.layers[k].topRows(static_cast<Index>(j));
      }
      causal_fail += !ok;
    } else {
      // Bidirectional encoders must see the suffix change at position 0.
      ++bi_checks;
      bi_fail += base.layers[1].row(0) == other.layers[1].row(0);
    }
    if (c.residual && c.num_layers >= 2) {
      const std::size_t k = 2 + rng.below(c.num_layers - 1);
      Seq2SeqModel zeroed(c, vocab, vocab);
      for (auto& p : zeroed.params()) {
        if (p.name.rfind("enc.l" + std::to_string(k) + ".", 0) == 0) p.value.setZero();
      }
      zeroed.freeze();
      const LayerStates st = encode(zeroed, ids);
      ++res_checks;
      res_fail += !(st.layers[k] == st.layers[k - 1]);
    }
  }
  Verdict v;
  v.pass = causal_fail == 0 && bi_fail == 0 && res_fail == 0 && causal_checks > 0 && res_checks > 0;
  v.detail = "causality " + std::to_string(causal_checks - causal_fail) + "/" + std::to_string(causal_checks) +
             ", bidirectional lookahead " + std::to_string(bi_checks - bi_fail) + "/" + std::to_string(bi_checks) +
             ", residual identity " + std::to_string(res_checks - res_fail) + "/" + std::to_string(res_checks) +
             " over 100 configs";
  return v;
}

// ---------------------------------------------------------------------------
// 8 and 9. Grid determinism and report shapes

const char* kGrid = R"([experiment]
name = acceptance
seed = 3

[data]
vocab_size = 24
nmt_sentences = 200 40 40
tag_sentences = 150 40 60

[nmt]
embed_dim = 16
hidden_dim = 16
layers = 2
epochs = 2
learning_rate = 0.25
init_range = 0.3
batch_size = 16
dropout = 0

[grid]
targets = de fr
architectures = bi res
depths = 1 3
data_fractions = 0.5

[probe]
epochs = 5

[skipgram]
dim = 16
epochs = 2

[word2tag]
epochs = 2
embed_dim = 16
hidden_dim = 16
layers = 1

[analysis]
shuffles = 500
)";

std::map<std::string, std::string> report_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

Verdict criterion_determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig c = parse_experiment_config(kGrid, "acceptance");
    c.output = work / ("grid_run" + std::to_string(i + 1));
    c.jobs = 2;
    fs::remove_all(c.output);
    run_experiment(c);
    runs[i] = report_files(report_root(c));
  }
  std::size_t differing = 0;
  for (const auto& [name, text] : runs[0]) differing += !runs[1].count(name) || runs[1].at(name) != text;
  differing += runs[1].size() != runs[0].size();
  Verdict v;
  v.pass = differing == 0 && !runs[0].empty();
  v.detail = std::to_string(runs[0].size()) + " report files, " + std::to_string(differing) +
             " differing between two fresh runs; " + fmt("%.1f", seconds_since(t0)) + "s";
  return v;
}

struct ShapeCheck {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// Structural checks on one report directory against a config.
void check_shapes(const ExperimentConfig& c, const ExperimentData& data, const fs::path& reports, ShapeCheck& chk,
                  const std::string& tag) {
  const std::size_t L = c.nmt.num_layers;
  const auto cols = c.columns();
  for (TagKind task : c.tasks) {
    const std::string name = "layers_" + std::string(to_string(task)) + ".csv";
    const auto rows = csv_parse(read_file(reports / name));
    std::vector<std::string> header = {"k"};
    header.insert(header.end(), cols.begin(), cols.end());
    header.push_back("cell_ids");
    chk.expect(!rows.empty() && rows[0] == header, tag + " " + name + " header");
    chk.expect(rows.size() == L + 3, tag + " " + name + " has " + std::to_string(rows.size()) + " rows");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const std::string want = r <= L + 1 ? std::to_string(r - 1) : "bleu";
      chk.expect(rows[r].size() == header.size() && rows[r][0] == want, tag + " " + name + " row " + want);
      for (std::size_t j = 1; j + 1 < rows[r].size(); ++j) chk.expect(is_number(rows[r][j]), tag + " " + name + " cell");
      chk.expect(split_whitespace(rows[r].back()).size() == cols.size(), tag + " " + name + " provenance");
    }

    const std::string fname = "f1_delta_" + std::string(to_string(task)) + ".csv";
    const auto f = csv_parse(read_file(reports / fname));
    const auto& coarse = data.tasks.at(task).schema.coarse();
    chk.expect(!f.empty() && f[0] == std::vector<std::string>{"coarse_tag", "mode", "delta", "cell_ids"},
               tag + " " + fname + " header");
    chk.expect(f.size() == 1 + 2 * coarse.size(), tag + " " + fname + " rows");
    for (std::size_t i = 0; i < coarse.size() && 2 + 2 * i < f.size(); ++i) {
      chk.expect(f[1 + 2 * i][0] == coarse[i] && f[1 + 2 * i][1] == "direct-coarse" && f[2 + 2 * i][0] == coarse[i] &&
                     f[2 + 2 * i][1] == "fine-micro" && is_number(f[1 + 2 * i][2]) && is_number(f[2 + 2 * i][2]),
                 tag + " " + fname + " row " + coarse[i]);
    }
  }

  std::vector<std::string> kcols;
  for (std::size_t k = 0; k <= L; ++k) kcols.push_back("k" + std::to_string(k));
  auto vheader = std::vector<std::string>{"variant", "task"};
  vheader.insert(vheader.end(), kcols.begin(), kcols.end());
  vheader.push_back("cell_ids");
  const auto variants = csv_parse(read_file(reports / "variants.csv"));
  chk.expect(!variants.empty() && variants[0] == vheader, tag + " variants.csv header");
  chk.expect(variants.size() == 1 + (1 + c.architectures.size()) * c.tasks.size(), tag + " variants.csv rows");

  std::size_t kmax = L;
  std::set<std::size_t> depths = {L};
  for (std::size_t d : c.depths) {
    depths.insert(d);
    kmax = std::max(kmax, d);
  }
  const auto dt = csv_parse(read_file(reports / "depths.csv"));
  chk.expect(!dt.empty() && dt[0].size() == 2 + kmax + 2 && dt[0][0] == "depth", tag + " depths.csv header");
  chk.expect(dt.size() == 1 + depths.size() * c.tasks.size(), tag + " depths.csv rows");
  for (std::size_t r = 1; r < dt.size(); ++r) {
    const std::size_t d = std::stoul(dt[r][0]);
    for (std::size_t k = 0; k <= kmax; ++k) {
      const std::string& cell = dt[r][2 + k];
      chk.expect(k <= d ? is_number(cell) : cell.empty(), tag + " depths.csv depth " + dt[r][0]);
    }
  }
}

// Every cell gets a perfect prediction or translation dump, without training.
void fake_perfect_cache(const Plan& plan, const ExperimentData& data, const fs::path& cache) {
  for (const Cell& cell : plan.cells) {
    const auto dir = cell_dir(cache, cell);
    fs::create_directories(dir);
    if (cell.kind == CellKind::nmt) {
      std::string tsv;
      for (const auto& [s, t] : data.columns.at(cell.column).test.pairs) {
        tsv += join(s, " ") + "\t" + join(t, " ") + "\t" + join(t, " ") + "\n";
      }
      write_file_atomic(dir / "translations.tsv", tsv);
    } else if (cell.kind != CellKind::skipgram) {
      const TaskData& t = data.tasks.at(cell.task);
      std::string csv = "sentence,token_index,token,gold,predicted\n";
      for (std::size_t s = 0; s < t.test.sentences.size(); ++s) {
        const auto& sent = t.test.sentences[s];
        for (std::size_t j = 0; j < sent.tokens.size(); ++j) {
          const std::string tag =
              cell.granularity == Granularity::coarse ? t.schema.coarse_name_of(sent.tags[j]) : sent.tags[j];
          csv += csv_row({std::to_string(s), std::to_string(j), sent.tokens[j], tag, tag});
        }
      }
      write_file_atomic(dir / "predictions.csv", csv);
    }
    write_file_atomic(dir / "done", cell.settings_text());
  }
}

Verdict criterion_shapes(const fs::path& work) {
  ShapeCheck chk;
  // The real grid from the determinism run.
  {
    ExperimentConfig c = parse_experiment_config(kGrid, "acceptance");
    c.output = work / "grid_run1";
    const ExperimentData data = prepare_data(c);
    check_shapes(c, data, report_root(c), chk, "grid");
  }
  // Full-size layout: 4 layers, 5 targets + autoencoder, 13 coarse SEM tags.
  std::size_t rows3 = 0, cols3 = 0, delta_rows = 0;
  {
    ExperimentConfig c = parse_experiment_config(
        "[data]\nvocab_size = 52\nclasses = 13\nnmt_sentences = 20 5 5\ntag_sentences = 20 5 30\n"
        "[nmt]\nlayers = 4\n[grid]\ntargets = ar es fr ru zh\narchitectures = bi res\ndepths = 2 3\n",
        "acceptance");
    c.output = work / "full_layout";
    fs::remove_all(c.output);
    const ExperimentData data = prepare_data(c);
    const Plan plan = plan_experiment(c, data);
    fake_perfect_cache(plan, data, cache_root(c));
    emit_reports(c, data, plan, cache_root(c), report_root(c));
    check_shapes(c, data, report_root(c), chk, "full");
    const auto t3 = csv_parse(read_file(report_root(c) / "layers_sem.csv"));
    rows3 = t3.size() - 2;            // minus header and BLEU row
    cols3 = t3[0].size() - 2;         // minus k and cell_ids
    delta_rows = csv_parse(read_file(report_root(c) / "f1_delta_sem.csv")).size() - 1;
    chk.expect(rows3 == 5 && cols3 == 6, "full layer table is " + std::to_string(rows3) + "x" + std::to_string(cols3));
    chk.expect(delta_rows == 26, "full F1-delta table has " + std::to_string(delta_rows) + " rows");
  }
  Verdict v;
  v.pass = chk.problems.empty();
  v.detail = "full layout: layer table " + std::to_string(rows3) + "x" + std::to_string(cols3) +
             " + BLEU row, F1-delta rows " + std::to_string(delta_rows) + "; ";
  v.detail += chk.problems.empty() ? "all schema checks hold" : std::to_string(chk.problems.size()) + " problems, first: " + chk.problems[0];
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work = (fs::temp_directory_path() / "nmtprobe_acceptance").string();
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory for grid runs");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient correctness", criterion_grad_check},
      {"MFT oracle equivalence", criterion_mft_oracle},
      {"significance-test exactness", criterion_significance},
      {"BLEU correctness", criterion_bleu},
      {"coarse-collapse monotonicity", criterion_collapse},
      {"layer-ordering replication", criterion_layer_ordering},
      {"causality and residual identity", criterion_encoder_invariants},
      {"end-to-end determinism", [&] { return criterion_determinism(work); }},
      {"report shape conformance", [&] { return criterion_shapes(work); }},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("threw: ") + e.what();
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
