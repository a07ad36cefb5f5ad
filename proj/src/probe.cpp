#include "nmtprobe/probe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "nmtprobe/csv.hpp"
#include "nmtprobe/io.hpp"
#include "nmtprobe/skipgram.hpp"

namespace nmtprobe {

std::string_view to_string(Granularity g) { return g == Granularity::fine ? "fine" : "coarse"; }

std::vector<std::size_t> FeatureDataset::sentence_offsets() const {
  std::vector<std::size_t> offsets;
  for (std::size_t r = 0; r < size(); ++r) {
    if (r == 0 || sentence[r] != sentence[r - 1]) offsets.push_back(r);
  }
  offsets.push_back(size());
  return offsets;
}

namespace {

int gold_id(const TagSchema& schema, const std::string& tag, Granularity granularity) {
  return granularity == Granularity::fine ? schema.fine_id(tag) : schema.coarse_id(schema.coarse_name_of(tag));
}

FeatureDataset empty_dataset(const TaggedCorpus& corpus, const TagSchema& schema, Granularity granularity,
                             std::size_t width) {
  FeatureDataset data;
  const std::size_t n = corpus.token_count();
  data.features = Tensor::Zero(static_cast<Index>(n), static_cast<Index>(width));
  data.tags.reserve(n);
  data.sentence.reserve(n);
  data.position.reserve(n);
  data.tokens.reserve(n);
  data.labels = granularity == Granularity::fine ? schema.fine() : schema.coarse();
  data.corpus_id = corpus_id(corpus);
  return data;
}

void push_token(FeatureDataset& data, const TaggedCorpus& corpus, const TagSchema& schema, Granularity granularity,
                std::size_t s, std::size_t j) {
  const TaggedSentence& sent = corpus.sentences[s];
  data.tags.push_back(gold_id(schema, sent.tags[j], granularity));
  data.sentence.push_back(s);
  data.position.push_back(j);
  data.tokens.push_back(sent.tokens[j]);
}

}  // namespace

FeatureDataset extract_features(const Seq2SeqModel& model, const TaggedCorpus& corpus, const TagSchema& schema,
                                std::size_t k, Granularity granularity) {
  const std::size_t L = model.config().num_layers;
  if (k > L) {
    throw ValueError("extract_features: layer " + std::to_string(k) + " out of range 0.." + std::to_string(L));
  }
  FeatureDataset data = empty_dataset(corpus, schema, granularity, model.layer_width(k));
  data.layer = k;
  data.model_id = model.model_id();
  Index row = 0;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const TaggedSentence& sent = corpus.sentences[s];
    const std::vector<int> ids = model.src_vocab().encode(sent.tokens);
    const LayerStates states = encode(model, ids);
    for (std::size_t j = 0; j < sent.tokens.size(); ++j) {
      data.features.row(row++) = states.layers[k].row(static_cast<Index>(j));
      push_token(data, corpus, schema, granularity, s, j);
    }
  }
  return data;
}

FeatureDataset embedding_features(const EmbeddingTable& table, const TaggedCorpus& corpus, const TagSchema& schema,
                                  Granularity granularity) {
  FeatureDataset data = empty_dataset(corpus, schema, granularity, table.dim());
  data.model_id = "skipgram:" + std::to_string(table.size()) + "x" + std::to_string(table.dim());
  Index row = 0;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const TaggedSentence& sent = corpus.sentences[s];
    for (std::size_t j = 0; j < sent.tokens.size(); ++j) {
      data.features.row(row++) = table.lookup(sent.tokens[j]);
      push_token(data, corpus, schema, granularity, s, j);
    }
  }
  return data;
}

std::string corpus_id(const TaggedCorpus& corpus) {
  std::uint64_t h = fnv1a(to_string(corpus.kind));
  for (const auto& sent : corpus.sentences) {
    for (std::size_t j = 0; j < sent.tokens.size(); ++j) {
      h = fnv1a(sent.tokens[j], h);
      h = fnv1a("\t", h);
      h = fnv1a(sent.tags[j], h);
      h = fnv1a("\n", h);
    }
    h = fnv1a("\n", h);
  }
  return hex_id(h);
}

// ---------------------------------------------------------------------------
// Feature cache

namespace {

constexpr std::string_view kFeatureMagic = "NPFEAT01";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xffu);
}

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string origin) : data_(data), origin_(std::move(origin)) {}

  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) throw FormatError(origin_, 0, "truncated feature file");
    const std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    const std::string_view b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == data_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string origin_;
};

}  // namespace

void save_features(const FeatureDataset& data, const std::filesystem::path& path) {
  std::string header;
  header += "model_id=" + data.model_id + "\n";
  header += "corpus_id=" + data.corpus_id + "\n";
  header += "layer=" + std::to_string(data.layer) + "\n";
  header += "split=" + std::string(to_string(data.split)) + "\n";
  header += "rows=" + std::to_string(data.size()) + "\n";
  header += "width=" + std::to_string(data.width()) + "\n";
  header += "labels=" + join(data.labels, " ") + "\n";

  std::string out(kFeatureMagic);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  for (std::size_t r = 0; r < data.size(); ++r) {
    put_u32(out, static_cast<std::uint32_t>(data.sentence[r]));
    put_u32(out, static_cast<std::uint32_t>(data.position[r]));
    put_u32(out, static_cast<std::uint32_t>(data.tags[r]));
    put_u32(out, static_cast<std::uint32_t>(data.tokens[r].size()));
    out += data.tokens[r];
    for (Index c = 0; c < data.features.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(data.features(static_cast<Index>(r), c))));
    }
  }
  write_file_atomic(path, out);
}

FeatureDataset load_features(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader in(bytes, path.string());
  if (in.take(kFeatureMagic.size()) != kFeatureMagic) throw FormatError(path.string(), 0, "not a feature file");
  const std::string header(in.take(in.u32()));

  std::map<std::string, std::string> fields;
  for (const auto& line : split(header, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string(), 0, "bad header line '" + line + "'");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const char* key) {
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError(path.string(), 0, std::string("header lacks '") + key + "'");
    return it->second;
  };
  auto number = [&](const char* key) {
    try {
      return static_cast<std::size_t>(std::stoull(field(key)));
    } catch (const std::logic_error&) {
      throw FormatError(path.string(), 0, std::string("header field '") + key + "' is not a number");
    }
  };

  FeatureDataset data;
  data.model_id = field("model_id");
  data.corpus_id = field("corpus_id");
  data.layer = number("layer");
  const std::string split_name = field("split");
  if (split_name == "train") {
    data.split = Split::train;
  } else if (split_name == "dev") {
    data.split = Split::dev;
  } else if (split_name == "test") {
    data.split = Split::test;
  } else {
    throw FormatError(path.string(), 0, "unknown split '" + split_name + "'");
  }
  data.labels = split_whitespace(field("labels"));
  const std::size_t rows = number("rows");
  const std::size_t width = number("width");

  data.features.resize(static_cast<Index>(rows), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows; ++r) {
    data.sentence.push_back(in.u32());
    data.position.push_back(in.u32());
    const int tag = static_cast<int>(in.u32());
    if (tag < 0 || static_cast<std::size_t>(tag) >= data.labels.size()) {
      throw FormatError(path.string(), 0, "tag id " + std::to_string(tag) + " outside label inventory");
    }
    data.tags.push_back(tag);
    data.tokens.emplace_back(in.take(in.u32()));
    for (std::size_t c = 0; c < width; ++c) {
      data.features(static_cast<Index>(r), static_cast<Index>(c)) = std::bit_cast<float>(in.u32());
    }
  }
  if (!in.done()) throw FormatError(path.string(), 0, "trailing bytes after last row");
  return data;
}

// ---------------------------------------------------------------------------
// Classifier

ProbeClassifier::ProbeClassifier(std::size_t input_width, std::vector<std::string> labels, const ProbeConfig& config)
    : input_width_(input_width), labels_(std::move(labels)), config_(config) {
  if (input_width == 0) throw ValueError("probe: input width must be positive");
  if (labels_.empty()) throw ValueError("probe: empty label inventory");
  if (config.dropout < 0.0 || config.dropout >= 1.0) throw ValueError("probe: dropout must be in [0, 1)");
  if (config.batch_size == 0) throw ValueError("probe: batch_size must be positive");
  Rng rng(derive_seed(config.seed, "probe.init"));
  const auto w = static_cast<Index>(input_width);
  const auto t = static_cast<Index>(labels_.size());
  params_.add("probe.hidden.weight", uniform_matrix<double>(w, w, rng, config.init_range));
  params_.add("probe.hidden.bias", Tensor::Zero(1, w));
  params_.add("probe.out.weight", uniform_matrix<double>(w, t, rng, config.init_range));
  params_.add("probe.out.bias", Tensor::Zero(1, t));
}

Var ProbeClassifier::logits(Graph& g, Var features) {
  if (static_cast<std::size_t>(features.cols()) != input_width_) {
    throw ShapeError("probe: feature width " + std::to_string(features.cols()) + ", expected " +
                     std::to_string(input_width_));
  }
  Var h = relu(matmul(features, g.param(params_[0])) + g.param(params_[1]));
  h = dropout(h, config_.dropout);
  return matmul(h, g.param(params_[2])) + g.param(params_[3]);
}

RowVector<double> ProbeClassifier::score_row(const RowVector<double>& x) const {
  if (static_cast<std::size_t>(x.size()) != input_width_) {
    throw ShapeError("probe: feature width " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_width_));
  }
  const RowVector<double> h = (x * params_[0].value + params_[1].value).cwiseMax(0.0);
  return h * params_[2].value + params_[3].value;
}

Checkpoint ProbeClassifier::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "probe";
  ckpt.meta["input_width"] = std::to_string(input_width_);
  ckpt.meta["labels"] = join(labels_, " ");
  ckpt.meta["dropout"] = format_exact(config_.dropout);
  ckpt.meta["seed"] = std::to_string(config_.seed);
  ckpt.params = params_;
  return ckpt;
}

ProbeClassifier ProbeClassifier::from_checkpoint(const Checkpoint& ckpt) {
  auto field = [&](const char* key) {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw ValueError(std::string("checkpoint lacks meta '") + key + "'");
    return it->second;
  };
  if (field("kind") != "probe") throw ValueError("checkpoint is not a probe");
  ProbeConfig config;
  config.dropout = std::stod(field("dropout"));
  config.seed = std::stoull(field("seed"));
  ProbeClassifier probe(std::stoull(field("input_width")), split_whitespace(field("labels")), config);
  for (auto& p : probe.params_) {
    const Parameter& stored = ckpt.params.at(p.name);
    if (stored.value.rows() != p.value.rows() || stored.value.cols() != p.value.cols()) {
      throw ShapeError("checkpoint tensor '" + p.name + "' has shape " + shape_string(stored.value) + ", expected " +
                       shape_string(p.value));
    }
    p.value = stored.value;
  }
  return probe;
}

void ProbeClassifier::save(const std::filesystem::path& path) const { save_checkpoint(path, to_checkpoint()); }

ProbeClassifier ProbeClassifier::load(const std::filesystem::path& path) {
  return from_checkpoint(load_checkpoint(path));
}

namespace {

void check_tags(const FeatureDataset& data, std::size_t label_count, const char* which) {
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.tags[r] < 0 || static_cast<std::size_t>(data.tags[r]) >= label_count) {
      throw ValueError(std::string("probe: ") + which + " row " + std::to_string(r) + " has tag id " +
                       std::to_string(data.tags[r]) + " outside the inventory of " + std::to_string(label_count) +
                       " labels");
    }
  }
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
  Tensor out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

}  // namespace

double probe_loss(const ProbeClassifier& probe, const FeatureDataset& data) {
  if (data.size() == 0) throw ValueError("probe_loss: empty dataset");
  check_tags(data, probe.labels().size(), "evaluation");
  // Eval graphs never run backward, so the parameters are only read.
  auto& model = const_cast<ProbeClassifier&>(probe);
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    Graph g(Mode::eval);
    const Var logits = model.logits(g, g.constant(gather_rows(data.features, rows)));
    const std::span<const int> targets(data.tags.data() + start, end - start);
    total += cross_entropy(logits, targets, 1.0).value()(0, 0);
  }
  return total / static_cast<double>(data.size());
}

ProbeClassifier train_probe(const FeatureDataset& train, const FeatureDataset& dev, const ProbeConfig& config,
                            ProbeTrainReport* report) {
  if (train.size() == 0) throw ValueError("train_probe: empty training set");
  if (dev.size() == 0) throw ValueError("train_probe: empty dev set");
  if (train.width() != dev.width()) {
    throw ShapeError("train_probe: train width " + std::to_string(train.width()) + " != dev width " +
                     std::to_string(dev.width()));
  }
  if (train.labels != dev.labels) throw ValueError("train_probe: train and dev label inventories differ");
  check_tags(train, train.labels.size(), "train");
  check_tags(dev, train.labels.size(), "dev");

  ProbeClassifier probe(train.width(), train.labels, config);
  ProbeTrainReport local;
  ProbeTrainReport& rep = report ? *report : local;
  rep = {};

  Adam adam(config.adam);
  Rng order_rng(derive_seed(config.seed, "probe.order"));
  Rng dropout_rng(derive_seed(config.seed, "probe.dropout"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  ParameterSet best = probe.params();
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<int> targets;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      targets.clear();
      for (std::size_t r : rows) targets.push_back(train.tags[r]);
      Graph g(Mode::train, dropout_rng.next());
      const Var logits = probe.logits(g, g.constant(gather_rows(train.features, rows)));
      const Var loss = cross_entropy(logits, targets, static_cast<double>(rows.size()));
      probe.params().zero_grad();
      g.backward(loss);
      adam.step(probe.params());
      total += loss.value()(0, 0) * static_cast<double>(rows.size());
    }
    const double train_loss = total / static_cast<double>(train.size());
    const double dev_loss = probe_loss(probe, dev);
    if (!std::isfinite(train_loss) || !std::isfinite(dev_loss)) {
      throw DivergenceError(static_cast<int>(epoch), "probe loss is not finite");
    }
    rep.train_loss.push_back(train_loss);
    rep.dev_loss.push_back(dev_loss);
    if (dev_loss < best_loss) {
      best_loss = dev_loss;
      best = probe.params();
      rep.best_epoch = epoch;
    }
  }
  for (std::size_t i = 0; i < best.size(); ++i) probe.params()[i].value = best[i].value;
  return probe;
}

std::vector<int> predict_probe(const ProbeClassifier& probe, const Tensor& features) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Index r = 0; r < features.rows(); ++r) {
    out.push_back(static_cast<int>(argmax_row(probe.score_row(features.row(r)))));
  }
  return out;
}

std::string prediction_dump_csv(const FeatureDataset& data, const std::vector<int>& predicted) {
  std::string out = csv_row({"sentence", "token_index", "token", "gold", "predicted"});
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::string pred;
    if (r < predicted.size() && predicted[r] >= 0 && static_cast<std::size_t>(predicted[r]) < data.labels.size()) {
      pred = data.labels[static_cast<std::size_t>(predicted[r])];
    }
    out += csv_row({std::to_string(data.sentence[r]), std::to_string(data.position[r]), data.tokens[r],
                    data.labels[static_cast<std::size_t>(data.tags[r])], pred});
  }
  return out;
}

}  // namespace nmtprobe
