#include "nmtprobe/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "nmtprobe/baselines.hpp"
#include "nmtprobe/io.hpp"
#include "nmtprobe/random.hpp"
#include "nmtprobe/seq2seq.hpp"
#include "nmtprobe/skipgram.hpp"
#include "nmtprobe/synthetic.hpp"

namespace nmtprobe {

MissingCellsError::MissingCellsError(std::vector<std::string> cells)
    : Error("missing", "missing grid cells: " + join(cells, " ")), cells_(std::move(cells)) {}

// ---------------------------------------------------------------------------
// Data

namespace {

ParallelCorpus slice(const ParallelCorpus& all, std::size_t begin, std::size_t end, Split split) {
  ParallelCorpus out;
  out.split = split;
  out.pairs.assign(all.pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                   all.pairs.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

TaggedCorpus slice(const TaggedCorpus& all, std::size_t begin, std::size_t end) {
  TaggedCorpus out;
  out.kind = all.kind;
  out.sentences.assign(all.sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                       all.sentences.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::string column_fingerprint(const ColumnData& c) {
  return hex_id(fnv1a(parallel_fingerprint(c.train) + parallel_fingerprint(c.dev) + parallel_fingerprint(c.test)));
}

ExperimentData synthetic_data(const ExperimentConfig& config) {
  const DataConfig& d = config.data;
  ExperimentData data;
  const auto columns = config.columns();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    SyntheticSpec spec = d.synthetic;
    spec.sentences = d.nmt_train + d.nmt_dev + d.nmt_test;
    spec.seed = derive_seed(config.seed, "nmt-data");
    if (i < config.targets.size()) {
      spec.language = static_cast<int>(i) + 1;
    } else {
      spec.generator = "copy";
    }
    const SyntheticData syn = make_synthetic(spec);
    ColumnData col;
    col.train = slice(syn.parallel, 0, d.nmt_train, Split::train);
    col.dev = slice(syn.parallel, d.nmt_train, d.nmt_train + d.nmt_dev, Split::dev);
    col.test = slice(syn.parallel, d.nmt_train + d.nmt_dev, spec.sentences, Split::test);
    col.fingerprint = column_fingerprint(col);
    data.columns.emplace(columns[i], std::move(col));
  }

  // Tagged sentences are sampled independently of the NMT data, so the
  // probes are tested on sentences the encoder never saw.
  SyntheticSpec spec = d.synthetic;
  spec.sentences = d.tag_train + d.tag_dev + d.tag_test;
  spec.seed = derive_seed(config.seed, "tag-data");
  const SyntheticData syn = make_synthetic(spec);
  data.sem_ceiling = syn.sem_ceiling;
  for (TagKind task : config.tasks) {
    const TaggedCorpus& all = task == TagKind::pos ? syn.pos : syn.sem;
    TaskData t;
    t.schema = task == TagKind::pos ? syn.pos_schema : syn.sem_schema;
    t.train = slice(all, 0, d.tag_train);
    t.dev = slice(all, d.tag_train, d.tag_train + d.tag_dev);
    t.test = slice(all, d.tag_train + d.tag_dev, spec.sentences);
    data.tasks.emplace(task, std::move(t));
  }
  return data;
}

ExperimentData file_data(const ExperimentConfig& config) {
  const DataConfig& d = config.data;
  ExperimentData data;
  const std::array<Split, 3> splits = {Split::train, Split::dev, Split::test};
  for (const auto& column : config.columns()) {
    ColumnData col;
    for (Split split : splits) {
      const std::string name(to_string(split));
      const auto src = d.parallel_dir / (name + ".src");
      const bool autoencoder = config.autoencoder && column == config.source_lang;
      const auto tgt = autoencoder ? src : d.parallel_dir / (name + "." + column);
      ParallelCorpus corpus = load_parallel(src, tgt, config.nmt.max_len, split);
      if (corpus.pairs.empty()) throw ValueError(tgt.string() + ": no usable sentence pairs");
      (split == Split::train ? col.train : split == Split::dev ? col.dev : col.test) = std::move(corpus);
    }
    col.fingerprint = column_fingerprint(col);
    data.columns.emplace(column, std::move(col));
  }
  for (TagKind task : config.tasks) {
    const std::string name(to_string(task));
    TaskData t;
    t.schema = TagSchema::load(d.tagged_dir / (name + ".schema.tsv"));
    t.train = load_tagged(d.tagged_dir / (name + ".train.tsv"), t.schema, task);
    t.dev = load_tagged(d.tagged_dir / (name + ".dev.tsv"), t.schema, task);
    t.test = load_tagged(d.tagged_dir / (name + ".test.tsv"), t.schema, task);
    for (const TaggedCorpus* c : {&t.train, &t.dev, &t.test}) {
      if (c->sentences.empty()) throw ValueError(name + ": empty tagged split");
    }
    data.tasks.emplace(task, std::move(t));
  }
  return data;
}

}  // namespace

std::string parallel_fingerprint(const ParallelCorpus& corpus) {
  std::uint64_t h = fnv1a(to_string(corpus.split));
  for (const auto& [src, tgt] : corpus.pairs) {
    h = fnv1a(join(src, " "), h);
    h = fnv1a("\t", h);
    h = fnv1a(join(tgt, " "), h);
    h = fnv1a("\n", h);
  }
  return hex_id(h);
}

ExperimentData prepare_data(const ExperimentConfig& config) {
  return config.data.source == "files" ? file_data(config) : synthetic_data(config);
}

void save_data(const ExperimentData& data, const std::filesystem::path& dir) {
  for (const auto& [name, col] : data.columns) {
    for (const ParallelCorpus* c : {&col.train, &col.dev, &col.test}) {
      const std::string split(to_string(c->split));
      save_parallel(*c, dir / "parallel" / name / (split + ".src"), dir / "parallel" / name / (split + ".tgt"));
    }
  }
  for (const auto& [task, t] : data.tasks) {
    const std::string name(to_string(task));
    t.schema.save(dir / "tagged" / (name + ".schema.tsv"));
    save_tagged(t.train, dir / "tagged" / (name + ".train.tsv"));
    save_tagged(t.dev, dir / "tagged" / (name + ".dev.tsv"));
    save_tagged(t.test, dir / "tagged" / (name + ".test.tsv"));
  }
}

// ---------------------------------------------------------------------------
// Plan

std::string_view to_string(CellKind k) {
  switch (k) {
    case CellKind::nmt:
      return "nmt";
    case CellKind::skipgram:
      return "skipgram";
    case CellKind::mft:
      return "mft";
    case CellKind::word2tag:
      return "word2tag";
    case CellKind::probe:
      return "probe";
  }
  return "?";
}

std::string Cell::settings_text() const {
  std::string out = "kind=" + std::string(to_string(kind)) + "\n";
  for (const auto& [k, v] : settings) out += k + "=" + v + "\n";
  return out;
}

const Cell* Plan::find(const std::string& id) const {
  for (const auto& c : cells) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

const Cell& Plan::at(const std::string& id) const {
  const Cell* c = find(id);
  if (!c) throw ValueError("unknown cell " + id);
  return *c;
}

const Cell* Plan::nmt(const std::string& column, const std::string& variant, std::size_t depth,
                      double fraction) const {
  for (const auto& c : cells) {
    if (c.kind == CellKind::nmt && c.column == column && c.variant == variant && c.depth == depth &&
        c.fraction == fraction) {
      return &c;
    }
  }
  return nullptr;
}

const Cell* Plan::probe(const std::string& source, TagKind task, std::size_t layer, Granularity g) const {
  for (const auto& c : cells) {
    if (c.kind == CellKind::probe && c.source == source && c.task == task && c.layer == layer &&
        c.granularity == g) {
      return &c;
    }
  }
  return nullptr;
}

const Cell* Plan::baseline(CellKind kind, TagKind task) const {
  for (const auto& c : cells) {
    if (c.kind == kind && c.task == task) return &c;
  }
  return nullptr;
}

const Cell* Plan::skipgram() const {
  for (const auto& c : cells) {
    if (c.kind == CellKind::skipgram) return &c;
  }
  return nullptr;
}

std::string variant_of(const NmtConfig& config) {
  if (config.bidirectional) return "bi";
  if (config.residual) return "res";
  return "uni";
}

namespace {

std::string task_fingerprint(const TaskData& t) {
  return hex_id(fnv1a(corpus_id(t.train) + corpus_id(t.dev) + corpus_id(t.test) + join(t.schema.fine(), " ") +
                      "|" + join(t.schema.coarse(), " ")));
}

void add_meta(Cell& cell, const std::string& prefix, const std::map<std::string, std::string>& meta) {
  for (const auto& [k, v] : meta) cell.settings.emplace_back(prefix + k, v);
}

std::map<std::string, std::string> probe_meta(const ProbeConfig& c) {
  return {{"epochs", std::to_string(c.epochs)},      {"batch_size", std::to_string(c.batch_size)},
          {"dropout", format_exact(c.dropout)},      {"init_range", format_exact(c.init_range)},
          {"lr", format_exact(c.adam.lr)},           {"beta1", format_exact(c.adam.beta1)},
          {"beta2", format_exact(c.adam.beta2)},     {"eps", format_exact(c.adam.eps)},
          {"seed", std::to_string(c.seed)}};
}

std::map<std::string, std::string> skipgram_meta(const SkipGramConfig& c) {
  return {{"dim", std::to_string(c.dim)},
          {"window", std::to_string(c.window)},
          {"negatives", std::to_string(c.negatives)},
          {"epochs", std::to_string(c.epochs)},
          {"learning_rate", format_exact(c.learning_rate)},
          {"max_vocab", std::to_string(c.max_vocab)},
          {"min_count", std::to_string(c.min_count)},
          {"seed", std::to_string(c.seed)}};
}

ProbeConfig probe_config_of(const ExperimentConfig& config) {
  ProbeConfig pc = config.probe;
  pc.seed = derive_seed(config.seed, "probe");
  return pc;
}

SkipGramConfig skipgram_config_of(const ExperimentConfig& config) {
  SkipGramConfig sc = config.skipgram;
  sc.seed = derive_seed(config.seed, "skipgram");
  return sc;
}

NmtConfig word2tag_config_of(const ExperimentConfig& config, TagKind task) {
  NmtConfig c = config.word2tag_nmt;
  c.seed = derive_seed(config.seed, "word2tag:" + std::string(to_string(task)));
  return c;
}

/// Training pairs of a data-size ablation cell: the first share of the
/// training split, at least one pair.
ParallelCorpus fraction_of(const ParallelCorpus& train, double fraction) {
  if (fraction >= 1.0) return train;
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.pairs.size())));
  return slice(train, 0, std::max<std::size_t>(1, std::min(n, train.pairs.size())), Split::train);
}

class PlanBuilder {
 public:
  PlanBuilder(const ExperimentConfig& config, const ExperimentData& data) : config_(config), data_(data) {}

  const Cell& add(Cell cell) {
    cell.id = hex_id(fnv1a(cell.settings_text()));
    if (!ids_.insert(cell.id).second) return plan_.at(cell.id);
    plan_.cells.push_back(std::move(cell));
    return plan_.cells.back();
  }

  std::string nmt(const std::string& column, const NmtConfig& arch, double fraction, bool main_grid) {
    Cell cell;
    cell.kind = CellKind::nmt;
    cell.column = column;
    cell.nmt = arch;
    cell.nmt.seed = derive_seed(config_.seed, "nmt:" + column);
    cell.variant = variant_of(arch);
    cell.depth = arch.num_layers;
    cell.fraction = fraction;
    cell.main_grid = main_grid;
    cell.settings.emplace_back("column", column);
    cell.settings.emplace_back("data", data_.columns.at(column).fingerprint);
    cell.settings.emplace_back("fraction", format_exact(fraction));
    add_meta(cell, "nmt.", cell.nmt.to_meta());
    return add(std::move(cell)).id;
  }

  void probe(const Cell& source, TagKind task, std::size_t layer, Granularity g) {
    Cell cell;
    cell.kind = CellKind::probe;
    cell.source = source.id;
    cell.column = source.column;
    cell.variant = source.variant;
    cell.depth = source.depth;
    cell.fraction = source.fraction;
    cell.main_grid = source.main_grid;
    cell.task = task;
    cell.layer = layer;
    cell.granularity = g;
    cell.settings.emplace_back("source", source.id);
    cell.settings.emplace_back("task", std::string(to_string(task)));
    cell.settings.emplace_back("data", task_fingerprint(data_.tasks.at(task)));
    cell.settings.emplace_back("layer", std::to_string(layer));
    cell.settings.emplace_back("granularity", std::string(to_string(g)));
    add_meta(cell, "probe.", probe_meta(probe_config_of(config_)));
    add(std::move(cell));
  }

  Plan build() {
    const std::size_t depth = config_.nmt.num_layers;
    const std::string base = variant_of(config_.nmt);
    std::vector<std::string> nmt_ids;
    auto push = [&](const std::string& id) {
      if (std::find(nmt_ids.begin(), nmt_ids.end(), id) == nmt_ids.end()) nmt_ids.push_back(id);
    };

    for (const auto& column : config_.columns()) push(nmt(column, config_.nmt, 1.0, true));
    for (const auto& a : config_.architectures) {
      if (a == base) continue;
      NmtConfig arch = config_.nmt;
      arch.bidirectional = a == "bi";
      arch.residual = a == "res";
      for (const auto& target : config_.targets) push(nmt(target, arch, 1.0, false));
    }
    for (std::size_t d : config_.depths) {
      if (d == depth) continue;
      NmtConfig arch = config_.nmt;
      arch.num_layers = d;
      for (const auto& target : config_.targets) push(nmt(target, arch, 1.0, false));
    }
    for (double f : config_.data_fractions) {
      for (const auto& column : config_.columns()) push(nmt(column, config_.nmt, f, false));
    }

    std::string skipgram_id;
    if (config_.unsupemb) {
      Cell cell;
      cell.kind = CellKind::skipgram;
      cell.column = config_.columns().front();
      cell.settings.emplace_back("data", parallel_fingerprint(data_.columns.at(cell.column).train));
      add_meta(cell, "skipgram.", skipgram_meta(skipgram_config_of(config_)));
      skipgram_id = add(std::move(cell)).id;
    }
    for (TagKind task : config_.tasks) {
      const std::string fp = task_fingerprint(data_.tasks.at(task));
      if (config_.mft) {
        Cell cell;
        cell.kind = CellKind::mft;
        cell.task = task;
        cell.settings.emplace_back("task", std::string(to_string(task)));
        cell.settings.emplace_back("data", fp);
        add(std::move(cell));
      }
      if (config_.word2tag) {
        Cell cell;
        cell.kind = CellKind::word2tag;
        cell.task = task;
        cell.nmt = word2tag_config_of(config_, task);
        cell.settings.emplace_back("task", std::string(to_string(task)));
        cell.settings.emplace_back("data", fp);
        add_meta(cell, "nmt.", cell.nmt.to_meta());
        add(std::move(cell));
      }
    }

    for (const auto& id : nmt_ids) {
      const Cell source = plan_.at(id);
      for (TagKind task : config_.tasks) {
        for (std::size_t k : config_.probe_layers(source.depth)) {
          probe(source, task, k, Granularity::fine);
          if (config_.coarse && source.main_grid) probe(source, task, k, Granularity::coarse);
        }
      }
    }
    if (!skipgram_id.empty()) {
      const Cell source = plan_.at(skipgram_id);
      for (TagKind task : config_.tasks) probe(source, task, 0, Granularity::fine);
    }
    return std::move(plan_);
  }

 private:
  const ExperimentConfig& config_;
  const ExperimentData& data_;
  Plan plan_;
  std::set<std::string> ids_;
};

}  // namespace

Plan plan_experiment(const ExperimentConfig& config, const ExperimentData& data) {
  return PlanBuilder(config, data).build();
}

std::filesystem::path cell_dir(const std::filesystem::path& cache, const Cell& cell) {
  return cache / std::string(to_string(cell.kind)) / cell.id;
}

bool cell_complete(const std::filesystem::path& cache, const Cell& cell) {
  return std::filesystem::exists(cell_dir(cache, cell) / "done");
}

std::filesystem::path cache_root(const ExperimentConfig& config) { return config.output / "cache"; }
std::filesystem::path report_root(const ExperimentConfig& config) { return config.output / "reports"; }

// ---------------------------------------------------------------------------
// Execution

namespace {

std::string translations_tsv(const Seq2SeqModel& model, const ParallelCorpus& test) {
  std::string out;
  for (const auto& [src, ref] : test.pairs) {
    const Sentence hyp = translate_greedy(model, src, 2 * src.size() + 5);
    out += join(src, " ") + "\t" + join(ref, " ") + "\t" + join(hyp, " ") + "\n";
  }
  return out;
}

std::string probe_log_csv(const ProbeTrainReport& r) {
  std::string out = "epoch,train_loss,dev_loss,best\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_exact(r.train_loss[e]) + "," + format_exact(r.dev_loss[e]) + "," +
           (e + 1 == r.best_epoch ? "1" : "0") + "\n";
  }
  return out;
}

/// Predicted tag strings outside the label inventory (reserved tokens a
/// sequence model may emit) count as missing predictions.
std::vector<std::vector<std::string>> keep_known(std::vector<std::vector<std::string>> predicted,
                                                 const TagSchema& schema) {
  for (auto& sent : predicted) {
    for (auto& tag : sent) {
      if (!schema.has_fine(tag)) tag.clear();
    }
  }
  return predicted;
}

FeatureDataset coarsen(FeatureDataset data, const TagSchema& schema) {
  for (int& t : data.tags) t = schema.coarse_of(t);
  data.labels = schema.coarse();
  return data;
}

class Executor {
 public:
  Executor(const ExperimentConfig& config, const ExperimentData& data, const Plan& plan,
           std::filesystem::path cache)
      : config_(config), data_(data), plan_(plan), cache_(std::move(cache)) {}

  void run_nmt(const Cell& cell) {
    const ColumnData& col = data_.columns.at(cell.column);
    const ParallelCorpus train = fraction_of(col.train, cell.fraction);
    Seq2SeqModel model = make_model_for(train, cell.nmt);
    const TrainReport report = train_nmt(model, train, col.dev);
    const auto dir = cell_dir(cache_, cell);
    model.save(dir / "model.ckpt");
    write_file_atomic(dir / "training_log.csv", training_log_csv(report));
    write_file_atomic(dir / "translations.tsv", translations_tsv(model, col.test));
  }

  void run_skipgram(const Cell& cell) {
    const auto sentences = data_.columns.at(cell.column).train.sources();
    SkipGramReport report;
    const EmbeddingTable table = train_skipgram(sentences, skipgram_config_of(config_), &report);
    const auto dir = cell_dir(cache_, cell);
    table.save(dir / "embeddings.txt");
    std::string log = "epoch,loss\n";
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
      log += std::to_string(e + 1) + "," + format_exact(report.epoch_loss[e]) + "\n";
    }
    write_file_atomic(dir / "training_log.csv", log);
  }

  void run_mft(const Cell& cell) {
    const TaskData& t = data_.tasks.at(cell.task);
    const MftModel model = fit_mft(t.train);
    std::vector<std::vector<std::string>> predicted;
    for (const auto& s : t.test.sentences) predicted.push_back(predict_mft(model, s.tokens));
    const TaggingResult result = make_result(t.test, t.schema.fine(), keep_known(std::move(predicted), t.schema));
    const auto dir = cell_dir(cache_, cell);
    save_mft(model, dir / "mft.tsv");
    write_file_atomic(dir / "predictions.csv", result_dump_csv(result, t.test));
  }

  void run_word2tag(const Cell& cell) {
    const TaskData& t = data_.tasks.at(cell.task);
    Seq2SeqModel model = train_word2tag(t.train, t.dev, t.schema, cell.nmt, {});
    std::vector<std::vector<std::string>> predicted;
    for (const auto& s : t.test.sentences) {
      predicted.push_back(align_positionwise(predict_word2tag(model, s.tokens), s.tokens.size()));
    }
    const TaggingResult result = make_result(t.test, t.schema.fine(), keep_known(std::move(predicted), t.schema));
    const auto dir = cell_dir(cache_, cell);
    model.save(dir / "model.ckpt");
    write_file_atomic(dir / "predictions.csv", result_dump_csv(result, t.test));
  }

  /// Fine-grained features of one source model layer over one tagged split,
  /// through the feature cache.
  FeatureDataset features(const Cell& source, const TaskData& t, const TaggedCorpus& corpus, std::size_t k) {
    const auto path = cache_ / "features" / source.id / (corpus_id(corpus) + ".k" + std::to_string(k) + ".npf");
    if (std::filesystem::exists(path)) return load_features(path);
    FeatureDataset data;
    if (source.kind == CellKind::skipgram) {
      data = embedding_features(EmbeddingTable::load(cell_dir(cache_, source) / "embeddings.txt"), corpus, t.schema);
    } else {
      data = extract_features(nmt_model(source), corpus, t.schema, k);
    }
    save_features(data, path);
    return data;
  }

  /// Runs the probes of one (source, task, layer) group; they share features.
  void run_probes(const std::vector<const Cell*>& cells) {
    const Cell& first = *cells.front();
    const Cell& source = plan_.at(first.source);
    const TaskData& t = data_.tasks.at(first.task);
    model_.reset();
    FeatureDataset train = features(source, t, t.train, first.layer);
    FeatureDataset dev = features(source, t, t.dev, first.layer);
    FeatureDataset test = features(source, t, t.test, first.layer);
    for (const Cell* cell : cells) {
      const bool coarse = cell->granularity == Granularity::coarse;
      const FeatureDataset tr = coarse ? coarsen(train, t.schema) : train;
      const FeatureDataset dv = coarse ? coarsen(dev, t.schema) : dev;
      const FeatureDataset te = coarse ? coarsen(test, t.schema) : test;
      ProbeTrainReport report;
      const ProbeClassifier probe = train_probe(tr, dv, probe_config_of(config_), &report);
      const auto predicted = predict_probe(probe, te.features);
      const auto dir = cell_dir(cache_, *cell);
      probe.save(dir / "probe.ckpt");
      write_file_atomic(dir / "probe_log.csv", probe_log_csv(report));
      write_file_atomic(dir / "predictions.csv", prediction_dump_csv(te, predicted));
      mark_done(*cell);
    }
    model_.reset();
  }

  void mark_done(const Cell& cell) { write_file_atomic(cell_dir(cache_, cell) / "done", cell.settings_text()); }

 private:
  const Seq2SeqModel& nmt_model(const Cell& source) {
    if (!model_) {
      model_ = std::make_unique<Seq2SeqModel>(Seq2SeqModel::load(cell_dir(cache_, source) / "model.ckpt"));
    }
    return *model_;
  }

  const ExperimentConfig& config_;
  const ExperimentData& data_;
  const Plan& plan_;
  std::filesystem::path cache_;
  std::unique_ptr<Seq2SeqModel> model_;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t jobs, std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  const std::size_t threads = std::min(jobs, n);
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
}

std::string describe(const Cell& c) {
  std::string out(to_string(c.kind));
  if (c.kind == CellKind::nmt || (c.kind == CellKind::probe && !c.column.empty() && c.depth > 0)) {
    out += " " + c.column + " " + c.variant + " L" + std::to_string(c.depth);
    if (c.fraction < 1.0) out += " f" + format_exact(c.fraction);
  }
  if (c.kind == CellKind::probe || c.kind == CellKind::mft || c.kind == CellKind::word2tag) {
    out += " " + std::string(to_string(c.task));
  }
  if (c.kind == CellKind::probe) {
    out += " k" + std::to_string(c.layer) + " " + std::string(to_string(c.granularity));
  }
  return out;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const std::size_t jobs = options.jobs ? options.jobs : config.jobs;
  std::mutex log_mutex;
  auto log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(line);
  };

  const ExperimentData data = prepare_data(config);
  save_data(data, config.output / "data");
  const Plan plan = plan_experiment(config, data);
  const auto cache = cache_root(config);

  RunSummary summary;
  std::vector<char> ran(plan.cells.size(), 0);
  std::vector<std::string> errors(plan.cells.size());

  auto index_of = [&](const Cell& c) { return static_cast<std::size_t>(&c - plan.cells.data()); };
  auto finish_stage = [&] {
    for (std::size_t i = 0; i < plan.cells.size(); ++i) {
      if (!errors[i].empty()) throw CellError(plan.cells[i].id, errors[i]);
    }
  };

  // Stage 1: models and baselines.
  std::vector<const Cell*> stage1;
  for (const auto& c : plan.cells) {
    if (c.kind != CellKind::probe && !cell_complete(cache, c)) stage1.push_back(&c);
  }
  parallel_for(jobs, stage1.size(), [&](std::size_t i) {
    const Cell& cell = *stage1[i];
    try {
      log(cell.id + " " + describe(cell) + ": training");
      Executor worker(config, data, plan, cache);
      switch (cell.kind) {
        case CellKind::nmt:
          worker.run_nmt(cell);
          break;
        case CellKind::skipgram:
          worker.run_skipgram(cell);
          break;
        case CellKind::mft:
          worker.run_mft(cell);
          break;
        case CellKind::word2tag:
          worker.run_word2tag(cell);
          break;
        case CellKind::probe:
          break;
      }
      worker.mark_done(cell);
      ran[index_of(cell)] = 1;
      log(cell.id + " " + describe(cell) + ": done");
    } catch (const std::exception& e) {
      errors[index_of(cell)] = e.what();
      log(cell.id + " " + describe(cell) + ": failed: " + e.what());
    }
  });
  finish_stage();

  // Stage 2: probes, grouped so cells over the same features run together.
  std::vector<std::vector<const Cell*>> groups;
  std::map<std::string, std::size_t> group_of;
  for (const auto& c : plan.cells) {
    if (c.kind != CellKind::probe || cell_complete(cache, c)) continue;
    const std::string key = c.source + "|" + std::string(to_string(c.task)) + "|" + std::to_string(c.layer);
    auto [it, fresh] = group_of.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&c);
  }
  parallel_for(jobs, groups.size(), [&](std::size_t i) {
    const auto& group = groups[i];
    try {
      for (const Cell* c : group) log(c->id + " " + describe(*c) + ": training");
      Executor worker(config, data, plan, cache);
      worker.run_probes(group);
      for (const Cell* c : group) {
        ran[index_of(*c)] = 1;
        log(c->id + " " + describe(*c) + ": done");
      }
    } catch (const std::exception& e) {
      for (const Cell* c : group) {
        if (!cell_complete(cache, *c)) errors[index_of(*c)] = e.what();
      }
      log(group.front()->id + " " + describe(*group.front()) + ": failed: " + e.what());
    }
  });
  finish_stage();

  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    (ran[i] ? summary.executed : summary.cached).push_back(plan.cells[i].id);
  }
  summary.reports = emit_reports(config, data, plan, cache, report_root(config));
  return summary;
}

}  // namespace nmtprobe
