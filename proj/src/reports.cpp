#include <algorithm>
#include <map>
#include <set>

#include "nmtprobe/csv.hpp"
#include "nmtprobe/experiment.hpp"
#include "nmtprobe/io.hpp"
#include "nmtprobe/random.hpp"

namespace nmtprobe {

namespace {

const std::vector<std::string> kDumpHeader = {"sentence", "token_index", "token", "gold", "predicted"};

std::string percent(double fraction) { return format_fixed(100.0 * fraction, 2); }

}  // namespace

std::string result_dump_csv(const TaggingResult& result, const TaggedCorpus& corpus) {
  result.validate();
  if (result.size() != corpus.token_count()) throw ValueError("result_dump_csv: result does not cover the corpus");
  std::string out = csv_row(kDumpHeader);
  std::size_t row = 0;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sent = corpus.sentences[s];
    for (std::size_t j = 0; j < sent.tokens.size(); ++j, ++row) {
      const int p = result.predicted[row];
      out += csv_row({std::to_string(s), std::to_string(j), sent.tokens[j],
                      result.labels[static_cast<std::size_t>(result.gold[row])],
                      p < 0 ? std::string() : result.labels[static_cast<std::size_t>(p)]});
    }
  }
  return out;
}

TaggingResult load_prediction_dump(const std::filesystem::path& path, const TaggedCorpus& gold,
                                   const std::vector<std::string>& labels) {
  const std::string origin = path.string();
  const auto rows = csv_parse(read_file(path));
  if (rows.empty() || rows.front() != kDumpHeader) {
    throw FormatError(origin, 1, "expected header " + join(kDumpHeader, ","));
  }
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) ids.emplace(labels[i], static_cast<int>(i));
  auto id_of = [&](const std::string& tag, std::size_t line) {
    auto it = ids.find(tag);
    if (it == ids.end()) throw FormatError(origin, line, "unknown tag '" + tag + "'");
    return it->second;
  };

  TaggingResult r;
  r.labels = labels;
  r.task = gold.kind;
  std::size_t row = 1;
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    r.sentence_starts.push_back(r.gold.size());
    const auto& sent = gold.sentences[s];
    for (std::size_t j = 0; j < sent.tokens.size(); ++j, ++row) {
      const std::size_t line = row + 1;
      if (row >= rows.size()) throw FormatError(origin, line, "dump ends before the corpus does");
      const auto& f = rows[row];
      if (f.size() != kDumpHeader.size()) throw FormatError(origin, line, "expected 5 fields");
      if (f[0] != std::to_string(s) || f[1] != std::to_string(j) || f[2] != sent.tokens[j]) {
        throw FormatError(origin, line, "row does not match corpus token " + std::to_string(s) + ":" +
                                            std::to_string(j));
      }
      if (f[3] != sent.tags[j]) throw FormatError(origin, line, "gold tag differs from the corpus");
      r.gold.push_back(id_of(f[3], line));
      r.predicted.push_back(f[4].empty() ? -1 : id_of(f[4], line));
    }
  }
  r.sentence_starts.push_back(r.gold.size());
  if (row != rows.size()) throw FormatError(origin, row + 1, "dump has more rows than the corpus has tokens");
  r.validate();
  return r;
}

std::pair<std::vector<Sentence>, std::vector<Sentence>> load_translation_dump(const std::filesystem::path& path) {
  std::vector<Sentence> hyps, refs;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 3) throw FormatError(path.string(), i + 1, "expected source<TAB>reference<TAB>hypothesis");
    refs.push_back(split_whitespace(fields[1]));
    hyps.push_back(split_whitespace(fields[2]));
  }
  return {std::move(hyps), std::move(refs)};
}

namespace {

class Reporter {
 public:
  Reporter(const ExperimentConfig& config, const ExperimentData& data, const Plan& plan,
           std::filesystem::path cache, std::filesystem::path out)
      : config_(config), data_(data), plan_(plan), cache_(std::move(cache)), out_(std::move(out)) {}

  std::vector<std::filesystem::path> run() {
    std::vector<std::string> missing;
    for (const auto& c : plan_.cells) {
      if (!cell_complete(cache_, c)) missing.push_back(c.id);
    }
    if (!missing.empty()) throw MissingCellsError(std::move(missing));

    for (TagKind task : config_.tasks) layer_table(task);
    if (!config_.data_fractions.empty()) {
      for (TagKind task : config_.tasks) data_size_table(task);
    }
    if (config_.coarse) fine_coarse_table();
    if (!config_.targets.empty()) {
      variant_table();
      depth_table();
    }
    if (config_.coarse) {
      for (TagKind task : config_.tasks) f1_delta_table(task);
    }
    if (config_.mft || config_.unsupemb || config_.word2tag) baseline_table();
    significance_table();
    for (TagKind task : config_.tasks) disagreements(task);
    metrics_table();
    per_tag_table();
    bleu_table();
    return written_;
  }

 private:
  using Row = std::vector<std::string>;

  void write_csv(const std::string& name, const std::vector<Row>& rows) {
    std::string text;
    for (const auto& r : rows) text += csv_row(r);
    write_file_atomic(out_ / name, text);
    written_.push_back(out_ / name);
  }

  const TaskData& task_data(TagKind task) const { return data_.tasks.at(task); }

  /// Test corpus with gold tags mapped to coarse names.
  const TaggedCorpus& coarse_test(TagKind task) {
    auto it = coarse_test_.find(task);
    if (it != coarse_test_.end()) return it->second;
    const TaskData& t = task_data(task);
    TaggedCorpus c = t.test;
    for (auto& s : c.sentences) {
      for (auto& tag : s.tags) tag = t.schema.coarse_name_of(tag);
    }
    return coarse_test_.emplace(task, std::move(c)).first->second;
  }

  const TaggingResult& result(const Cell& cell) {
    auto it = results_.find(cell.id);
    if (it != results_.end()) return it->second;
    const TaskData& t = task_data(cell.task);
    const bool coarse = cell.granularity == Granularity::coarse;
    TaggingResult r = load_prediction_dump(cell_dir(cache_, cell) / "predictions.csv",
                                           coarse ? coarse_test(cell.task) : t.test,
                                           coarse ? t.schema.coarse() : t.schema.fine());
    r.layer = cell.layer;
    r.model_id = cell.id;
    return results_.emplace(cell.id, std::move(r)).first->second;
  }

  double bleu_of(const Cell& nmt) {
    auto it = bleu_.find(nmt.id);
    if (it != bleu_.end()) return it->second;
    const auto [hyps, refs] = load_translation_dump(cell_dir(cache_, nmt) / "translations.tsv");
    return bleu_.emplace(nmt.id, bleu(hyps, refs)).first->second;
  }

  const Cell* nmt_cell(const std::string& column, const std::string& variant, std::size_t depth, double fraction) {
    return plan_.nmt(column, variant, depth, fraction);
  }

  const Cell* probe_cell(const Cell* source, TagKind task, std::size_t k, Granularity g = Granularity::fine) {
    return source ? plan_.probe(source->id, task, k, g) : nullptr;
  }

  /// Columns averaged in the variant tables and F1 deltas: the translation
  /// targets, or the autoencoder alone when there are none.
  std::vector<std::string> averaged_columns() const {
    return config_.targets.empty() ? config_.columns() : config_.targets;
  }

  std::string base_variant() const { return variant_of(config_.nmt); }
  std::size_t base_depth() const { return config_.nmt.num_layers; }

  // Layer x target accuracy with a BLEU row.
  void layer_table(TagKind task) {
    const auto columns = config_.columns();
    std::vector<Row> rows;
    Row header = {"k"};
    header.insert(header.end(), columns.begin(), columns.end());
    header.push_back("cell_ids");
    rows.push_back(header);
    append_layer_rows(rows, task, 1.0, {});
    const std::string name = "layers_" + std::string(to_string(task)) + ".csv";
    write_csv(name, rows);
  }

  void append_layer_rows(std::vector<Row>& rows, TagKind task, double fraction, const Row& prefix) {
    const auto columns = config_.columns();
    for (std::size_t k : config_.probe_layers(base_depth())) {
      Row row = prefix;
      row.push_back(std::to_string(k));
      std::vector<std::string> ids;
      for (const auto& col : columns) {
        const Cell* p = probe_cell(nmt_cell(col, base_variant(), base_depth(), fraction), task, k);
        row.push_back(percent(accuracy(result(*p))));
        ids.push_back(p->id);
      }
      row.push_back(join(ids, " "));
      rows.push_back(row);
    }
    Row row = prefix;
    row.push_back("bleu");
    std::vector<std::string> ids;
    for (const auto& col : columns) {
      const Cell* n = nmt_cell(col, base_variant(), base_depth(), fraction);
      row.push_back(format_fixed(bleu_of(*n), 2));
      ids.push_back(n->id);
    }
    row.push_back(join(ids, " "));
    rows.push_back(row);
  }

  void data_size_table(TagKind task) {
    const auto columns = config_.columns();
    std::vector<Row> rows;
    Row header = {"fraction", "k"};
    header.insert(header.end(), columns.begin(), columns.end());
    header.push_back("cell_ids");
    rows.push_back(header);
    std::vector<double> fractions = {1.0};
    fractions.insert(fractions.end(), config_.data_fractions.begin(), config_.data_fractions.end());
    for (double f : fractions) append_layer_rows(rows, task, f, {format_exact(f)});
    write_csv("data_size_" + std::string(to_string(task)) + ".csv", rows);
  }

  // Fine vs coarse probes per layer and target; fine predictions are also
  // scored after collapsing them to coarse tags.
  void fine_coarse_table() {
    std::vector<Row> rows = {{"task", "target", "k", "fine", "coarse", "fine_collapsed", "cell_ids"}};
    for (TagKind task : config_.tasks) {
      for (const auto& col : config_.columns()) {
        const Cell* n = nmt_cell(col, base_variant(), base_depth(), 1.0);
        for (std::size_t k : config_.probe_layers(base_depth())) {
          const Cell* fine = probe_cell(n, task, k, Granularity::fine);
          const Cell* coarse = probe_cell(n, task, k, Granularity::coarse);
          const TaggingResult& fr = result(*fine);
          rows.push_back({std::string(to_string(task)), col, std::to_string(k), percent(accuracy(fr)),
                          percent(accuracy(result(*coarse))),
                          percent(accuracy(coarse_collapse(fr, task_data(task).schema))),
                          fine->id + " " + coarse->id});
        }
      }
    }
    write_csv("fine_coarse.csv", rows);
  }

  /// Mean accuracy over the averaged columns, or "" when a cell is absent
  /// (layer beyond the model's depth).
  std::pair<std::string, std::vector<std::string>> averaged(const std::string& variant, std::size_t depth,
                                                            TagKind task, std::size_t k) {
    double sum = 0.0;
    std::vector<std::string> ids;
    for (const auto& col : averaged_columns()) {
      const Cell* p = probe_cell(nmt_cell(col, variant, depth, 1.0), task, k);
      if (!p) return {"", {}};
      sum += accuracy(result(*p));
      ids.push_back(p->id);
    }
    return {percent(sum / static_cast<double>(ids.size())), ids};
  }

  void layer_columns(Row& header, std::size_t deepest) const {
    for (std::size_t k = 0; k <= deepest; ++k) header.push_back("k" + std::to_string(k));
    header.push_back("cell_ids");
  }

  // Rows: encoder variant x task; columns: layers; averaged over targets.
  void variant_table() {
    std::vector<std::string> variants = {base_variant()};
    for (const auto& a : config_.architectures) {
      if (std::find(variants.begin(), variants.end(), a) == variants.end()) variants.push_back(a);
    }
    std::vector<Row> rows;
    Row header = {"variant", "task"};
    layer_columns(header, base_depth());
    rows.push_back(header);
    for (const auto& v : variants) {
      for (TagKind task : config_.tasks) {
        Row row = {v, std::string(to_string(task))};
        std::vector<std::string> ids;
        for (std::size_t k = 0; k <= base_depth(); ++k) {
          auto [value, cell_ids] = averaged(v, base_depth(), task, k);
          row.push_back(value);
          ids.insert(ids.end(), cell_ids.begin(), cell_ids.end());
        }
        row.push_back(join(ids, " "));
        rows.push_back(row);
      }
    }
    write_csv("variants.csv", rows);
  }

  // Rows: encoder depth x task; "" where the layer does not exist.
  void depth_table() {
    std::set<std::size_t> depths(config_.depths.begin(), config_.depths.end());
    depths.insert(base_depth());
    const std::size_t deepest = *depths.rbegin();
    std::vector<Row> rows;
    Row header = {"depth", "task"};
    layer_columns(header, deepest);
    rows.push_back(header);
    for (std::size_t d : depths) {
      for (TagKind task : config_.tasks) {
        Row row = {std::to_string(d), std::string(to_string(task))};
        std::vector<std::string> ids;
        for (std::size_t k = 0; k <= deepest; ++k) {
          auto [value, cell_ids] = k <= d ? averaged(base_variant(), d, task, k)
                                          : std::pair<std::string, std::vector<std::string>>{};
          row.push_back(value);
          ids.insert(ids.end(), cell_ids.begin(), cell_ids.end());
        }
        row.push_back(join(ids, " "));
        rows.push_back(row);
      }
    }
    write_csv("depths.csv", rows);
  }

  // Per coarse tag: F1(layer L) - F1(layer 1), averaged over targets, for
  // direct coarse probes and for fine probes micro-averaged within the tag.
  void f1_delta_table(TagKind task) {
    const std::size_t top = base_depth();
    const auto layers = config_.probe_layers(top);
    const bool have = std::count(layers.begin(), layers.end(), 1) && std::count(layers.begin(), layers.end(), top);
    if (top < 1 || !have) return;
    const TagSchema& schema = task_data(task).schema;
    std::vector<Row> rows = {{"coarse_tag", "mode", "delta", "cell_ids"}};
    const auto columns = averaged_columns();
    for (const auto& tag : schema.coarse()) {
      for (const std::string mode : {"direct-coarse", "fine-micro"}) {
        const Granularity g = mode == "direct-coarse" ? Granularity::coarse : Granularity::fine;
        double sum = 0.0;
        std::vector<std::string> ids;
        for (const auto& col : columns) {
          const Cell* n = nmt_cell(col, base_variant(), top, 1.0);
          const Cell* low = probe_cell(n, task, 1, g);
          const Cell* high = probe_cell(n, task, top, g);
          auto f1 = [&](const Cell* c) {
            return g == Granularity::coarse ? per_tag_f1(result(*c), tag).f1
                                            : micro_f1_within_coarse(result(*c), schema, tag);
          };
          sum += f1(high) - f1(low);
          ids.push_back(low->id);
          ids.push_back(high->id);
        }
        rows.push_back({tag, mode, format_fixed(100.0 * sum / static_cast<double>(columns.size()), 2),
                        join(ids, " ")});
      }
    }
    write_csv("f1_delta_" + std::string(to_string(task)) + ".csv", rows);
  }

  void baseline_table() {
    std::vector<Row> rows;
    Row header = {"baseline"};
    for (TagKind task : config_.tasks) header.emplace_back(to_string(task));
    header.push_back("cell_ids");
    rows.push_back(header);
    auto add = [&](const std::string& name, auto cell_of) {
      Row row = {name};
      std::vector<std::string> ids;
      for (TagKind task : config_.tasks) {
        const Cell* c = cell_of(task);
        row.push_back(percent(accuracy(result(*c))));
        ids.push_back(c->id);
      }
      row.push_back(join(ids, " "));
      rows.push_back(row);
    };
    if (config_.mft) add("MFT", [&](TagKind t) { return plan_.baseline(CellKind::mft, t); });
    if (config_.unsupemb) {
      add("UnsupEmb", [&](TagKind t) { return plan_.probe(plan_.skipgram()->id, t, 0, Granularity::fine); });
    }
    if (config_.word2tag) add("Word2Tag", [&](TagKind t) { return plan_.baseline(CellKind::word2tag, t); });
    write_csv("baselines.csv", rows);
  }

  // Adjacent layer comparisons: k0 vs k1 and k1 vs kL.
  void significance_table() {
    const std::size_t top = base_depth();
    const auto layers = config_.probe_layers(top);
    auto has = [&](std::size_t k) { return std::find(layers.begin(), layers.end(), k) != layers.end(); };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (has(0) && has(1)) pairs.emplace_back(0, 1);
    if (top > 1 && has(1) && has(top)) pairs.emplace_back(1, top);
    std::vector<Row> rows = {{"task", "target", "system_a", "system_b", "accuracy_a", "accuracy_b", "observed",
                              "p_value", "shuffles", "cell_ids"}};
    for (TagKind task : config_.tasks) {
      for (const auto& col : config_.columns()) {
        const Cell* n = nmt_cell(col, base_variant(), top, 1.0);
        for (auto [a, b] : pairs) {
          const Cell* ca = probe_cell(n, task, a);
          const Cell* cb = probe_cell(n, task, b);
          const std::string name_a = "k" + std::to_string(a);
          const std::string name_b = "k" + std::to_string(b);
          const std::uint64_t seed =
              derive_seed(config_.seed, "significance:" + std::string(to_string(task)) + ":" + col + ":" + name_a +
                                            ":" + name_b);
          const auto rep = approx_randomization(result(*ca), result(*cb), config_.shuffles, seed, name_a, name_b);
          rows.push_back({std::string(to_string(task)), col, name_a, name_b, percent(accuracy(result(*ca))),
                          percent(accuracy(result(*cb))), percent(rep.observed), format_fixed(rep.p_value, 6),
                          std::to_string(rep.shuffles), ca->id + " " + cb->id});
        }
      }
    }
    write_csv("significance.csv", rows);
  }

  // Tokens where layer 1 and the top layer disagree, first averaged column.
  void disagreements(TagKind task) {
    const std::size_t top = base_depth();
    const auto layers = config_.probe_layers(top);
    auto has = [&](std::size_t k) { return std::find(layers.begin(), layers.end(), k) != layers.end(); };
    if (top < 2 || !has(1) || !has(top)) return;
    const Cell* n = nmt_cell(averaged_columns().front(), base_variant(), top, 1.0);
    const Cell* ca = probe_cell(n, task, 1);
    const Cell* cb = probe_cell(n, task, top);
    const TaskData& t = task_data(task);
    auto report = disagreement_report(result(*ca), result(*cb), t.test, &t.schema);
    if (!config_.disagreement_filter.empty()) {
      const std::set<std::string> keep(config_.disagreement_filter.begin(), config_.disagreement_filter.end());
      std::erase_if(report, [&](const Disagreement& d) { return !keep.count(t.schema.coarse_name_of(d.gold)); });
    }
    std::string text;
    for (const auto& line : split(disagreement_tsv(report), '\n')) {
      if (line.empty()) continue;
      text += (text.empty() ? std::string("cell_a\tcell_b") : ca->id + "\t" + cb->id) + "\t" + line + "\n";
    }
    const auto path = out_ / ("disagreements_" + std::string(to_string(task)) + ".tsv");
    write_file_atomic(path, text);
    written_.push_back(path);
  }

  std::string target_of(const Cell& c) const {
    if (c.kind == CellKind::probe && plan_.at(c.source).kind == CellKind::nmt) return c.column;
    return "";
  }

  std::string kind_of(const Cell& c) const {
    if (c.kind == CellKind::probe) {
      return plan_.at(c.source).kind == CellKind::skipgram ? "unsupemb" : "probe";
    }
    return std::string(to_string(c.kind));
  }

  // One row per tagging cell, in plan order.
  void metrics_table() {
    std::vector<Row> rows = {{"cell_id", "kind", "task", "target", "variant", "depth", "fraction", "layer",
                              "granularity", "accuracy", "tokens"}};
    for (const auto& c : plan_.cells) {
      if (c.kind == CellKind::nmt || c.kind == CellKind::skipgram) continue;
      const bool nmt_probe = !target_of(c).empty();
      const TaggingResult& r = result(c);
      rows.push_back({c.id, kind_of(c), std::string(to_string(c.task)), target_of(c), nmt_probe ? c.variant : "",
                      nmt_probe ? std::to_string(c.depth) : "", nmt_probe ? format_exact(c.fraction) : "",
                      c.kind == CellKind::probe ? std::to_string(c.layer) : "",
                      std::string(to_string(c.granularity)), percent(accuracy(r)), std::to_string(r.size())});
    }
    write_csv("metrics.csv", rows);
  }

  // Precision, recall and F1 of every label for the main-grid probes.
  void per_tag_table() {
    std::vector<Row> rows = {{"cell_id", "task", "target", "layer", "granularity", "tag", "precision", "recall",
                              "f1"}};
    for (const auto& c : plan_.cells) {
      if (c.kind != CellKind::probe || !c.main_grid) continue;
      const TaggingResult& r = result(c);
      for (std::size_t tag = 0; tag < r.labels.size(); ++tag) {
        const Prf prf = per_tag_f1(r, static_cast<int>(tag));
        rows.push_back({c.id, std::string(to_string(c.task)), c.column, std::to_string(c.layer),
                        std::string(to_string(c.granularity)), r.labels[tag], format_fixed(prf.precision, 4),
                        format_fixed(prf.recall, 4), format_fixed(prf.f1, 4)});
      }
    }
    write_csv("per_tag_f1.csv", rows);
  }

  void bleu_table() {
    std::vector<Row> rows = {{"cell_id", "target", "variant", "depth", "fraction", "bleu"}};
    for (const auto& c : plan_.cells) {
      if (c.kind != CellKind::nmt) continue;
      rows.push_back({c.id, c.column, c.variant, std::to_string(c.depth), format_exact(c.fraction),
                      format_fixed(bleu_of(c), 2)});
    }
    write_csv("bleu.csv", rows);
  }

  const ExperimentConfig& config_;
  const ExperimentData& data_;
  const Plan& plan_;
  std::filesystem::path cache_;
  std::filesystem::path out_;
  std::map<std::string, TaggingResult> results_;
  std::map<std::string, double> bleu_;
  std::map<TagKind, TaggedCorpus> coarse_test_;
  std::vector<std::filesystem::path> written_;
};

}  // namespace

std::vector<std::filesystem::path> emit_reports(const ExperimentConfig& config, const ExperimentData& data,
                                                const Plan& plan, const std::filesystem::path& cache,
                                                const std::filesystem::path& out) {
  if (plan.cells.empty()) throw ConfigError("grid", "empty grid: nothing to report");
  return Reporter(config, data, plan, cache, out).run();
}

}  // namespace nmtprobe
