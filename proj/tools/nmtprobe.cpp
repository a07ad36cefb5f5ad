// Command-line front end. Every command prints one JSON line on success
// (stdout) or one JSON error line (stderr) and exits nonzero on failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nmtprobe/baselines.hpp"
#include "nmtprobe/config.hpp"
#include "nmtprobe/csv.hpp"
#include "nmtprobe/experiment.hpp"
#include "nmtprobe/io.hpp"
#include "nmtprobe/metrics.hpp"
#include "nmtprobe/probe.hpp"
#include "nmtprobe/seq2seq.hpp"
#include "nmtprobe/skipgram.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace nmtprobe;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the configured seed");
  cmd->add_option("--jobs", c.jobs, "parallel workers (0 = from config)");
  auto* out = cmd->add_option("--out", c.out, "output location");
  if (out_required) out->required();
}

std::string config_text(const Common& c) { return c.config.empty() ? std::string() : read_file(c.config); }
std::string config_origin(const Common& c) { return c.config.empty() ? "<defaults>" : c.config; }

void print(const json& j) { std::cout << j.dump() << std::endl; }

TaggedCorpus load_gold(const std::string& path, const TagSchema& schema, TagKind task, bool coarse) {
  TaggedCorpus gold = load_tagged(path, schema, task);
  if (coarse) {
    for (auto& s : gold.sentences) {
      for (auto& tag : s.tags) tag = schema.coarse_name_of(tag);
    }
  }
  return gold;
}

json prf_json(const TaggingResult& r) {
  json out = json::object();
  for (std::size_t t = 0; t < r.labels.size(); ++t) {
    const Prf p = per_tag_f1(r, static_cast<int>(t));
    out[r.labels[t]] = {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probe the representations of neural machine translation encoders"};
  app.require_subcommand(1);
  std::string current = "nmtprobe";

  // train-nmt
  Common nmt_c;
  std::string nmt_train_src, nmt_train_tgt, nmt_dev_src, nmt_dev_tgt, nmt_section = "nmt";
  auto* train_nmt_cmd = app.add_subcommand("train-nmt", "train an attentional encoder-decoder");
  add_common(train_nmt_cmd, nmt_c, true);
  train_nmt_cmd->add_option("--train-src", nmt_train_src)->required()->check(CLI::ExistingFile);
  train_nmt_cmd->add_option("--train-tgt", nmt_train_tgt)->required()->check(CLI::ExistingFile);
  train_nmt_cmd->add_option("--dev-src", nmt_dev_src)->required()->check(CLI::ExistingFile);
  train_nmt_cmd->add_option("--dev-tgt", nmt_dev_tgt)->required()->check(CLI::ExistingFile);
  train_nmt_cmd->add_option("--section", nmt_section, "config section with the model settings");

  // train-embeddings
  Common emb_c;
  std::string emb_corpus;
  auto* emb_cmd = app.add_subcommand("train-embeddings", "train skip-gram word embeddings");
  add_common(emb_cmd, emb_c, true);
  emb_cmd->add_option("--corpus", emb_corpus, "one tokenized sentence per line")->required()->check(CLI::ExistingFile);

  // extract
  Common ext_c;
  std::string ext_model, ext_embeddings, ext_tagged, ext_schema, ext_task = "sem", ext_gran = "fine";
  std::size_t ext_layer = 0;
  auto* ext_cmd = app.add_subcommand("extract", "write per-token features of one encoder layer");
  add_common(ext_cmd, ext_c, true);
  auto* ext_model_opt = ext_cmd->add_option("--model", ext_model, "seq2seq checkpoint")->check(CLI::ExistingFile);
  auto* ext_emb_opt =
      ext_cmd->add_option("--embeddings", ext_embeddings, "embedding table (UnsupEmb)")->check(CLI::ExistingFile);
  ext_model_opt->excludes(ext_emb_opt);
  ext_cmd->add_option("--tagged", ext_tagged)->required()->check(CLI::ExistingFile);
  ext_cmd->add_option("--schema", ext_schema)->required()->check(CLI::ExistingFile);
  ext_cmd->add_option("--task", ext_task)->check(CLI::IsMember({"pos", "sem"}));
  ext_cmd->add_option("--layer", ext_layer);
  ext_cmd->add_option("--granularity", ext_gran)->check(CLI::IsMember({"fine", "coarse"}));

  // probe
  Common probe_c;
  std::string probe_train, probe_dev, probe_test;
  auto* probe_cmd = app.add_subcommand("probe", "train a probing classifier on extracted features");
  add_common(probe_cmd, probe_c, true);
  probe_cmd->add_option("--train", probe_train)->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--dev", probe_dev)->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--test", probe_test)->required()->check(CLI::ExistingFile);

  // baseline
  Common base_c;
  std::string base_kind, base_train, base_dev, base_test, base_schema, base_task = "sem";
  auto* base_cmd = app.add_subcommand("baseline", "train and apply the MFT or Word2Tag baseline");
  add_common(base_cmd, base_c, true);
  base_cmd->add_option("--kind", base_kind)->required()->check(CLI::IsMember({"mft", "word2tag"}));
  base_cmd->add_option("--train", base_train)->required()->check(CLI::ExistingFile);
  base_cmd->add_option("--dev", base_dev)->check(CLI::ExistingFile);
  base_cmd->add_option("--test", base_test)->required()->check(CLI::ExistingFile);
  base_cmd->add_option("--schema", base_schema)->required()->check(CLI::ExistingFile);
  base_cmd->add_option("--task", base_task)->check(CLI::IsMember({"pos", "sem"}));

  // evaluate
  Common eval_c;
  std::string eval_pred, eval_gold, eval_schema, eval_task = "sem", eval_translations;
  bool eval_coarse = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a prediction dump or a translation dump");
  add_common(eval_cmd, eval_c, false);
  auto* eval_pred_opt = eval_cmd->add_option("--predictions", eval_pred)->check(CLI::ExistingFile);
  auto* eval_tr_opt = eval_cmd->add_option("--translations", eval_translations, "source/reference/hypothesis TSV")
                          ->check(CLI::ExistingFile);
  eval_pred_opt->excludes(eval_tr_opt);
  eval_cmd->add_option("--gold", eval_gold)->check(CLI::ExistingFile);
  eval_cmd->add_option("--schema", eval_schema)->check(CLI::ExistingFile);
  eval_cmd->add_option("--task", eval_task)->check(CLI::IsMember({"pos", "sem"}));
  eval_cmd->add_flag("--coarse", eval_coarse, "the dump holds coarse labels");

  // significance
  Common sig_c;
  std::string sig_a, sig_b, sig_gold, sig_schema, sig_task = "sem";
  std::size_t sig_shuffles = 10000;
  bool sig_coarse = false;
  auto* sig_cmd = app.add_subcommand("significance", "approximate randomization test between two dumps");
  add_common(sig_cmd, sig_c, false);
  sig_cmd->add_option("--a", sig_a)->required()->check(CLI::ExistingFile);
  sig_cmd->add_option("--b", sig_b)->required()->check(CLI::ExistingFile);
  sig_cmd->add_option("--gold", sig_gold)->required()->check(CLI::ExistingFile);
  sig_cmd->add_option("--schema", sig_schema)->required()->check(CLI::ExistingFile);
  sig_cmd->add_option("--task", sig_task)->check(CLI::IsMember({"pos", "sem"}));
  sig_cmd->add_option("--shuffles", sig_shuffles);
  sig_cmd->add_flag("--coarse", sig_coarse, "the dumps hold coarse labels");

  // run / report
  Common run_c;
  auto* run_cmd = app.add_subcommand("run", "run the full experiment grid and write reports");
  add_common(run_cmd, run_c, false);
  run_cmd->get_option("--config")->required();
  bool quiet = false;
  run_cmd->add_flag("--quiet", quiet, "no progress lines");
  Common rep_c;
  auto* rep_cmd = app.add_subcommand("report", "rewrite the reports from a completed grid");
  add_common(rep_cmd, rep_c, false);
  rep_cmd->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  }

  try {
    if (*train_nmt_cmd) {
      current = "train-nmt";
      NmtConfig config = nmt_config_from_ini(config_text(nmt_c), nmt_section, config_origin(nmt_c));
      if (nmt_c.seed) config.seed = *nmt_c.seed;
      const ParallelCorpus train = load_parallel(nmt_train_src, nmt_train_tgt, config.max_len, Split::train);
      const ParallelCorpus dev = load_parallel(nmt_dev_src, nmt_dev_tgt, config.max_len, Split::dev);
      Seq2SeqModel model = make_model_for(train, config);
      const TrainReport report = train_nmt(model, train, dev, [](const EpochRecord& r) {
        std::cerr << json{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"dev_loss", r.dev_loss},
                          {"lr", r.learning_rate}}
                         .dump()
                  << std::endl;
      });
      const fs::path out = nmt_c.out;
      model.save(out / "model.ckpt");
      write_file_atomic(out / "training_log.csv", training_log_csv(report));
      print({{"command", current},
             {"model", (out / "model.ckpt").string()},
             {"model_id", model.model_id()},
             {"best_epoch", report.best_epoch},
             {"best_dev_loss", report.best_dev_loss},
             {"dropped_pairs", train.dropped + dev.dropped}});
    } else if (*emb_cmd) {
      current = "train-embeddings";
      SkipGramConfig config = skipgram_config_from_ini(config_text(emb_c), config_origin(emb_c));
      if (emb_c.seed) config.seed = *emb_c.seed;
      std::vector<Sentence> sentences;
      for (const auto& line : read_lines(emb_corpus)) {
        auto tokens = split_whitespace(line);
        if (!tokens.empty()) sentences.push_back(std::move(tokens));
      }
      SkipGramReport report;
      const EmbeddingTable table = train_skipgram(sentences, config, &report);
      const fs::path out = emb_c.out;
      table.save(out / "embeddings.txt");
      std::string log = "epoch,loss\n";
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
        log += std::to_string(e + 1) + "," + format_exact(report.epoch_loss[e]) + "\n";
      }
      write_file_atomic(out / "training_log.csv", log);
      print({{"command", current},
             {"embeddings", (out / "embeddings.txt").string()},
             {"vocab", table.size()},
             {"dim", table.dim()},
             {"epoch_loss", report.epoch_loss}});
    } else if (*ext_cmd) {
      current = "extract";
      if (ext_model.empty() && ext_embeddings.empty()) throw ValueError("one of --model or --embeddings is required");
      const TagKind task = parse_tag_kind(ext_task);
      const TagSchema schema = TagSchema::load(ext_schema);
      const TaggedCorpus corpus = load_tagged(ext_tagged, schema, task);
      const Granularity g = ext_gran == "coarse" ? Granularity::coarse : Granularity::fine;
      FeatureDataset data;
      if (!ext_model.empty()) {
        Seq2SeqModel model = Seq2SeqModel::load(ext_model);
        model.freeze();
        data = extract_features(model, corpus, schema, ext_layer, g);
      } else {
        if (ext_layer != 0) throw ValueError("embedding tables have only layer 0");
        data = embedding_features(EmbeddingTable::load(ext_embeddings), corpus, schema, g);
      }
      save_features(data, ext_c.out);
      print({{"command", current},
             {"features", ext_c.out},
             {"rows", data.size()},
             {"width", data.width()},
             {"layer", data.layer},
             {"model_id", data.model_id},
             {"corpus_id", data.corpus_id}});
    } else if (*probe_cmd) {
      current = "probe";
      ProbeConfig config = probe_config_from_ini(config_text(probe_c), config_origin(probe_c));
      if (probe_c.seed) config.seed = *probe_c.seed;
      const FeatureDataset train = load_features(probe_train);
      const FeatureDataset dev = load_features(probe_dev);
      const FeatureDataset test = load_features(probe_test);
      ProbeTrainReport report;
      const ProbeClassifier probe = train_probe(train, dev, config, &report);
      const auto predicted = predict_probe(probe, test.features);
      const fs::path out = probe_c.out;
      probe.save(out / "probe.ckpt");
      write_file_atomic(out / "predictions.csv", prediction_dump_csv(test, predicted));
      std::size_t correct = 0;
      for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == test.tags[i];
      print({{"command", current},
             {"predictions", (out / "predictions.csv").string()},
             {"best_epoch", report.best_epoch},
             {"test_accuracy", test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0}});
    } else if (*base_cmd) {
      current = "baseline";
      const TagKind task = parse_tag_kind(base_task);
      const TagSchema schema = TagSchema::load(base_schema);
      const TaggedCorpus train = load_tagged(base_train, schema, task);
      const TaggedCorpus test = load_tagged(base_test, schema, task);
      const fs::path out = base_c.out;
      std::vector<std::vector<std::string>> predicted;
      if (base_kind == "mft") {
        const MftModel model = fit_mft(train);
        save_mft(model, out / "mft.tsv");
        for (const auto& s : test.sentences) predicted.push_back(predict_mft(model, s.tokens));
      } else {
        if (base_dev.empty()) throw ValueError("word2tag needs --dev for model selection");
        const TaggedCorpus dev = load_tagged(base_dev, schema, task);
        NmtConfig config = nmt_config_from_ini(config_text(base_c), "word2tag", config_origin(base_c));
        if (base_c.seed) config.seed = *base_c.seed;
        const Seq2SeqModel model = train_word2tag(train, dev, schema, config, {});
        model.save(out / "model.ckpt");
        for (const auto& s : test.sentences) {
          auto tags = align_positionwise(predict_word2tag(model, s.tokens), s.tokens.size());
          for (auto& t : tags) {
            if (!schema.has_fine(t)) t.clear();
          }
          predicted.push_back(std::move(tags));
        }
      }
      const TaggingResult result = make_result(test, schema.fine(), predicted);
      write_file_atomic(out / "predictions.csv", result_dump_csv(result, test));
      print({{"command", current},
             {"kind", base_kind},
             {"predictions", (out / "predictions.csv").string()},
             {"test_accuracy", accuracy(result)}});
    } else if (*eval_cmd) {
      current = "evaluate";
      if (!eval_translations.empty()) {
        const auto [hyps, refs] = load_translation_dump(eval_translations);
        print({{"command", current}, {"sentences", hyps.size()}, {"bleu", bleu(hyps, refs)}});
      } else {
        if (eval_pred.empty() || eval_gold.empty() || eval_schema.empty()) {
          throw ValueError("evaluate needs --predictions, --gold and --schema (or --translations)");
        }
        const TagKind task = parse_tag_kind(eval_task);
        const TagSchema schema = TagSchema::load(eval_schema);
        const TaggedCorpus gold = load_gold(eval_gold, schema, task, eval_coarse);
        const TaggingResult r =
            load_prediction_dump(eval_pred, gold, eval_coarse ? schema.coarse() : schema.fine());
        json j = {{"command", current}, {"tokens", r.size()}, {"accuracy", accuracy(r)}};
        if (!eval_coarse) {
          j["coarse_accuracy"] = accuracy(coarse_collapse(r, schema));
          json micro = json::object();
          for (const auto& c : schema.coarse()) micro[c] = micro_f1_within_coarse(r, schema, c);
          j["fine_micro_f1"] = micro;
        }
        j["per_tag"] = prf_json(r);
        if (!eval_c.out.empty()) {
          std::string csv = csv_row({"tag", "precision", "recall", "f1"});
          for (std::size_t t = 0; t < r.labels.size(); ++t) {
            const Prf p = per_tag_f1(r, static_cast<int>(t));
            csv += csv_row({r.labels[t], format_fixed(p.precision, 4), format_fixed(p.recall, 4),
                            format_fixed(p.f1, 4)});
          }
          write_file_atomic(eval_c.out, csv);
        }
        print(j);
      }
    } else if (*sig_cmd) {
      current = "significance";
      const TagKind task = parse_tag_kind(sig_task);
      const TagSchema schema = TagSchema::load(sig_schema);
      const TaggedCorpus gold = load_gold(sig_gold, schema, task, sig_coarse);
      const auto& labels = sig_coarse ? schema.coarse() : schema.fine();
      const TaggingResult a = load_prediction_dump(sig_a, gold, labels);
      const TaggingResult b = load_prediction_dump(sig_b, gold, labels);
      const auto rep = approx_randomization(a, b, sig_shuffles, sig_c.seed.value_or(1), sig_a, sig_b);
      const json j = {{"command", current},         {"system_a", rep.system_a}, {"system_b", rep.system_b},
                      {"accuracy_a", accuracy(a)},  {"accuracy_b", accuracy(b)}, {"observed", rep.observed},
                      {"p_value", rep.p_value},     {"shuffles", rep.shuffles},  {"exceed", rep.exceed}};
      if (!sig_c.out.empty()) write_file_atomic(sig_c.out, j.dump(2) + "\n");
      print(j);
    } else if (*run_cmd || *rep_cmd) {
      const bool run = run_cmd->parsed();
      current = run ? "run" : "report";
      const Common& c = run ? run_c : rep_c;
      ExperimentConfig config = load_experiment_config(c.config);
      if (c.seed) config.seed = *c.seed;
      if (c.jobs) config.jobs = c.jobs;
      if (!c.out.empty()) config.output = c.out;
      config.validate();
      std::vector<fs::path> reports;
      json j = {{"command", current}, {"output", config.output.string()}};
      if (run) {
        RunOptions options;
        if (!quiet) options.log = [](const std::string& line) { std::cerr << line << std::endl; };
        const RunSummary summary = run_experiment(config, options);
        reports = summary.reports;
        j["executed"] = summary.executed.size();
        j["cached"] = summary.cached.size();
      } else {
        const ExperimentData data = prepare_data(config);
        reports = emit_reports(config, data, plan_experiment(config, data), cache_root(config), report_root(config));
      }
      std::vector<std::string> names;
      for (const auto& r : reports) names.push_back(r.string());
      j["reports"] = names;
      print(j);
    }
  } catch (const MissingCellsError& e) {
    std::cerr << json{{"error", e.kind()}, {"command", current}, {"message", e.what()}, {"cells", e.cells()}}.dump()
              << std::endl;
    return 1;
  } catch (const CellError& e) {
    std::cerr << json{{"error", e.kind()}, {"command", current}, {"message", e.what()}, {"cell", e.cell()}}.dump()
              << std::endl;
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", e.kind()}, {"command", current}, {"message", e.what()}, {"field", e.field()}}.dump()
              << std::endl;
    return 1;
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"command", current}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"command", current}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
