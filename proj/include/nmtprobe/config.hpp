#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nmtprobe/corpus.hpp"
#include "nmtprobe/probe.hpp"
#include "nmtprobe/seq2seq.hpp"
#include "nmtprobe/skipgram.hpp"
#include "nmtprobe/synthetic.hpp"

namespace nmtprobe {

/// Where the corpora come from.
///
/// Synthetic: one grammar; NMT sentences and tagged sentences are sampled
/// independently. Each target name maps to a context-tag transform
/// (language 1, 2, ... in list order); the autoencoder copies the source.
///
/// Files: `parallel_dir` holds `{train,dev,test}.src` and
/// `{train,dev,test}.<target>`; `tagged_dir` holds `<task>.{train,dev,test}.tsv`
/// and `<task>.schema.tsv` for task in {pos, sem}.
struct DataConfig {
  std::string source = "synthetic";  ///< "synthetic" or "files"
  SyntheticSpec synthetic;
  std::size_t nmt_train = 1800;
  std::size_t nmt_dev = 200;
  std::size_t nmt_test = 200;
  std::size_t tag_train = 1000;
  std::size_t tag_dev = 200;
  std::size_t tag_test = 1000;
  std::filesystem::path parallel_dir;
  std::filesystem::path tagged_dir;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::filesystem::path output = "out";

  DataConfig data;

  /// Base architecture of the main grid (Table-3 style: one model per target).
  NmtConfig nmt;
  std::vector<std::string> targets;
  bool autoencoder = true;
  /// Column name of the autoencoder (target = source language).
  std::string source_lang = "en";

  /// Extra encoder variants trained for every non-autoencoder target: any of
  /// "bi", "res" (the base "uni" is always present).
  std::vector<std::string> architectures;
  /// Extra encoder depths (besides nmt.num_layers), trained per target.
  std::vector<std::size_t> depths;
  /// Training-data fractions below 1 for the data-size ablation.
  std::vector<double> data_fractions;

  std::vector<TagKind> tasks = {TagKind::pos, TagKind::sem};
  /// Probed layers; empty means 0..L.
  std::vector<std::size_t> layers;
  /// Also train probes on coarse tags (fine/coarse comparison and the
  /// direct-coarse F1 deltas).
  bool coarse = true;
  ProbeConfig probe;

  bool mft = true;
  bool unsupemb = true;
  bool word2tag = true;
  SkipGramConfig skipgram;
  /// Word2Tag architecture; starts as a copy of `nmt`.
  NmtConfig word2tag_nmt;

  std::size_t shuffles = 10000;
  /// Coarse tags kept in the disagreement report; empty keeps all.
  std::vector<std::string> disagreement_filter;

  /// Layers probed for a model of depth L.
  std::vector<std::size_t> probe_layers(std::size_t depth) const;
  /// Every column of the main table: targets, then the autoencoder.
  std::vector<std::string> columns() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses an INI text. Sections: [experiment], [data], [nmt], [grid],
/// [probe], [baselines], [skipgram], [word2tag], [analysis]. Unknown sections
/// or keys are errors.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Reads only the given section into a config struct (for single-stage CLI
/// commands); a missing section leaves the defaults.
NmtConfig nmt_config_from_ini(const std::string& text, const std::string& section, const std::string& origin);
ProbeConfig probe_config_from_ini(const std::string& text, const std::string& origin);
SkipGramConfig skipgram_config_from_ini(const std::string& text, const std::string& origin);

}  // namespace nmtprobe
