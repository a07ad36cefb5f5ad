#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nmtprobe/config.hpp"
#include "nmtprobe/corpus.hpp"
#include "nmtprobe/error.hpp"
#include "nmtprobe/metrics.hpp"
#include "nmtprobe/probe.hpp"

namespace nmtprobe {

/// A grid cell failed; carries the cell id.
class CellError : public Error {
 public:
  CellError(const std::string& cell, const std::string& what)
      : Error("cell", "cell " + cell + ": " + what), cell_(cell) {}

  const std::string& cell() const noexcept { return cell_; }

 private:
  std::string cell_;
};

/// Report inputs are missing; lists the cell ids that have no results.
class MissingCellsError : public Error {
 public:
  explicit MissingCellsError(std::vector<std::string> cells);

  const std::vector<std::string>& cells() const noexcept { return cells_; }

 private:
  std::vector<std::string> cells_;
};

struct TaskData {
  TaggedCorpus train;
  TaggedCorpus dev;
  TaggedCorpus test;
  TagSchema schema;
};

struct ColumnData {
  ParallelCorpus train;
  ParallelCorpus dev;
  ParallelCorpus test;
  /// Content hash of all three splits.
  std::string fingerprint;
};

/// Every corpus an experiment reads, keyed by table column and task.
struct ExperimentData {
  std::map<std::string, ColumnData> columns;
  std::map<TagKind, TaskData> tasks;
  /// Context-free SEM ceiling of the synthetic grammar; negative for files.
  double sem_ceiling = -1.0;
};

/// Synthetic: samples every corpus from the configured grammar. Files: loads
/// the configured directories. Deterministic in the config.
ExperimentData prepare_data(const ExperimentConfig& config);

/// Writes the corpora and schemas under `dir` in the toolkit's file formats.
void save_data(const ExperimentData& data, const std::filesystem::path& dir);

/// Content hash of a parallel corpus (16 hex digits).
std::string parallel_fingerprint(const ParallelCorpus& corpus);

enum class CellKind { nmt, skipgram, mft, word2tag, probe };
std::string_view to_string(CellKind k);

/// One unit of work. `id` is a hash of `settings`, which spell out everything
/// the result depends on (hyperparameters, seeds, data fingerprints and the
/// ids of upstream cells).
struct Cell {
  CellKind kind = CellKind::nmt;
  std::string id;
  std::vector<std::pair<std::string, std::string>> settings;

  // nmt, and probes over an nmt cell
  std::string column;
  std::string variant;  ///< uni, bi or res
  std::size_t depth = 0;
  double fraction = 1.0;
  NmtConfig nmt;

  // probes and tag baselines
  TagKind task = TagKind::sem;
  std::size_t layer = 0;
  Granularity granularity = Granularity::fine;
  /// Upstream nmt or skipgram cell of a probe.
  std::string source;

  /// True for the nmt cells that make up the main layer x target table.
  bool main_grid = false;

  std::string settings_text() const;
};

/// Every cell of an experiment, upstream cells first. Ids are unique;
/// identical settings collapse into one cell.
struct Plan {
  std::vector<Cell> cells;

  const Cell* find(const std::string& id) const;
  const Cell& at(const std::string& id) const;
  /// The nmt cell with these settings, or nullptr.
  const Cell* nmt(const std::string& column, const std::string& variant, std::size_t depth, double fraction) const;
  /// The probe over `source` with these settings, or nullptr.
  const Cell* probe(const std::string& source, TagKind task, std::size_t layer, Granularity g) const;
  const Cell* baseline(CellKind kind, TagKind task) const;
  const Cell* skipgram() const;
};

/// Architecture label of an nmt config: "bi", "res" or "uni".
std::string variant_of(const NmtConfig& config);

Plan plan_experiment(const ExperimentConfig& config, const ExperimentData& data);

/// Directory of a cell under the cache root: `<root>/<kind>/<id>`.
std::filesystem::path cell_dir(const std::filesystem::path& cache_root, const Cell& cell);
/// A cell is complete once its marker file exists; it is written last.
bool cell_complete(const std::filesystem::path& cache_root, const Cell& cell);

struct RunOptions {
  /// Overrides `config.jobs` when non-zero.
  std::size_t jobs = 0;
  /// Progress lines (cell id, what happened); may be called from workers.
  std::function<void(const std::string&)> log;
};

struct RunSummary {
  std::vector<std::string> executed;
  std::vector<std::string> cached;
  std::vector<std::filesystem::path> reports;
};

/// Runs every missing cell (upstream stages first, independent cells in
/// parallel), then writes the reports under `<output>/reports`. Completed
/// cells are never recomputed. A failing cell does not stop its siblings;
/// after the stage finishes the first failure is rethrown as CellError, and
/// the next run resumes from the completed cells.
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Cache and report locations of an experiment.
std::filesystem::path cache_root(const ExperimentConfig& config);
std::filesystem::path report_root(const ExperimentConfig& config);

/// Reads a prediction dump (`sentence,token_index,token,gold,predicted`)
/// and checks it against the gold corpus it claims to cover.
TaggingResult load_prediction_dump(const std::filesystem::path& path, const TaggedCorpus& gold,
                                   const std::vector<std::string>& labels);

/// Prediction dump of a result over `corpus`.
std::string result_dump_csv(const TaggingResult& result, const TaggedCorpus& corpus);

/// Reads a translation dump (`source<TAB>reference<TAB>hypothesis`) and
/// returns (hypotheses, references).
std::pair<std::vector<Sentence>, std::vector<Sentence>> load_translation_dump(const std::filesystem::path& path);

/// Writes every report from the cached dumps only; throws MissingCellsError
/// naming incomplete cells. Returns the written files in a fixed order.
std::vector<std::filesystem::path> emit_reports(const ExperimentConfig& config, const ExperimentData& data,
                                                const Plan& plan, const std::filesystem::path& cache,
                                                const std::filesystem::path& out);

}  // namespace nmtprobe
