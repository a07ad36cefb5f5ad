#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nmtprobe/autodiff.hpp"
#include "nmtprobe/checkpoint.hpp"
#include "nmtprobe/corpus.hpp"
#include "nmtprobe/optim.hpp"
#include "nmtprobe/seq2seq.hpp"

namespace nmtprobe {

class EmbeddingTable;

enum class Granularity { fine, coarse };
std::string_view to_string(Granularity g);

/// One row per corpus token: the feature vector that represents the token,
/// its gold label id and where it came from.
struct FeatureDataset {
  Tensor features;  ///< rows x width
  std::vector<int> tags;
  std::vector<std::size_t> sentence;
  std::vector<std::size_t> position;
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  ///< label inventory, indexed by tag id
  std::size_t layer = 0;
  std::string model_id;
  std::string corpus_id;
  Split split = Split::train;

  std::size_t size() const { return tags.size(); }
  std::size_t width() const { return static_cast<std::size_t>(features.cols()); }
  /// Offsets of the first row of each sentence, plus a final end offset.
  std::vector<std::size_t> sentence_offsets() const;
};

/// Encoder layer `k` features for every token of `corpus`, in corpus order.
/// Tokens unknown to the model's source vocabulary go through UNK. Gold ids
/// index the schema's fine or coarse inventory.
FeatureDataset extract_features(const Seq2SeqModel& model, const TaggedCorpus& corpus, const TagSchema& schema,
                                std::size_t k, Granularity granularity = Granularity::fine);

/// Non-contextual features from a word embedding table (UnsupEmb baseline).
FeatureDataset embedding_features(const EmbeddingTable& table, const TaggedCorpus& corpus, const TagSchema& schema,
                                  Granularity granularity = Granularity::fine);

/// Content hash of a tagged corpus (16 hex digits).
std::string corpus_id(const TaggedCorpus& corpus);

/// Binary feature cache. Layout, little-endian:
///   "NPFEAT01", u32 header length, header text (key=value lines: model_id,
///   corpus_id, layer, split, rows, width, labels as space-separated list),
///   then per row: u32 sentence, u32 position, i32 tag, u32 token byte
///   length, token bytes, width x float32.
void save_features(const FeatureDataset& data, const std::filesystem::path& path);
FeatureDataset load_features(const std::filesystem::path& path);

struct ProbeConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  double init_range = 0.1;
  AdamOptions adam;
  std::uint64_t seed = 1;
};

/// Feed-forward tagger: input -> ReLU hidden layer of the input's width ->
/// dropout -> softmax over the label inventory.
class ProbeClassifier {
 public:
  ProbeClassifier(std::size_t input_width, std::vector<std::string> labels, const ProbeConfig& config);

  std::size_t input_width() const { return input_width_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const ProbeConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Logits for a batch of feature rows.
  Var logits(Graph& g, Var features);

  /// Label scores for one feature row, computed without a graph. Every row
  /// goes through the same code path, so a row's prediction never depends on
  /// the batch it came in.
  RowVector<double> score_row(const RowVector<double>& x) const;

  Checkpoint to_checkpoint() const;
  static ProbeClassifier from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static ProbeClassifier load(const std::filesystem::path& path);

 private:
  std::size_t input_width_;
  std::vector<std::string> labels_;
  ProbeConfig config_;
  ParameterSet params_;
};

struct ProbeTrainReport {
  std::vector<double> train_loss;
  std::vector<double> dev_loss;
  std::size_t best_epoch = 0;  ///< 1-based; 0 when epochs == 0
};

/// Adam on mean cross-entropy; returns the classifier from the epoch with
/// the lowest dev loss.
ProbeClassifier train_probe(const FeatureDataset& train, const FeatureDataset& dev, const ProbeConfig& config = {},
                            ProbeTrainReport* report = nullptr);

/// Argmax label ids, dropout off; ties go to the lowest id.
std::vector<int> predict_probe(const ProbeClassifier& probe, const Tensor& features);

/// Mean cross-entropy of the probe on a dataset (eval mode).
double probe_loss(const ProbeClassifier& probe, const FeatureDataset& data);

/// CSV with header `sentence,token_index,token,gold,predicted`; gold and
/// predicted are label names ("" for a missing prediction).
std::string prediction_dump_csv(const FeatureDataset& data, const std::vector<int>& predicted);

}  // namespace nmtprobe
