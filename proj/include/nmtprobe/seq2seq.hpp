#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nmtprobe/autodiff.hpp"
#include "nmtprobe/checkpoint.hpp"
#include "nmtprobe/corpus.hpp"

namespace nmtprobe {

/// Architecture and training settings of an attentional LSTM encoder-decoder.
struct NmtConfig {
  std::size_t embed_dim = 500;
  std::size_t hidden_dim = 500;
  std::size_t num_layers = 4;
  /// 0 means "same as hidden_dim".
  std::size_t attention_dim = 0;
  bool bidirectional = false;
  bool residual = false;
  /// Dropout between stacked LSTM layers and before the output projection.
  double dropout = 0.3;
  std::size_t epochs = 20;
  double learning_rate = 1.0;
  /// Factor applied to the learning rate every epoch once dev loss has
  /// failed to improve.
  double lr_decay = 0.5;
  std::size_t batch_size = 32;
  std::size_t max_len = 50;
  double clip_norm = 5.0;
  double init_range = 0.1;
  std::uint64_t seed = 1;

  std::size_t attention_width() const { return attention_dim ? attention_dim : hidden_dim; }
  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::map<std::string, std::string> to_meta() const;
  static NmtConfig from_meta(const std::map<std::string, std::string>& meta);
};

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step for a batch. `x` is B x in, state is B x H, `weight` is
/// (in + H) x 4H and `bias` 1 x 4H with gate blocks ordered input, forget,
/// output, candidate.
LstmState lstm_step(Var x, LstmState prev, Parameter& weight, Parameter& bias);

struct AttentionOutput {
  Var context;  ///< B x H
  Var weights;  ///< B x S, rows sum to 1
};

/// Additive (single hidden layer) attention: score_j = tanh(q Wq + s_j Wk) v.
/// `keys` are the precomputed s_j Wk, one B x A matrix per source position.
AttentionOutput additive_attention(Var query, std::span<const Var> keys, std::span<const Var> states,
                                   Parameter& query_proj, Parameter& score_vec);

/// h^k_j for k = 0..L: `layers[k]` is S x width, row j is position j. Layer 0
/// holds the word embeddings.
struct LayerStates {
  std::vector<Tensor> layers;
};

class Seq2SeqModel {
 public:
  /// Fresh model with weights drawn from U[-init_range, init_range] and
  /// zero biases, seeded by `config.seed`.
  Seq2SeqModel(NmtConfig config, Vocab src_vocab, Vocab tgt_vocab);

  const NmtConfig& config() const { return config_; }
  const Vocab& src_vocab() const { return src_vocab_; }
  const Vocab& tgt_vocab() const { return tgt_vocab_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Frozen models are read-only feature generators. Training freezes the
  /// selected checkpoint; an untrained control model is frozen explicitly.
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  Checkpoint to_checkpoint() const;
  static Seq2SeqModel from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static Seq2SeqModel load(const std::filesystem::path& path);
  /// Content hash of the checkpoint (16 hex digits).
  std::string model_id() const;

  // Graph builders. Batches hold sentences of one common source length.

  struct Encoded {
    /// states[k][j]: B x width output of layer k at position j.
    std::vector<std::vector<Var>> states;
    /// Final (h, c) per layer, used to initialise the decoder.
    std::vector<LstmState> finals;
  };

  Encoded encode_batch(Graph& g, const std::vector<std::vector<int>>& sources);

  /// Summed token NLL of `targets` (EOS appended internally, PAD-masked),
  /// divided by `normalizer`.
  Var decoder_loss(Graph& g, const Encoded& enc, const std::vector<std::vector<int>>& targets, double normalizer);

  struct DecoderStep {
    std::vector<LstmState> states;
    Var logits;
    Var attention;
  };

  /// Embeds `inputs`, advances the decoder stack one step and returns
  /// the output logits.
  DecoderStep decoder_step(Graph& g, const Encoded& enc, std::span<const Var> keys, const std::vector<int>& inputs,
                           const std::vector<LstmState>& states);

  std::vector<Var> attention_keys(Graph& g, const Encoded& enc);

  std::size_t layer_width(std::size_t k) const { return k == 0 ? config_.embed_dim : config_.hidden_dim; }

 private:
  struct Cell {
    std::size_t weight;
    std::size_t bias;
  };

  Cell add_cell(const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng);
  LstmState zero_state(Graph& g, std::size_t batch, std::size_t width) const;

  NmtConfig config_;
  Vocab src_vocab_;
  Vocab tgt_vocab_;
  ParameterSet params_;
  bool frozen_ = false;

  std::size_t src_embed_ = 0;
  std::size_t tgt_embed_ = 0;
  std::vector<Cell> enc_fwd_;
  std::vector<Cell> enc_bwd_;
  std::vector<Cell> dec_;
  std::size_t attn_query_ = 0;
  std::size_t attn_key_ = 0;
  std::size_t attn_score_ = 0;
  std::size_t combine_ = 0;
  std::size_t out_weight_ = 0;
  std::size_t out_bias_ = 0;
};

/// Per-layer encoder states for one sentence, dropout disabled. Requires a
/// frozen model and a non-empty sentence.
LayerStates encode(const Seq2SeqModel& model, std::span<const int> source_ids);

/// Attention over encoder states for a single decoder state (1 x H).
struct AttentionResult {
  Tensor context;
  Tensor weights;
};
AttentionResult attention_context(const Seq2SeqModel& model, const Tensor& decoder_state,
                                  std::span<const Tensor> encoder_states);

/// Greedy decoding until EOS or `max_output` tokens. EOS is not accepted as
/// the first token, so the output is never empty. Returns ids without EOS.
std::vector<int> translate_greedy(const Seq2SeqModel& model, std::span<const int> source_ids, std::size_t max_output);
Sentence translate_greedy(const Seq2SeqModel& model, const Sentence& source, std::size_t max_output);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  ///< 1-based
  double best_dev_loss = 0.0;
};

/// Index (0-based) of the first minimum of a loss history.
std::size_t best_epoch_index(std::span<const double> dev_losses);

/// Per-token dev loss (mean NLL over non-PAD target tokens incl. EOS).
double corpus_loss(const Seq2SeqModel& model, const ParallelCorpus& corpus);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// SGD training with global-norm clipping, PAD-masked per-token loss and
/// dev-driven learning-rate decay. Leaves `model` holding the parameters of
/// the epoch with the lowest dev loss, frozen. Throws DivergenceError on a
/// non-finite loss.
TrainReport train_nmt(Seq2SeqModel& model, const ParallelCorpus& train, const ParallelCorpus& dev,
                      const EpochCallback& on_epoch = {});

/// CSV with header `epoch,train_loss,dev_loss,lr`.
std::string training_log_csv(const TrainReport& report);

/// Builds source/target vocabularies from a training corpus (no size cap,
/// min count 1) and returns a fresh model.
Seq2SeqModel make_model_for(const ParallelCorpus& train, const NmtConfig& config);

}  // namespace nmtprobe
