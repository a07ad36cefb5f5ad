#include "nmtprobe/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "nmtprobe/io.hpp"
#include "nmtprobe/optim.hpp"

namespace nmtprobe {

// ---------------------------------------------------------------------------
// NmtConfig

void NmtConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("embed_dim", "must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden_dim", "must be positive");
  if (num_layers == 0) throw ConfigError("num_layers", "must be at least 1");
  if (residual && hidden_dim != embed_dim) {
    throw ConfigError("residual", "residual connections need hidden_dim == embed_dim");
  }
  if (bidirectional && hidden_dim % 2 != 0) {
    throw ConfigError("bidirectional", "hidden_dim must be even (each direction gets hidden_dim/2)");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout", "must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay", "must be in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
  if (max_len == 0) throw ConfigError("max_len", "must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", "must be positive");
  if (!(init_range > 0.0)) throw ConfigError("init_range", "must be positive");
}

std::map<std::string, std::string> NmtConfig::to_meta() const {
  return {
      {"embed_dim", std::to_string(embed_dim)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"num_layers", std::to_string(num_layers)},
      {"attention_dim", std::to_string(attention_dim)},
      {"bidirectional", bidirectional ? "1" : "0"},
      {"residual", residual ? "1" : "0"},
      {"dropout", format_exact(dropout)},
      {"epochs", std::to_string(epochs)},
      {"learning_rate", format_exact(learning_rate)},
      {"lr_decay", format_exact(lr_decay)},
      {"batch_size", std::to_string(batch_size)},
      {"max_len", std::to_string(max_len)},
      {"clip_norm", format_exact(clip_norm)},
      {"init_range", format_exact(init_range)},
      {"seed", std::to_string(seed)},
  };
}

NmtConfig NmtConfig::from_meta(const std::map<std::string, std::string>& meta) {
  NmtConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = meta.find(key);
    return it == meta.end() ? nullptr : &it->second;
  };
  auto size = [&](const char* key, std::size_t& out) {
    if (auto* v = get(key)) out = std::stoull(*v);
  };
  auto real = [&](const char* key, double& out) {
    if (auto* v = get(key)) out = std::stod(*v);
  };
  size("embed_dim", c.embed_dim);
  size("hidden_dim", c.hidden_dim);
  size("num_layers", c.num_layers);
  size("attention_dim", c.attention_dim);
  if (auto* v = get("bidirectional")) c.bidirectional = *v == "1";
  if (auto* v = get("residual")) c.residual = *v == "1";
  real("dropout", c.dropout);
  size("epochs", c.epochs);
  real("learning_rate", c.learning_rate);
  real("lr_decay", c.lr_decay);
  size("batch_size", c.batch_size);
  size("max_len", c.max_len);
  real("clip_norm", c.clip_norm);
  real("init_range", c.init_range);
  if (auto* v = get("seed")) c.seed = std::stoull(*v);
  return c;
}

// ---------------------------------------------------------------------------
// Building blocks

LstmState lstm_step(Var x, LstmState prev, Parameter& weight, Parameter& bias) {
  Graph& g = *x.graph;
  const Index hidden = prev.h.cols();
  if (weight.value.rows() != x.cols() + hidden || weight.value.cols() != 4 * hidden) {
    throw ShapeError("lstm_step: weight " + shape_string(weight.value) + " does not fit input width " +
                     std::to_string(x.cols()) + " and hidden width " + std::to_string(hidden));
  }
  const Var xh_parts[] = {x, prev.h};
  const Var xh = concat_cols(xh_parts);
  const Var gates = add(matmul(xh, g.param(weight)), g.param(bias));
  const Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
  const Var forget_gate = sigmoid(slice_cols(gates, hidden, hidden));
  const Var out_gate = sigmoid(slice_cols(gates, 2 * hidden, hidden));
  const Var candidate = tanh(slice_cols(gates, 3 * hidden, hidden));
  const Var c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  const Var h = mul(out_gate, tanh(c));
  return {h, c};
}

AttentionOutput additive_attention(Var query, std::span<const Var> keys, std::span<const Var> states,
                                   Parameter& query_proj, Parameter& score_vec) {
  if (keys.empty() || keys.size() != states.size()) throw ShapeError("attention: need one key per encoder state");
  Graph& g = *query.graph;
  const Var q = matmul(query, g.param(query_proj));
  const Var v = g.param(score_vec);
  std::vector<Var> scores;
  scores.reserve(keys.size());
  for (Var k : keys) scores.push_back(matmul(tanh(add(q, k)), v));
  const Var weights = softmax(concat_cols(scores));
  Var context = mul(states[0], slice_cols(weights, 0, 1));
  for (std::size_t j = 1; j < states.size(); ++j) {
    context = add(context, mul(states[j], slice_cols(weights, static_cast<Index>(j), 1)));
  }
  return {context, weights};
}

// ---------------------------------------------------------------------------
// Seq2SeqModel

Seq2SeqModel::Seq2SeqModel(NmtConfig config, Vocab src_vocab, Vocab tgt_vocab)
    : config_(std::move(config)), src_vocab_(std::move(src_vocab)), tgt_vocab_(std::move(tgt_vocab)) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, "init"));
  const double r = config_.init_range;
  const auto E = static_cast<Index>(config_.embed_dim);
  const auto H = static_cast<Index>(config_.hidden_dim);
  const auto A = static_cast<Index>(config_.attention_width());

  src_embed_ = params_.size();
  params_.add("src_embed", uniform_matrix<double>(static_cast<Index>(src_vocab_.size()), E, rng, r));
  tgt_embed_ = params_.size();
  params_.add("tgt_embed", uniform_matrix<double>(static_cast<Index>(tgt_vocab_.size()), E, rng, r));

  const std::size_t dir_width = config_.bidirectional ? config_.hidden_dim / 2 : config_.hidden_dim;
  for (std::size_t k = 1; k <= config_.num_layers; ++k) {
    const std::size_t in = k == 1 ? config_.embed_dim : config_.hidden_dim;
    const std::string layer = "enc.l" + std::to_string(k);
    enc_fwd_.push_back(add_cell(layer + ".fwd", in, dir_width, rng));
    if (config_.bidirectional) enc_bwd_.push_back(add_cell(layer + ".bwd", in, dir_width, rng));
  }
  for (std::size_t k = 1; k <= config_.num_layers; ++k) {
    const std::size_t in = k == 1 ? config_.embed_dim : config_.hidden_dim;
    dec_.push_back(add_cell("dec.l" + std::to_string(k), in, config_.hidden_dim, rng));
  }
  attn_query_ = params_.size();
  params_.add("attn.query", uniform_matrix<double>(H, A, rng, r));
  attn_key_ = params_.size();
  params_.add("attn.key", uniform_matrix<double>(H, A, rng, r));
  attn_score_ = params_.size();
  params_.add("attn.score", uniform_matrix<double>(A, 1, rng, r));
  combine_ = params_.size();
  params_.add("out.combine", uniform_matrix<double>(2 * H, H, rng, r));
  out_weight_ = params_.size();
  params_.add("out.weight", uniform_matrix<double>(H, static_cast<Index>(tgt_vocab_.size()), rng, r));
  out_bias_ = params_.size();
  params_.add("out.bias", Tensor::Zero(1, static_cast<Index>(tgt_vocab_.size())));
}

Seq2SeqModel::Cell Seq2SeqModel::add_cell(const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng) {
  Cell cell{};
  cell.weight = params_.size();
  params_.add(prefix + ".weight", uniform_matrix<double>(static_cast<Index>(input + hidden),
                                                         static_cast<Index>(4 * hidden), rng, config_.init_range));
  cell.bias = params_.size();
  params_.add(prefix + ".bias", Tensor::Zero(1, static_cast<Index>(4 * hidden)));
  return cell;
}

LstmState Seq2SeqModel::zero_state(Graph& g, std::size_t batch, std::size_t width) const {
  const Var zero = g.constant(Tensor::Zero(static_cast<Index>(batch), static_cast<Index>(width)));
  return {zero, zero};
}

Checkpoint Seq2SeqModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta = config_.to_meta();
  ckpt.meta["kind"] = "seq2seq";
  ckpt.meta["frozen"] = frozen_ ? "1" : "0";
  ckpt.meta["src_vocab"] = join(src_vocab_.tokens(), " ");
  ckpt.meta["tgt_vocab"] = join(tgt_vocab_.tokens(), " ");
  ckpt.params = params_;
  return ckpt;
}

Seq2SeqModel Seq2SeqModel::from_checkpoint(const Checkpoint& ckpt) {
  auto field = [&](const char* key) {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw ValueError(std::string("checkpoint lacks meta '") + key + "'");
    return it->second;
  };
  if (field("kind") != "seq2seq") throw ValueError("checkpoint is not a seq2seq model");
  Seq2SeqModel model(NmtConfig::from_meta(ckpt.meta), Vocab::from_tokens(split_whitespace(field("src_vocab"))),
                     Vocab::from_tokens(split_whitespace(field("tgt_vocab"))));
  if (ckpt.params.size() != model.params_.size()) throw ValueError("checkpoint parameter count mismatch");
  for (auto& p : model.params_) {
    const Parameter& stored = ckpt.params.at(p.name);
    if (stored.value.rows() != p.value.rows() || stored.value.cols() != p.value.cols()) {
      throw ShapeError("checkpoint tensor '" + p.name + "' has shape " + shape_string(stored.value) + ", expected " +
                       shape_string(p.value));
    }
    p.value = stored.value;
  }
  model.frozen_ = field("frozen") == "1";
  return model;
}

void Seq2SeqModel::save(const std::filesystem::path& path) const { save_checkpoint(path, to_checkpoint()); }

Seq2SeqModel Seq2SeqModel::load(const std::filesystem::path& path) {
  return from_checkpoint(load_checkpoint(path));
}

std::string Seq2SeqModel::model_id() const {
  return hex_id(fnv1a(serialize_checkpoint(to_checkpoint())));
}

Seq2SeqModel::Encoded Seq2SeqModel::encode_batch(Graph& g, const std::vector<std::vector<int>>& sources) {
  if (sources.empty() || sources.front().empty()) throw ValueError("encode: empty batch or sentence");
  const std::size_t batch = sources.size();
  const std::size_t len = sources.front().size();
  for (const auto& s : sources) {
    if (s.size() != len) throw ShapeError("encode: batch sentences must share one length");
  }
  const std::size_t L = config_.num_layers;
  Encoded enc;
  enc.states.resize(L + 1);

  std::vector<int> column(batch);
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t b = 0; b < batch; ++b) column[b] = sources[b][j];
    enc.states[0].push_back(embedding(g, params_[src_embed_], column));
  }

  for (std::size_t k = 1; k <= L; ++k) {
    const auto& below = enc.states[k - 1];
    std::vector<Var> inputs = below;
    if (k >= 2) {
      for (auto& v : inputs) v = dropout(v, config_.dropout);
    }
    std::vector<Var> out(len);
    const Cell& fwd = enc_fwd_[k - 1];
    if (!config_.bidirectional) {
      LstmState st = zero_state(g, batch, config_.hidden_dim);
      for (std::size_t j = 0; j < len; ++j) {
        st = lstm_step(inputs[j], st, params_[fwd.weight], params_[fwd.bias]);
        out[j] = st.h;
      }
      enc.finals.push_back(st);
    } else {
      const std::size_t half = config_.hidden_dim / 2;
      const Cell& bwd = enc_bwd_[k - 1];
      std::vector<LstmState> f(len), b(len);
      LstmState st = zero_state(g, batch, half);
      for (std::size_t j = 0; j < len; ++j) f[j] = st = lstm_step(inputs[j], st, params_[fwd.weight], params_[fwd.bias]);
      st = zero_state(g, batch, half);
      for (std::size_t j = len; j-- > 0;) b[j] = st = lstm_step(inputs[j], st, params_[bwd.weight], params_[bwd.bias]);
      for (std::size_t j = 0; j < len; ++j) {
        const Var parts[] = {f[j].h, b[j].h};
        out[j] = concat_cols(parts);
      }
      const Var hs[] = {f[len - 1].h, b[0].h};
      const Var cs[] = {f[len - 1].c, b[0].c};
      enc.finals.push_back({concat_cols(hs), concat_cols(cs)});
    }
    if (config_.residual && k >= 2) {
      for (std::size_t j = 0; j < len; ++j) out[j] = add(out[j], below[j]);
    }
    enc.states[k] = std::move(out);
  }
  return enc;
}

std::vector<Var> Seq2SeqModel::attention_keys(Graph& g, const Encoded& enc) {
  const Var key = g.param(params_[attn_key_]);
  std::vector<Var> keys;
  keys.reserve(enc.states.back().size());
  for (Var s : enc.states.back()) keys.push_back(matmul(s, key));
  return keys;
}

Seq2SeqModel::DecoderStep Seq2SeqModel::decoder_step(Graph& g, const Encoded& enc, std::span<const Var> keys,
                                                     const std::vector<int>& inputs,
                                                     const std::vector<LstmState>& states) {
  DecoderStep step;
  Var below = embedding(g, params_[tgt_embed_], inputs);
  for (std::size_t k = 0; k < dec_.size(); ++k) {
    const Var in = k == 0 ? below : dropout(below, config_.dropout);
    const LstmState st = lstm_step(in, states[k], params_[dec_[k].weight], params_[dec_[k].bias]);
    step.states.push_back(st);
    below = (config_.residual && k >= 1) ? add(st.h, below) : st.h;
  }
  const AttentionOutput att =
      additive_attention(below, keys, enc.states.back(), params_[attn_query_], params_[attn_score_]);
  const Var parts[] = {below, att.context};
  Var combined = tanh(matmul(concat_cols(parts), g.param(params_[combine_])));
  combined = dropout(combined, config_.dropout);
  step.logits = add(matmul(combined, g.param(params_[out_weight_])), g.param(params_[out_bias_]));
  step.attention = att.weights;
  return step;
}

Var Seq2SeqModel::decoder_loss(Graph& g, const Encoded& enc, const std::vector<std::vector<int>>& targets,
                               double normalizer) {
  const std::size_t batch = targets.size();
  std::size_t steps = 0;
  for (const auto& t : targets) steps = std::max(steps, t.size() + 1);
  const std::vector<Var> keys = attention_keys(g, enc);

  std::vector<LstmState> states = enc.finals;
  std::vector<int> in(batch), out(batch);
  Var total{};
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& y = targets[b];
      in[b] = t == 0 ? Vocab::kBos : (t - 1 < y.size() ? y[t - 1] : Vocab::kPad);
      out[b] = t < y.size() ? y[t] : (t == y.size() ? Vocab::kEos : Vocab::kPad);
    }
    DecoderStep step = decoder_step(g, enc, keys, in, states);
    states = std::move(step.states);
    const Var loss = cross_entropy(step.logits, out, normalizer, Vocab::kPad);
    total = t == 0 ? loss : add(total, loss);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

// Inference graphs run in eval mode and never call backward, so binding the
// model's parameters cannot write to them.
Seq2SeqModel& inference_view(const Seq2SeqModel& model) { return const_cast<Seq2SeqModel&>(model); }

}  // namespace

LayerStates encode(const Seq2SeqModel& model, std::span<const int> source_ids) {
  if (!model.frozen()) throw ValueError("encode: model must be frozen (trained, or marked as an untrained control)");
  if (source_ids.empty()) throw ValueError("encode: empty sentence");
  Graph g(Mode::eval);
  const auto enc = inference_view(model).encode_batch(g, {std::vector<int>(source_ids.begin(), source_ids.end())});
  LayerStates out;
  for (const auto& layer : enc.states) {
    Tensor m(static_cast<Index>(layer.size()), layer.front().cols());
    for (std::size_t j = 0; j < layer.size(); ++j) m.row(static_cast<Index>(j)) = layer[j].value().row(0);
    out.layers.push_back(std::move(m));
  }
  return out;
}

AttentionResult attention_context(const Seq2SeqModel& model, const Tensor& decoder_state,
                                  std::span<const Tensor> encoder_states) {
  if (encoder_states.empty()) throw ValueError("attention_context: no encoder states");
  Seq2SeqModel& m = inference_view(model);
  Graph g(Mode::eval);
  Seq2SeqModel::Encoded enc;
  enc.states.resize(1);
  for (const auto& s : encoder_states) enc.states[0].push_back(g.constant(s));
  const auto keys = m.attention_keys(g, enc);
  const auto& ps = m.params();
  const AttentionOutput out = additive_attention(g.constant(decoder_state), keys, enc.states[0],
                                                 m.params()[ps.index_of("attn.query")],
                                                 m.params()[ps.index_of("attn.score")]);
  return {out.context.value(), out.weights.value()};
}

std::vector<int> translate_greedy(const Seq2SeqModel& model, std::span<const int> source_ids, std::size_t max_output) {
  if (max_output == 0) throw ValueError("translate_greedy: max_output must be positive");
  if (source_ids.empty()) throw ValueError("translate_greedy: empty sentence");
  Seq2SeqModel& m = inference_view(model);
  Graph g(Mode::eval);
  const auto enc = m.encode_batch(g, {std::vector<int>(source_ids.begin(), source_ids.end())});
  const auto keys = m.attention_keys(g, enc);
  std::vector<LstmState> states = enc.finals;
  std::vector<int> output;
  int input = Vocab::kBos;
  while (output.size() < max_output) {
    auto step = m.decoder_step(g, enc, keys, {input}, states);
    states = std::move(step.states);
    auto logits = step.logits.value().row(0).eval();
    logits(Vocab::kPad) = -std::numeric_limits<double>::infinity();
    logits(Vocab::kBos) = -std::numeric_limits<double>::infinity();
    if (output.empty()) logits(Vocab::kEos) = -std::numeric_limits<double>::infinity();
    const int next = static_cast<int>(argmax_row(logits));
    if (next == Vocab::kEos) break;
    output.push_back(next);
    input = next;
  }
  return output;
}

Sentence translate_greedy(const Seq2SeqModel& model, const Sentence& source, std::size_t max_output) {
  const auto ids = translate_greedy(model, model.src_vocab().encode(source), max_output);
  return model.tgt_vocab().decode(ids);
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Example {
  std::vector<int> source;
  std::vector<int> target;
};

std::vector<Example> encode_corpus(const Seq2SeqModel& model, const ParallelCorpus& corpus) {
  std::vector<Example> out;
  out.reserve(corpus.pairs.size());
  for (const auto& [s, t] : corpus.pairs) {
    if (s.empty() || t.empty()) throw ValueError("parallel corpus contains an empty sentence");
    out.push_back({model.src_vocab().encode(s), model.tgt_vocab().encode(t)});
  }
  return out;
}

/// Groups examples by source length, chunks groups into batches and (given
/// an rng) shuffles both within groups and the batch order.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data, std::size_t batch_size,
                                                   Rng* rng) {
  std::map<std::size_t, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < data.size(); ++i) by_len[data[i].source.size()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, idx] : by_len) {
    if (rng) rng->shuffle(idx);
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
      const std::size_t end = std::min(idx.size(), start + batch_size);
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  if (rng) rng->shuffle(batches);
  return batches;
}

std::size_t target_tokens(const std::vector<Example>& data, const std::vector<std::size_t>& batch) {
  std::size_t n = 0;
  for (std::size_t i : batch) n += data[i].target.size() + 1;
  return n;
}

}  // namespace

std::size_t best_epoch_index(std::span<const double> dev_losses) {
  if (dev_losses.empty()) throw ValueError("best_epoch_index: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_losses.size(); ++i) {
    if (dev_losses[i] < dev_losses[best]) best = i;
  }
  return best;
}

double corpus_loss(const Seq2SeqModel& model, const ParallelCorpus& corpus) {
  Seq2SeqModel& m = inference_view(model);
  const auto data = encode_corpus(model, corpus);
  if (data.empty()) throw ValueError("corpus_loss: empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& batch : make_batches(data, model.config().batch_size, nullptr)) {
    Graph g(Mode::eval);
    std::vector<std::vector<int>> src, tgt;
    for (std::size_t i : batch) {
      src.push_back(data[i].source);
      tgt.push_back(data[i].target);
    }
    const auto enc = m.encode_batch(g, src);
    total += m.decoder_loss(g, enc, tgt, 1.0).value()(0, 0);
    tokens += target_tokens(data, batch);
  }
  return total / static_cast<double>(tokens);
}

TrainReport train_nmt(Seq2SeqModel& model, const ParallelCorpus& train, const ParallelCorpus& dev,
                      const EpochCallback& on_epoch) {
  if (model.frozen()) throw ValueError("train_nmt: model is frozen");
  const NmtConfig& cfg = model.config();
  cfg.validate();
  const auto data = encode_corpus(model, train);
  if (data.empty()) throw ValueError("train_nmt: empty training corpus");
  if (dev.pairs.empty()) throw ValueError("train_nmt: empty dev corpus");

  Rng rng(derive_seed(cfg.seed, "train"));
  TrainReport report;
  ParameterSet best_params;
  double best = std::numeric_limits<double>::infinity();
  double lr = cfg.learning_rate;
  bool decaying = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t tokens = 0;
    try {
      for (const auto& batch : make_batches(data, cfg.batch_size, &rng)) {
        Graph g(Mode::train, rng.next());
        std::vector<std::vector<int>> src, tgt;
        for (std::size_t i : batch) {
          src.push_back(data[i].source);
          tgt.push_back(data[i].target);
        }
        // The gradient is the summed NLL per sentence (not per token), the
        // scale at which SGD with lr 1.0 and norm-5 clipping is tuned.
        const std::size_t n = target_tokens(data, batch);
        const auto enc = model.encode_batch(g, src);
        const Var loss = model.decoder_loss(g, enc, tgt, static_cast<double>(batch.size()));
        const double value = loss.value()(0, 0);
        if (!std::isfinite(value)) throw NumericError("non-finite training loss");
        model.params().zero_grad();
        g.backward(loss);
        clip_grad_norm(model.params(), cfg.clip_norm);
        sgd_step(model.params(), lr);
        loss_sum += value * static_cast<double>(batch.size());
        tokens += n;
      }
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<int>(epoch), e.what());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(tokens);
    rec.learning_rate = lr;
    try {
      rec.dev_loss = corpus_loss(model, dev);
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<int>(epoch), e.what());
    }
    if (!std::isfinite(rec.dev_loss)) throw DivergenceError(static_cast<int>(epoch), "non-finite dev loss");
    report.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_loss < best) {
      best = rec.dev_loss;
      best_params = model.params();
      report.best_epoch = epoch;
    } else {
      decaying = true;
    }
    if (decaying) lr *= cfg.lr_decay;
  }

  if (report.history.empty()) {
    report.best_dev_loss = corpus_loss(model, dev);
  } else {
    for (std::size_t i = 0; i < model.params().size(); ++i) model.params()[i].value = best_params[i].value;
    report.best_dev_loss = best;
  }
  model.params().zero_grad();
  model.freeze();
  return report;
}

std::string training_log_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,dev_loss,lr\n";
  for (const auto& r : report.history) {
    out += std::to_string(r.epoch) + "," + format_fixed(r.train_loss, 6) + "," + format_fixed(r.dev_loss, 6) + "," +
           format_exact(r.learning_rate) + "\n";
  }
  return out;
}

Seq2SeqModel make_model_for(const ParallelCorpus& train, const NmtConfig& config) {
  const auto src = train.sources();
  const auto tgt = train.targets();
  const std::size_t unlimited = std::numeric_limits<std::size_t>::max();
  return Seq2SeqModel(config, Vocab::build(src, unlimited, 1), Vocab::build(tgt, unlimited, 1));
}

}  // namespace nmtprobe
