#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nmtprobe/corpus.hpp"
#include "nmtprobe/tensor.hpp"

namespace nmtprobe {

/// Word vectors, one row per vocabulary entry (reserved ids included).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Vocab vocab, Tensor matrix);

  const Vocab& vocab() const { return vocab_; }
  const Tensor& matrix() const { return matrix_; }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.cols()); }
  std::size_t size() const { return vocab_.size(); }

  /// Row of `token`; out-of-vocabulary tokens get the UNK row.
  RowVector<double> lookup(std::string_view token) const;

  /// Text format: first line "<|V|> <d>", then "<token> <d floats>" per row
  /// in id order.
  std::string to_text() const;
  static EmbeddingTable from_text(std::string_view text, const std::string& origin);
  void save(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);

  bool operator==(const EmbeddingTable& other) const {
    return vocab_ == other.vocab_ && matrix_ == other.matrix_;
  }

 private:
  Vocab vocab_;
  Tensor matrix_;
};

struct SkipGramConfig {
  std::size_t dim = 500;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  /// Starting learning rate, decayed linearly to lr * 1e-4 over all updates.
  double learning_rate = 0.025;
  std::size_t max_vocab = 50000;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;
};

/// Draws ids from counts^0.75 (normalised) by inverse-CDF lookup.
class NoiseSampler {
 public:
  explicit NoiseSampler(std::span<const double> counts, double power = 0.75);
  std::size_t sample(Rng& rng) const;
  /// Probability of drawing `id`.
  double probability(std::size_t id) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

struct SkipGramReport {
  /// Mean negative-sampling loss per (centre, context) pair, per epoch.
  std::vector<double> epoch_loss;
};

/// Skip-gram with negative sampling. Input vectors start uniform in
/// [-0.5/d, 0.5/d], output vectors at zero; the input vectors are returned.
EmbeddingTable train_skipgram(std::span<const Sentence> sentences, const SkipGramConfig& config,
                              SkipGramReport* report = nullptr);

}  // namespace nmtprobe
