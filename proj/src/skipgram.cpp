#include "nmtprobe/skipgram.hpp"

#include <algorithm>
#include <cmath>

#include "nmtprobe/error.hpp"
#include "nmtprobe/io.hpp"

namespace nmtprobe {

EmbeddingTable::EmbeddingTable(Vocab vocab, Tensor matrix) : vocab_(std::move(vocab)), matrix_(std::move(matrix)) {
  if (static_cast<std::size_t>(matrix_.rows()) != vocab_.size()) {
    throw ShapeError("embedding table has " + std::to_string(matrix_.rows()) + " rows for a vocabulary of " +
                     std::to_string(vocab_.size()));
  }
}

RowVector<double> EmbeddingTable::lookup(std::string_view token) const { return matrix_.row(vocab_.id(token)); }

std::string EmbeddingTable::to_text() const {
  std::string out = std::to_string(size()) + " " + std::to_string(dim()) + "\n";
  for (std::size_t i = 0; i < size(); ++i) {
    out += vocab_.token(static_cast<int>(i));
    for (Index c = 0; c < matrix_.cols(); ++c) {
      out += ' ';
      out += format_exact(matrix_(static_cast<Index>(i), c));
    }
    out += '\n';
  }
  return out;
}

EmbeddingTable EmbeddingTable::from_text(std::string_view text, const std::string& origin) {
  const auto lines = split(text, '\n');
  if (lines.empty()) throw FormatError(origin, 0, "empty embedding file");
  const auto head = split_whitespace(lines[0]);
  std::size_t rows = 0;
  std::size_t dim = 0;
  try {
    if (head.size() != 2) throw std::invalid_argument("header");
    rows = std::stoull(head[0]);
    dim = std::stoull(head[1]);
  } catch (const std::logic_error&) {
    throw FormatError(origin, 1, "header must be '<rows> <dim>'");
  }
  if (dim == 0) throw FormatError(origin, 1, "dimension must be positive");
  std::vector<std::string> tokens;
  Tensor matrix(static_cast<Index>(rows), static_cast<Index>(dim));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t lineno = i + 2;
    if (lineno > lines.size()) throw FormatError(origin, lineno, "expected " + std::to_string(rows) + " rows");
    const auto parts = split_whitespace(lines[lineno - 1]);
    if (parts.size() != dim + 1) {
      throw FormatError(origin, lineno, "expected token and " + std::to_string(dim) + " values");
    }
    tokens.push_back(parts[0]);
    for (std::size_t c = 0; c < dim; ++c) {
      try {
        matrix(static_cast<Index>(i), static_cast<Index>(c)) = std::stod(parts[c + 1]);
      } catch (const std::logic_error&) {
        throw FormatError(origin, lineno, "bad number '" + parts[c + 1] + "'");
      }
    }
  }
  for (std::size_t i = rows + 1; i < lines.size(); ++i) {
    if (!trim(lines[i]).empty()) throw FormatError(origin, i + 1, "unexpected extra row");
  }
  try {
    return EmbeddingTable(Vocab::from_tokens(tokens), std::move(matrix));
  } catch (const ValueError& e) {
    throw FormatError(origin, 0, e.what());
  }
}

void EmbeddingTable::save(const std::filesystem::path& path) const { write_file_atomic(path, to_text()); }

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  return from_text(read_file(path), path.string());
}

NoiseSampler::NoiseSampler(std::span<const double> counts, double power) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw ValueError("noise sampler: negative count");
    total += std::pow(c, power);
    cdf_.push_back(total);
  }
  if (total <= 0.0) throw ValueError("noise sampler: all counts are zero");
  for (double& v : cdf_) v /= total;
  cdf_.back() = 1.0;
}

std::size_t NoiseSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
}

double NoiseSampler::probability(std::size_t id) const {
  return id == 0 ? cdf_[0] : cdf_[id] - cdf_[id - 1];
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

EmbeddingTable train_skipgram(std::span<const Sentence> sentences, const SkipGramConfig& config,
                              SkipGramReport* report) {
  if (config.dim == 0) throw ValueError("train_skipgram: dim must be positive");
  if (config.window == 0) throw ValueError("train_skipgram: window must be positive");
  if (config.learning_rate <= 0.0) throw ValueError("train_skipgram: learning_rate must be positive");
  if (sentences.empty()) throw ValueError("train_skipgram: empty corpus");

  Vocab vocab = Vocab::build(sentences, config.max_vocab, config.min_count);
  std::vector<std::vector<int>> encoded;
  std::vector<double> counts(vocab.size(), 0.0);
  std::size_t token_total = 0;
  for (const auto& s : sentences) {
    encoded.push_back(vocab.encode(s));
    for (int id : encoded.back()) counts[static_cast<std::size_t>(id)] += 1.0;
    token_total += s.size();
  }
  if (token_total == 0) throw ValueError("train_skipgram: corpus has no tokens");

  Rng rng(config.seed);
  const auto d = static_cast<Index>(config.dim);
  const double range = 0.5 / static_cast<double>(config.dim);
  Tensor in = uniform_matrix<double>(static_cast<Index>(vocab.size()), d, rng, range);
  Tensor out = Tensor::Zero(static_cast<Index>(vocab.size()), d);
  const NoiseSampler noise(counts);

  SkipGramReport local;
  SkipGramReport& rep = report ? *report : local;
  rep = {};

  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double total_steps = static_cast<double>(config.epochs * token_total);
  double step = 0.0;
  RowVector<double> grad_in(d);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t si : order) {
      const auto& ids = encoded[si];
      const auto n = static_cast<std::ptrdiff_t>(ids.size());
      for (std::ptrdiff_t i = 0; i < n; ++i, step += 1.0) {
        const double lr = config.learning_rate * std::max(1e-4, 1.0 - step / total_steps);
        // Reduced window, as in word2vec: nearer contexts are seen more often.
        const auto b = static_cast<std::ptrdiff_t>(rng.below(config.window)) + 1;
        const auto center = static_cast<Index>(ids[static_cast<std::size_t>(i)]);
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - b); j <= std::min(n - 1, i + b); ++j) {
          if (j == i) continue;
          const auto context = static_cast<Index>(ids[static_cast<std::size_t>(j)]);
          grad_in.setZero();
          for (std::size_t k = 0; k <= config.negatives; ++k) {
            Index target = context;
            double label = 1.0;
            if (k > 0) {
              target = static_cast<Index>(noise.sample(rng));
              if (target == context) continue;
              label = 0.0;
            }
            const double score = in.row(center).dot(out.row(target));
            loss_sum -= label > 0.5 ? log_sigmoid(score) : log_sigmoid(-score);
            const double g = (label - sigmoid(score)) * lr;
            grad_in.noalias() += g * out.row(target);
            out.row(target).noalias() += g * in.row(center);
          }
          in.row(center) += grad_in;
          ++pairs;
        }
      }
    }
    rep.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  return EmbeddingTable(std::move(vocab), std::move(in));
}

}  // namespace nmtprobe
