#include "nmtprobe/baselines.hpp"

#include <limits>

#include "nmtprobe/error.hpp"
#include "nmtprobe/io.hpp"

namespace nmtprobe {

namespace {

// Highest count; ties to the smallest tag (std::map iterates in order, so the
// first strictly larger count wins).
std::string argmax_tag(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [tag, n] : counts) {
    if (n > best_count) {
      best = tag;
      best_count = n;
    }
  }
  return best;
}

}  // namespace

MftModel fit_mft(const TaggedCorpus& train) {
  std::map<std::string, std::map<std::string, std::size_t>> per_type;
  std::map<std::string, std::size_t> global;
  for (const auto& sent : train.sentences) {
    for (std::size_t j = 0; j < sent.tokens.size(); ++j) {
      ++per_type[sent.tokens[j]][sent.tags[j]];
      ++global[sent.tags[j]];
    }
  }
  if (global.empty()) throw ValueError("fit_mft: empty training corpus");
  MftModel model;
  for (const auto& [token, counts] : per_type) model.tag_of[token] = argmax_tag(counts);
  model.global_tag = argmax_tag(global);
  return model;
}

std::vector<std::string> predict_mft(const MftModel& model, const Sentence& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = model.tag_of.find(t);
    out.push_back(it == model.tag_of.end() ? model.global_tag : it->second);
  }
  return out;
}

std::string mft_to_tsv(const MftModel& model) {
  std::string out;
  for (const auto& [token, tag] : model.tag_of) out += token + "\t" + tag + "\n";
  out += "\t" + model.global_tag + "\n";
  return out;
}

MftModel mft_from_tsv(std::string_view text, const std::string& origin) {
  MftModel model;
  bool have_global = false;
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(origin, i + 1, "expected token<TAB>tag");
    }
    const std::string token = line.substr(0, tab);
    const std::string tag = line.substr(tab + 1);
    if (tag.empty()) throw FormatError(origin, i + 1, "empty tag");
    if (token.empty()) {
      if (have_global) throw FormatError(origin, i + 1, "duplicate global majority row");
      model.global_tag = tag;
      have_global = true;
    } else if (!model.tag_of.emplace(token, tag).second) {
      throw FormatError(origin, i + 1, "duplicate token '" + token + "'");
    }
  }
  if (!have_global) throw FormatError(origin, 0, "missing global majority row");
  return model;
}

void save_mft(const MftModel& model, const std::filesystem::path& path) { write_file_atomic(path, mft_to_tsv(model)); }

MftModel load_mft(const std::filesystem::path& path) { return mft_from_tsv(read_file(path), path.string()); }

ParallelCorpus word2tag_pairs(const TaggedCorpus& corpus) {
  ParallelCorpus out;
  for (const auto& s : corpus.sentences) out.pairs.emplace_back(s.tokens, s.tags);
  return out;
}

Seq2SeqModel train_word2tag(const TaggedCorpus& train, const TaggedCorpus& dev, const TagSchema& schema,
                            const NmtConfig& config, const EpochCallback& on_epoch) {
  const ParallelCorpus train_pairs = word2tag_pairs(train);
  ParallelCorpus dev_pairs = word2tag_pairs(dev);
  dev_pairs.split = Split::dev;
  const auto sources = train_pairs.sources();
  Vocab src = Vocab::build(sources, std::numeric_limits<std::size_t>::max(), 1);
  std::vector<std::string> tag_tokens = Vocab().tokens();
  tag_tokens.insert(tag_tokens.end(), schema.fine().begin(), schema.fine().end());
  Seq2SeqModel model(config, std::move(src), Vocab::from_tokens(tag_tokens));
  train_nmt(model, train_pairs, dev_pairs, on_epoch);
  return model;
}

std::vector<std::string> predict_word2tag(const Seq2SeqModel& model, const Sentence& tokens) {
  // A few spare steps let over-long outputs show up (and be discarded) rather
  // than being cut exactly at the input length.
  return translate_greedy(model, tokens, tokens.size() + 5);
}

std::vector<std::string> align_positionwise(const std::vector<std::string>& predicted, std::size_t length) {
  std::vector<std::string> out(length);
  for (std::size_t i = 0; i < length && i < predicted.size(); ++i) out[i] = predicted[i];
  return out;
}

}  // namespace nmtprobe
