#include "nmtprobe/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <map>

#include "nmtprobe/error.hpp"
#include "nmtprobe/probe.hpp"
#include "nmtprobe/random.hpp"

namespace nmtprobe {

void TaggingResult::validate() const {
  if (predicted.size() != gold.size()) {
    throw ValueError("tagging result: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(gold.size()) + " gold tokens");
  }
  if (sentence_starts.empty() || sentence_starts.front() != 0 || sentence_starts.back() != gold.size()) {
    throw ValueError("tagging result: sentence offsets do not cover the tokens");
  }
  for (std::size_t i = 1; i < sentence_starts.size(); ++i) {
    if (sentence_starts[i] < sentence_starts[i - 1]) throw ValueError("tagging result: decreasing sentence offsets");
  }
  const auto n = static_cast<int>(labels.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= n) throw ValueError("tagging result: gold id out of range at " + std::to_string(i));
    if (predicted[i] < -1 || predicted[i] >= n) {
      throw ValueError("tagging result: predicted id out of range at " + std::to_string(i));
    }
  }
}

TaggingResult make_result(const TaggedCorpus& corpus, const std::vector<std::string>& labels,
                          const std::vector<std::vector<std::string>>& predicted) {
  if (predicted.size() != corpus.sentences.size()) {
    throw ValueError("make_result: " + std::to_string(predicted.size()) + " predicted sentences for " +
                     std::to_string(corpus.sentences.size()) + " corpus sentences");
  }
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) ids.emplace(labels[i], static_cast<int>(i));
  auto lookup = [&](const std::string& tag) {
    auto it = ids.find(tag);
    if (it == ids.end()) throw ValueError("make_result: tag '" + tag + "' is not in the label inventory");
    return it->second;
  };
  TaggingResult r;
  r.labels = labels;
  r.task = corpus.kind;
  r.sentence_starts.push_back(0);
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sent = corpus.sentences[s];
    for (std::size_t j = 0; j < sent.tags.size(); ++j) {
      r.gold.push_back(lookup(sent.tags[j]));
      const bool have = j < predicted[s].size() && !predicted[s][j].empty();
      r.predicted.push_back(have ? lookup(predicted[s][j]) : -1);
    }
    r.sentence_starts.push_back(r.gold.size());
  }
  return r;
}

TaggingResult make_result(const FeatureDataset& data, const std::vector<int>& predicted, TagKind task) {
  if (predicted.size() != data.size()) {
    throw ValueError("make_result: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(data.size()) + " rows");
  }
  TaggingResult r;
  r.labels = data.labels;
  r.gold = data.tags;
  r.predicted = predicted;
  r.sentence_starts = data.sentence_offsets();
  r.task = task;
  r.layer = data.layer;
  r.model_id = data.model_id;
  r.validate();
  return r;
}

double accuracy(const TaggingResult& result) {
  if (result.size() == 0) throw ValueError("accuracy: empty result");
  if (result.predicted.size() != result.gold.size()) throw ValueError("accuracy: misaligned result");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < result.size(); ++i) correct += result.predicted[i] == result.gold[i];
  return static_cast<double>(correct) / static_cast<double>(result.size());
}

namespace {

Prf prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf out;
  if (tp + fp > 0) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (out.precision + out.recall > 0) out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

int label_id(const TaggingResult& result, std::string_view tag) {
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    if (result.labels[i] == tag) return static_cast<int>(i);
  }
  throw ValueError("unknown tag '" + std::string(tag) + "'");
}

}  // namespace

Prf per_tag_f1(const TaggingResult& result, int tag) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < result.size(); ++i) {
    const bool g = result.gold[i] == tag;
    const bool p = result.predicted[i] == tag;
    tp += g && p;
    fp += !g && p;
    fn += g && !p;
  }
  return prf_from_counts(tp, fp, fn);
}

Prf per_tag_f1(const TaggingResult& result, std::string_view tag) { return per_tag_f1(result, label_id(result, tag)); }

TaggingResult coarse_collapse(const TaggingResult& fine, const TagSchema& schema) {
  if (fine.labels != schema.fine()) {
    throw ValueError("coarse_collapse: result labels are not the schema's fine inventory");
  }
  TaggingResult out = fine;
  out.labels = schema.coarse();
  for (std::size_t i = 0; i < fine.size(); ++i) {
    if (fine.gold[i] < 0 || static_cast<std::size_t>(fine.gold[i]) >= schema.fine_count()) {
      throw ValueError("coarse_collapse: unmapped gold id " + std::to_string(fine.gold[i]));
    }
    out.gold[i] = schema.coarse_of(fine.gold[i]);
    if (fine.predicted[i] >= 0) {
      if (static_cast<std::size_t>(fine.predicted[i]) >= schema.fine_count()) {
        throw ValueError("coarse_collapse: unmapped predicted id " + std::to_string(fine.predicted[i]));
      }
      out.predicted[i] = schema.coarse_of(fine.predicted[i]);
    }
  }
  return out;
}

double micro_f1_within_coarse(const TaggingResult& fine, const TagSchema& schema, std::string_view coarse_tag) {
  if (fine.labels != schema.fine()) {
    throw ValueError("micro_f1_within_coarse: result labels are not the schema's fine inventory");
  }
  const int coarse = schema.coarse_id(coarse_tag);
  std::vector<bool> member(schema.fine_count(), false);
  for (int f : schema.members(coarse)) member[static_cast<std::size_t>(f)] = true;
  // A token counts toward member tag t as TP if gold == pred == t, as FP for
  // pred == t != gold and as FN for gold == t != pred; summed over members.
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const int g = fine.gold[i];
    const int p = fine.predicted[i];
    const bool g_in = member[static_cast<std::size_t>(g)];
    const bool p_in = p >= 0 && member[static_cast<std::size_t>(p)];
    if (g == p) {
      tp += g_in;
    } else {
      fp += p_in;
      fn += g_in;
    }
  }
  return prf_from_counts(tp, fp, fn).f1;
}

double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.empty()) throw ValueError("bleu: empty hypothesis set");
  if (hypotheses.size() != references.size()) {
    throw ValueError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                     std::to_string(references.size()) + " references");
  }
  constexpr std::size_t N = 4;
  std::size_t matched[N] = {};
  std::size_t total[N] = {};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Sentence& h = hypotheses[s];
    const Sentence& r = references[s];
    hyp_len += h.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= N; ++n) {
      std::map<std::vector<std::string>, std::size_t> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[{r.begin() + i, r.begin() + i + n}];
      std::map<std::vector<std::string>, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[{h.begin() + i, h.begin() + i + n}];
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }
  double log_precision = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    if (matched[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  const double bp =
      hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_precision / N);
}

SignificanceReport approx_randomization(const TaggingResult& a, const TaggingResult& b, std::size_t shuffles,
                                        std::uint64_t seed, std::string system_a, std::string system_b) {
  a.validate();
  b.validate();
  if (a.gold != b.gold || a.sentence_starts != b.sentence_starts) {
    throw ValueError("approx_randomization: results are not aligned to the same gold tokens");
  }
  if (shuffles == 0) throw ValueError("approx_randomization: need at least one shuffle");
  if (a.size() == 0) throw ValueError("approx_randomization: empty results");

  // Work on per-sentence differences in correct counts; swapping a sentence
  // negates its difference. Integer arithmetic keeps ties exact.
  std::vector<long long> diff(a.sentence_count());
  long long observed = 0;
  for (std::size_t s = 0; s < diff.size(); ++s) {
    long long d = 0;
    for (std::size_t i = a.sentence_starts[s]; i < a.sentence_starts[s + 1]; ++i) {
      d += (a.predicted[i] == a.gold[i]) - (b.predicted[i] == b.gold[i]);
    }
    diff[s] = d;
    observed += d;
  }
  observed = std::llabs(observed);

  Rng rng(seed);
  std::size_t exceed = 0;
  for (std::size_t r = 0; r < shuffles; ++r) {
    long long total = 0;
    for (long long d : diff) total += (rng.next() >> 63) ? -d : d;
    exceed += std::llabs(total) >= observed;
  }

  SignificanceReport rep;
  rep.system_a = std::move(system_a);
  rep.system_b = std::move(system_b);
  rep.observed = static_cast<double>(observed) / static_cast<double>(a.size());
  rep.shuffles = shuffles;
  rep.exceed = exceed;
  rep.p_value = static_cast<double>(exceed + 1) / static_cast<double>(shuffles + 1);
  return rep;
}

std::vector<Disagreement> disagreement_report(const TaggingResult& a, const TaggingResult& b,
                                              const TaggedCorpus& corpus, const TagSchema* schema,
                                              std::optional<std::string> coarse_filter) {
  a.validate();
  b.validate();
  if (a.gold != b.gold || a.labels != b.labels || a.sentence_starts != b.sentence_starts) {
    throw ValueError("disagreement_report: results are not aligned");
  }
  if (a.sentence_count() != corpus.sentences.size()) {
    throw ValueError("disagreement_report: corpus does not match the results");
  }
  if (coarse_filter && !schema) throw ValueError("disagreement_report: a coarse filter needs a schema");

  auto coarse_of = [&](const std::string& label) -> std::string {
    if (schema->has_fine(label)) return schema->coarse_name_of(label);
    return label;
  };
  auto name = [&](int id) { return id < 0 ? std::string() : a.labels[static_cast<std::size_t>(id)]; };

  std::vector<Disagreement> out;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& tokens = corpus.sentences[s].tokens;
    const std::size_t start = a.sentence_starts[s];
    if (a.sentence_starts[s + 1] - start != tokens.size()) {
      throw ValueError("disagreement_report: sentence " + std::to_string(s) + " length mismatch");
    }
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const std::size_t i = start + j;
      const bool a_ok = a.predicted[i] == a.gold[i];
      const bool b_ok = b.predicted[i] == b.gold[i];
      if (a_ok == b_ok) continue;
      const std::string gold = name(a.gold[i]);
      if (coarse_filter && coarse_of(gold) != *coarse_filter) continue;
      Disagreement d;
      d.sentence = s;
      d.position = j;
      d.token = tokens[j];
      d.gold = gold;
      d.predicted_a = name(a.predicted[i]);
      d.predicted_b = name(b.predicted[i]);
      d.correct = b_ok ? "B" : "A";
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (k) d.context += ' ';
        d.context += k == j ? "[[" + tokens[k] + "]]" : tokens[k];
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::string disagreement_tsv(const std::vector<Disagreement>& report) {
  std::string out = "sentence\tposition\ttoken\tgold\tpredicted_a\tpredicted_b\tcorrect\tcontext\n";
  for (const auto& d : report) {
    out += std::to_string(d.sentence) + "\t" + std::to_string(d.position) + "\t" + d.token + "\t" + d.gold + "\t" +
           d.predicted_a + "\t" + d.predicted_b + "\t" + d.correct + "\t" + d.context + "\n";
  }
  return out;
}

}  // namespace nmtprobe
