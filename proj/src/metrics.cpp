#include "capnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "capnet/vocab.hpp"

namespace capnet {

using nlohmann::ordered_json;

namespace {

void require_order(std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram order must be >= 1");
}

std::size_t closest_reference_length(std::size_t c, std::span<const Tokens> references) {
  std::size_t best = references.front().size();
  for (const auto& r : references) {
    const auto d = [c](std::size_t len) { return len > c ? len - c : c - len; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

double brevity_penalty(std::size_t c, std::size_t r) {
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

std::size_t NGramProfile::total() const {
  std::size_t t = 0;
  for (const auto& [g, c] : counts) t += c;
  return t;
}

NGramProfile ngram_profile(std::span<const std::string> tokens, std::size_t n) {
  require_order(n);
  NGramProfile prof;
  prof.n = n;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++prof.counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return prof;
}

ClippedCount modified_precision(std::span<const std::string> candidate,
                                std::span<const Tokens> references, std::size_t n) {
  require_order(n);
  if (references.empty()) throw std::invalid_argument("modified_precision: no references");

  const auto cand = ngram_profile(candidate, n);
  std::map<Tokens, std::size_t> max_ref;
  for (const auto& ref : references) {
    for (const auto& [gram, count] : ngram_profile(ref, n).counts) {
      auto& m = max_ref[gram];
      m = std::max(m, count);
    }
  }
  ClippedCount out;
  for (const auto& [gram, count] : cand.counts) {
    out.total += count;
    auto it = max_ref.find(gram);
    if (it != max_ref.end()) out.clipped += std::min(count, it->second);
  }
  return out;
}

BleuReport sentence_bleu(std::span<const std::string> candidate, std::span<const Tokens> references,
                         std::size_t max_n) {
  require_order(max_n);
  if (references.empty()) throw std::invalid_argument("sentence_bleu: no references");

  BleuReport rep;
  rep.candidate_length = candidate.size();
  rep.reference_length = closest_reference_length(candidate.size(), references);
  if (candidate.empty()) {
    rep.degenerate = true;
    rep.precisions.assign(max_n, {});
    return rep;
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto pc = modified_precision(candidate, references, n);
    rep.precisions.push_back(pc);
    if (pc.total == 0) continue;
    ++rep.orders_used;
    if (pc.clipped == 0) {
      zero = true;
    } else {
      log_sum += std::log(static_cast<double>(pc.clipped) / static_cast<double>(pc.total));
    }
  }
  rep.brevity_penalty = brevity_penalty(rep.candidate_length, rep.reference_length);
  rep.score = zero ? 0.0
                   : rep.brevity_penalty * std::exp(log_sum / static_cast<double>(rep.orders_used));
  return rep;
}

std::vector<BleuReport> score_pairs_serial(std::span<const EvalPair> pairs, std::size_t max_n) {
  std::vector<BleuReport> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(sentence_bleu(p.candidate, p.references, max_n));
  return out;
}

std::vector<BleuReport> score_pairs(std::span<const EvalPair> pairs, std::size_t max_n) {
  require_order(max_n);
  for (const auto& p : pairs) {
    if (p.references.empty()) {
      throw std::invalid_argument("image " + std::to_string(p.image_id) + " has no references");
    }
  }
  std::vector<BleuReport> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = sentence_bleu(pairs[i].candidate, pairs[i].references, max_n);
  }
  return out;
}

double average_score(std::span<const BleuReport> reports) {
  if (reports.empty()) throw std::invalid_argument("cannot average zero BLEU reports");
  double sum = 0.0;
  for (const auto& r : reports) sum += r.score;
  return 100.0 * sum / static_cast<double>(reports.size());
}

double corpus_average_bleu(std::span<const EvalPair> pairs, std::size_t max_n) {
  if (pairs.empty()) throw std::invalid_argument("corpus_average_bleu: no pairs");
  const auto reports = score_pairs(pairs, max_n);
  return average_score(reports);
}

double pooled_corpus_bleu(std::span<const EvalPair> pairs, std::size_t max_n) {
  require_order(max_n);
  if (pairs.empty()) throw std::invalid_argument("pooled_corpus_bleu: no pairs");
  std::vector<ClippedCount> pooled(max_n);
  std::size_t c = 0, r = 0;
  for (const auto& p : pairs) {
    if (p.references.empty()) {
      throw std::invalid_argument("image " + std::to_string(p.image_id) + " has no references");
    }
    c += p.candidate.size();
    r += closest_reference_length(p.candidate.size(), p.references);
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto pc = modified_precision(p.candidate, p.references, n);
      pooled[n - 1].clipped += pc.clipped;
      pooled[n - 1].total += pc.total;
    }
  }
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  std::size_t used = 0;
  for (const auto& pc : pooled) {
    if (pc.total == 0) continue;
    if (pc.clipped == 0) return 0.0;
    ++used;
    log_sum += std::log(static_cast<double>(pc.clipped) / static_cast<double>(pc.total));
  }
  return 100.0 * brevity_penalty(c, r) * std::exp(log_sum / static_cast<double>(used));
}

std::vector<EvalPair> parse_eval_pairs(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text);
  std::vector<EvalPair> out;
  for (const auto& item : doc) {
    EvalPair p;
    p.image_id = item.at("image_id").get<ImageId>();
    p.candidate = tokenize(item.at("candidate").get<std::string>());
    for (const auto& ref : item.at("references")) p.references.push_back(tokenize(ref.get<std::string>()));
    out.push_back(std::move(p));
  }
  return out;
}

std::string bleu_report_json(std::span<const EvalPair> pairs, std::span<const BleuReport> reports,
                             const EvalSettings& settings) {
  ordered_json images = ordered_json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = reports[i];
    ordered_json prec = ordered_json::array();
    for (const auto& pc : r.precisions) prec.push_back({pc.clipped, pc.total});
    images.push_back({{"image_id", pairs[i].image_id},
                      {"bleu", 100.0 * r.score},
                      {"precisions", prec},
                      {"brevity_penalty", r.brevity_penalty},
                      {"candidate_length", r.candidate_length},
                      {"reference_length", r.reference_length},
                      {"orders_used", r.orders_used},
                      {"degenerate", r.degenerate}});
  }
  ordered_json aggregate = {{"images", pairs.size()},
                            {"average_bleu", reports.empty() ? 0.0 : average_score(reports)}};
  if (settings.pooled && !pairs.empty()) {
    aggregate["pooled_corpus_bleu"] = pooled_corpus_bleu(pairs, settings.max_n);
  }
  ordered_json doc = {{"settings",
                       {{"max_n", settings.max_n},
                        {"weights", "uniform over orders with nonzero denominator"},
                        {"brevity_penalty", "closest reference length, ties to shorter"},
                        {"smoothing", "none"}}},
                      {"images", images},
                      {"aggregate", aggregate}};
  return doc.dump(1) + "\n";
}

}  // namespace capnet
