#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "capnet/data_io.hpp"

namespace capnet {

using Tokens = std::vector<std::string>;

struct NGramProfile {
  std::size_t n = 1;
  std::map<Tokens, std::size_t> counts;

  std::size_t total() const;
};

NGramProfile ngram_profile(std::span<const std::string> tokens, std::size_t n);

/// Exact ratio clipped / total.
struct ClippedCount {
  std::size_t clipped = 0;
  std::size_t total = 0;

  friend bool operator==(const ClippedCount&, const ClippedCount&) = default;
};

/// Clipped n-gram matches: each candidate n-gram type counts at most as often
/// as it appears in the single most generous reference.
ClippedCount modified_precision(std::span<const std::string> candidate,
                                std::span<const Tokens> references, std::size_t n);

struct BleuReport {
  std::vector<ClippedCount> precisions;  // index n-1
  std::size_t orders_used = 0;           // orders with a nonzero denominator
  double brevity_penalty = 0.0;
  double score = 0.0;  // in [0, 1]
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length, ties to shorter
  bool degenerate = false;           // empty candidate

  friend bool operator==(const BleuReport&, const BleuReport&) = default;
};

/// BLEU without smoothing: BP * exp(mean of ln p_n over the orders whose
/// denominator is nonzero). Any zero clipped count gives 0.
BleuReport sentence_bleu(std::span<const std::string> candidate, std::span<const Tokens> references,
                         std::size_t max_n = 4);

struct EvalPair {
  ImageId image_id = 0;
  Tokens candidate;
  std::vector<Tokens> references;
};

std::vector<BleuReport> score_pairs_serial(std::span<const EvalPair> pairs, std::size_t max_n = 4);
/// OpenMP over pairs; same reports as the serial path.
std::vector<BleuReport> score_pairs(std::span<const EvalPair> pairs, std::size_t max_n = 4);

/// Mean of sentence scores in input order, on a 0-100 scale.
double corpus_average_bleu(std::span<const EvalPair> pairs, std::size_t max_n = 4);
double average_score(std::span<const BleuReport> reports);

/// Canonical corpus BLEU from pooled n-gram counts and lengths (0-100).
double pooled_corpus_bleu(std::span<const EvalPair> pairs, std::size_t max_n = 4);

// ---- JSON surfaces ------------------------------------------------------------

/// [{"image_id": int, "candidate": string, "references": [string]}], tokenized
/// with the vocabulary tokenizer.
std::vector<EvalPair> parse_eval_pairs(std::string_view json_text);

struct EvalSettings {
  std::size_t max_n = 4;
  bool pooled = false;
};

/// {"settings": ..., "images": [per-image reports], "aggregate": {...}}
std::string bleu_report_json(std::span<const EvalPair> pairs, std::span<const BleuReport> reports,
                             const EvalSettings& settings);

}  // namespace capnet
