#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "capnet/data_io.hpp"
#include "capnet/model.hpp"

namespace capnet {

/// A caption candidate. `tokens` start after START and end with STOP iff finished.
struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  bool finished = false;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

/// Higher log-probability first; equal scores fall back to lexicographic token order.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);

/// ln of a step probability, with the same floor the training loss uses.
double token_log_prob(const Vector& probs, TokenId token);

struct DecodeResult {
  std::vector<Hypothesis> ranked;  // best first

  const Hypothesis& best() const { return ranked.front(); }
};

/// Beam search over raw joint log-probability. Finished hypotheses stay in the
/// K-sized pool and compete with fresh expansions; the search ends once all
/// survivors have emitted STOP or after `max_len` word steps.
DecodeResult beam_search(const ModelParams& p, const Vector& feature, std::size_t beam_width,
                         std::size_t max_len);

DecodeResult greedy_decode(const ModelParams& p, const Vector& feature, std::size_t max_len);

std::map<ImageId, DecodeResult> caption_batch_serial(const ModelParams& p, const FeatureTable& features,
                                                     std::size_t beam_width, std::size_t max_len);

/// Images decoded in parallel; same results as the serial path.
std::map<ImageId, DecodeResult> caption_batch(const ModelParams& p, const FeatureTable& features,
                                              std::size_t beam_width, std::size_t max_len);

}  // namespace capnet
