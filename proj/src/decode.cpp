#include "capnet/decode.hpp"

#include <algorithm>
#include <exception>

namespace capnet {

namespace {

struct Beam {
  Hypothesis hyp;
  LstmState state;  // after consuming the last token
  Vector next;      // distribution over the following token
};

struct Candidate {
  std::size_t parent;
  Hypothesis hyp;
};

}  // namespace

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                      b.tokens.end());
}

double token_log_prob(const Vector& probs, TokenId token) {
  return -neg_log_likelihood(probs, token);
}

DecodeResult beam_search(const ModelParams& p, const Vector& feature, std::size_t beam_width,
                         std::size_t max_len) {
  if (beam_width == 0) throw ContractError("beam_search: beam width must be >= 1");
  if (max_len == 0) throw ContractError("beam_search: max_len must be >= 1");

  auto first = step_probabilities(p, image_state(p, feature), kStartId);
  std::vector<Beam> pool;
  pool.push_back({{}, std::move(first.state), std::move(first.probs)});

  const auto V = static_cast<TokenId>(p.dims.vocab);
  for (std::size_t step = 1; step <= max_len; ++step) {
    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < pool.size(); ++b) {
      const auto& beam = pool[b];
      if (beam.hyp.finished) {
        cands.push_back({b, beam.hyp});
        continue;
      }
      for (TokenId v = 0; v < V; ++v) {
        Candidate c{b, beam.hyp};
        c.hyp.tokens.push_back(v);
        c.hyp.log_prob += token_log_prob(beam.next, v);
        c.hyp.finished = v == kStopId;
        cands.push_back(std::move(c));
      }
    }

    const auto keep = std::min(beam_width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) { return ranks_before(a.hyp, b.hyp); });
    cands.resize(keep);

    std::vector<Beam> next_pool;
    next_pool.reserve(keep);
    bool all_finished = true;
    for (auto& c : cands) {
      const auto& parent = pool[c.parent];
      if (c.hyp.finished || step == max_len) {
        // Frozen or out of budget: no further state needed.
        all_finished = all_finished && c.hyp.finished;
        next_pool.push_back({std::move(c.hyp), {}, {}});
        continue;
      }
      all_finished = false;
      auto out = step_probabilities(p, parent.state, c.hyp.tokens.back());
      next_pool.push_back({std::move(c.hyp), std::move(out.state), std::move(out.probs)});
    }
    pool = std::move(next_pool);
    if (all_finished) break;
  }

  DecodeResult result;
  for (auto& b : pool) result.ranked.push_back(std::move(b.hyp));
  std::sort(result.ranked.begin(), result.ranked.end(), ranks_before);
  return result;
}

DecodeResult greedy_decode(const ModelParams& p, const Vector& feature, std::size_t max_len) {
  return beam_search(p, feature, 1, max_len);
}

std::map<ImageId, DecodeResult> caption_batch_serial(const ModelParams& p, const FeatureTable& features,
                                                     std::size_t beam_width, std::size_t max_len) {
  std::map<ImageId, DecodeResult> out;
  for (const auto& [id, f] : features) out.emplace(id, beam_search(p, f, beam_width, max_len));
  return out;
}

std::map<ImageId, DecodeResult> caption_batch(const ModelParams& p, const FeatureTable& features,
                                              std::size_t beam_width, std::size_t max_len) {
  std::vector<std::pair<ImageId, const Vector*>> rows;
  for (const auto& [id, f] : features) rows.emplace_back(id, &f);
  std::vector<DecodeResult> results(rows.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      results[i] = beam_search(p, *rows[i].second, beam_width, max_len);
    } catch (...) {
#pragma omp critical(capnet_caption_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::map<ImageId, DecodeResult> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.emplace(rows[i].first, std::move(results[i]));
  return out;
}

}  // namespace capnet
