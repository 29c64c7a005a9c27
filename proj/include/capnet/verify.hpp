#pragma once

#include <cstdint>
#include <vector>

#include "capnet/decode.hpp"
#include "capnet/gradcheck.hpp"
#include "capnet/model.hpp"

namespace capnet::verify {

struct InstanceLimits {
  std::size_t max_vocab = 12;
  std::size_t max_hidden = 8;
  std::size_t max_embed = 8;
  std::size_t max_image = 6;
  std::size_t max_caption = 5;  // ids including START and STOP
};

struct GradInstance {
  ModelParams params;
  Vector feature;
  std::vector<TokenId> ids;
};

/// Random dims within `limits`, weights uniform in [-scale, scale] (biases
/// included), feature entries in [-1, 1], random caption framed START..STOP.
GradInstance random_instance(std::uint64_t seed, const InstanceLimits& limits = {},
                             double scale = 0.5);

ModelParams random_model(const Dims& dims, std::uint64_t seed, double scale);
Vector random_feature(std::size_t dim, std::uint64_t seed);

/// The caption loss recomputed from scratch in long double. Used for finite
/// differences: in double, L(θ+ε) − L(θ−ε) is quantized to ulp(L), which at
/// ε = 1e-5 swamps gradients smaller than about 1e-7.
long double caption_loss_extended(const ModelParams& p, const Vector& feature,
                                  const std::vector<TokenId>& ids);

enum class LossPrecision { kDouble, kExtended };

/// Analytic BPTT gradient (optionally multiplied by `corrupt_factor`) against
/// central differences of the caption loss.
GradCheckReport check_model_gradients(const GradInstance& inst, double epsilon, double tolerance,
                                      double corrupt_factor = 1.0,
                                      LossPrecision precision = LossPrecision::kExtended);

/// Every caption reachable within `max_len` word steps (STOP-terminated, or
/// exactly `max_len` tokens without STOP), scored by replaying
/// step_probabilities, ranked best first with the beam tie-break.
std::vector<Hypothesis> exhaustive_decode(const ModelParams& p, const Vector& feature,
                                          std::size_t max_len);

/// Sum of per-step log-probabilities of `tokens` after image and START.
double replay_log_prob(const ModelParams& p, const Vector& feature,
                       const std::vector<TokenId>& tokens);

}  // namespace capnet::verify
