#include "capnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "capnet/random.hpp"

namespace capnet::verify {

ModelParams random_model(const Dims& dims, std::uint64_t seed, double scale) {
  ModelParams p = ModelParams::zeros(dims);
  Rng rng(seed);
  for (auto& view : p.views()) {
    for (auto& x : view.values) x = rng.uniform(-scale, scale);
  }
  return p;
}

Vector random_feature(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Vector f(dim);
  for (auto& x : f) x = rng.uniform(-1.0, 1.0);
  return f;
}

GradInstance random_instance(std::uint64_t seed, const InstanceLimits& limits, double scale) {
  Rng rng(seed);
  Dims dims;
  dims.vocab = 3 + rng.below(limits.max_vocab - 2);  // reserved ids plus at least one word
  dims.hidden = 1 + rng.below(limits.max_hidden);
  dims.embed = 1 + rng.below(limits.max_embed);
  dims.image = 1 + rng.below(limits.max_image);

  GradInstance inst;
  inst.params = random_model(dims, rng.next(), scale);
  inst.feature = random_feature(dims.image, rng.next());
  const auto words = rng.below(limits.max_caption - 1);  // 0 .. max_caption-2
  inst.ids.push_back(kStartId);
  for (std::size_t i = 0; i < words; ++i) {
    // Any non-START, non-STOP id, UNK included.
    inst.ids.push_back(static_cast<TokenId>(2 + rng.below(dims.vocab - 2)));
  }
  inst.ids.push_back(kStopId);
  return inst;
}

namespace {

using Ext = long double;
using ExtVec = std::vector<Ext>;

ExtVec affine(const Matrix& w, const ExtVec& x, const Vector& b) {
  ExtVec out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    Ext acc = b[r];
    for (std::size_t c = 0; c < w.cols(); ++c) acc += static_cast<Ext>(w(r, c)) * x[c];
    out[r] = acc;
  }
  return out;
}

Ext sigmoid_ext(Ext x) { return Ext{1} / (Ext{1} + std::exp(-x)); }

}  // namespace

long double caption_loss_extended(const ModelParams& p, const Vector& feature,
                                  const std::vector<TokenId>& ids) {
  const std::size_t H = p.dims.hidden;
  ExtVec h(H, 0), c(H, 0);
  auto step = [&](const ExtVec& x) {
    ExtVec pre[kNumGates];
    for (std::size_t k = 0; k < kNumGates; ++k) {
      pre[k] = affine(p.gates[k].input, x, p.gates[k].bias);
      const auto r = affine(p.gates[k].recurrent, h, Vector(H));
      for (std::size_t j = 0; j < H; ++j) pre[k][j] += r[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      const Ext i = sigmoid_ext(pre[kInputGate][j]);
      const Ext f = sigmoid_ext(pre[kForgetGate][j]);
      const Ext o = sigmoid_ext(pre[kOutputGate][j]);
      const Ext g = std::tanh(pre[kCandidateGate][j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
  };

  step(affine(p.image_w, ExtVec(feature.begin(), feature.end()), p.image_b));
  Ext loss = 0;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
    ExtVec x(p.dims.embed);
    for (std::size_t e = 0; e < x.size(); ++e) x[e] = p.embedding(ids[t], e);
    step(x);
    const auto z = affine(p.out_w, h, p.out_b);
    const Ext mx = *std::max_element(z.begin(), z.end());
    Ext sum = 0;
    for (Ext v : z) sum += std::exp(v - mx);
    const Ext prob = std::exp(z[ids[t + 1]] - mx) / sum;
    loss -= std::log(std::max(prob, static_cast<Ext>(kProbFloor)));
  }
  return loss;
}

GradCheckReport check_model_gradients(const GradInstance& inst, double epsilon, double tolerance,
                                      double corrupt_factor, LossPrecision precision) {
  auto analytic = backward(inst.params, forward_caption(inst.params, inst.feature, inst.ids));
  if (corrupt_factor != 1.0) analytic.scale(corrupt_factor);
  if (precision == LossPrecision::kDouble) {
    auto loss = [&](const ModelParams& p) { return caption_loss(p, inst.feature, inst.ids); };
    return finite_difference_check(loss, inst.params, std::move(analytic), epsilon, tolerance);
  }
  auto loss = [&](const ModelParams& p) { return caption_loss_extended(p, inst.feature, inst.ids); };
  return finite_difference_check(loss, inst.params, std::move(analytic), epsilon, tolerance);
}

std::vector<Hypothesis> exhaustive_decode(const ModelParams& p, const Vector& feature,
                                          std::size_t max_len) {
  std::vector<Hypothesis> all;
  const auto start = step_probabilities(p, image_state(p, feature), kStartId);
  const auto V = static_cast<TokenId>(p.dims.vocab);

  std::vector<TokenId> prefix;
  std::function<void(const StepOutput&, double)> expand = [&](const StepOutput& at, double lp) {
    for (TokenId v = 0; v < V; ++v) {
      prefix.push_back(v);
      const double score = lp + token_log_prob(at.probs, v);
      if (v == kStopId) {
        all.push_back({prefix, score, true});
      } else if (prefix.size() == max_len) {
        all.push_back({prefix, score, false});
      } else {
        expand(step_probabilities(p, at.state, v), score);
      }
      prefix.pop_back();
    }
  };
  expand(start, 0.0);
  std::sort(all.begin(), all.end(), ranks_before);
  return all;
}

double replay_log_prob(const ModelParams& p, const Vector& feature,
                       const std::vector<TokenId>& tokens) {
  auto at = step_probabilities(p, image_state(p, feature), kStartId);
  double lp = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    lp += token_log_prob(at.probs, tokens[i]);
    if (i + 1 < tokens.size()) at = step_probabilities(p, at.state, tokens[i]);
  }
  return lp;
}

}  // namespace capnet::verify
