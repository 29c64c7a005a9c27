#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "capnet/gradcheck.hpp"
#include "capnet/numeric.hpp"
#include "capnet/vocab.hpp"

namespace capnet {

struct Dims {
  std::size_t image = 0;   // D, feature length
  std::size_t embed = 0;   // E, shared by word embeddings and the image projection
  std::size_t hidden = 0;  // H
  std::size_t vocab = 0;   // V

  friend bool operator==(const Dims&, const Dims&) = default;
  std::string to_string() const;
};

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidateGate = 3 };
inline constexpr std::size_t kNumGates = 4;

struct GateWeights {
  Matrix input;      // H x E
  Matrix recurrent;  // H x H
  Vector bias;       // H

  friend bool operator==(const GateWeights&, const GateWeights&) = default;
};

/// Every trainable weight. Gradients use the same type.
struct ModelParams {
  Dims dims;
  Matrix image_w;  // E x D
  Vector image_b;  // E
  Matrix embedding;  // V x E
  std::array<GateWeights, kNumGates> gates;
  Matrix out_w;  // V x H
  Vector out_b;  // V

  static ModelParams zeros(const Dims& dims);

  /// Tensors in checkpoint order: image_w, image_b, embedding, then per gate
  /// (input, forget, output, candidate) W, U, b, then out_w, out_b.
  std::vector<ParamView> views();
  std::vector<std::span<const double>> tensors() const;

  std::size_t parameter_count() const;
  void scale(double factor);
  void add(const ModelParams& other);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per matrix (fan_in = columns),
/// zero biases except the forget gate at 1.0.
ModelParams init_params(const Dims& dims, std::uint64_t seed);

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden), Vector(hidden)}; }
  friend bool operator==(const LstmState&, const LstmState&) = default;
};

Vector encode_image(const ModelParams& p, const Vector& feature);

/// One standard LSTM step; the returned state's h is the cell output.
LstmState lstm_step(const ModelParams& p, const LstmState& s, const Vector& x);

struct StepCache {
  Vector x;
  Vector h_prev, c_prev;
  std::array<Vector, kNumGates> act;  // post-nonlinearity gate values
  Vector c, tanh_c, h;
  Vector probs;  // empty on the image step
  TokenId input = 0;
  TokenId target = 0;
  bool image_step = false;
};

struct ForwardTrace {
  Vector feature;
  std::vector<StepCache> steps;  // steps[0] is the image step
  double loss = 0.0;
  std::size_t predictions = 0;
};

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Teacher-forced pass: image embedding first (no loss), then each id but the
/// last predicts its successor. `ids` must be START ... STOP.
ForwardTrace forward_caption(const ModelParams& p, const Vector& feature,
                             std::span<const TokenId> ids);

double caption_loss(const ModelParams& p, const Vector& feature, std::span<const TokenId> ids);

/// BPTT over every word step and the image step.
ModelParams backward(const ModelParams& p, const ForwardTrace& trace);

struct ImageInput {
  Vector embedding;
};
using StepInput = std::variant<ImageInput, TokenId>;

struct StepOutput {
  Vector probs;
  LstmState state;
};

/// Single incremental step; no trace retained.
StepOutput step_probabilities(const ModelParams& p, const LstmState& s, const StepInput& input);

/// State after the image step, ready to consume START.
LstmState image_state(const ModelParams& p, const Vector& feature);

}  // namespace capnet
