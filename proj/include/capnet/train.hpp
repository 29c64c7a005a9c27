#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "capnet/data_io.hpp"
#include "capnet/model.hpp"

namespace capnet {

// ---- batch gradient kernels -------------------------------------------------

struct BatchGradient {
  ModelParams grad;             // summed over the batch, in index order
  std::vector<double> losses;   // per entry of `indices`
  std::size_t predictions = 0;  // predicted tokens in the batch
};

/// Reference implementation: one example after another.
BatchGradient batch_gradient_serial(const ModelParams& p, std::span<const CaptionedExample> examples,
                                    std::span<const std::size_t> indices);

/// OpenMP over examples, followed by the same in-order reduction as the serial
/// path, so the result is bit-identical for any thread count.
BatchGradient batch_gradient(const ModelParams& p, std::span<const CaptionedExample> examples,
                             std::span<const std::size_t> indices);

// ---- optimizer ---------------------------------------------------------------

enum class OptimizerKind : std::uint32_t { kSgd = 0, kAdam = 1 };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::optional<double> grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: only at the end

  void validate() const;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  std::uint64_t step = 0;
  ModelParams m;  // Adam only
  ModelParams v;  // Adam only

  static OptimizerState fresh(OptimizerKind kind, const Dims& dims);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

double global_norm(const ModelParams& grads);

/// Rescales grads to `max_norm` when their global norm exceeds it; returns the
/// norm before clipping.
double clip_global_norm(ModelParams& grads, double max_norm);

/// Clips (if configured) then applies one SGD or Adam update.
void optimizer_step(ModelParams& params, ModelParams grads, OptimizerState& state,
                    const TrainConfig& config);

// ---- training loop -----------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0; // per predicted token

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainState {
  ModelParams params;
  OptimizerState optimizer;
  std::size_t epoch = 0;  // epochs completed
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called after every epoch with the post-epoch state.
using EpochCallback = std::function<void(const TrainState&, const EpochRecord&)>;

/// Runs epochs state.epoch+1 .. config.epochs. Batch order for epoch e depends
/// only on (seed, e), so resuming from a saved state reproduces the
/// uninterrupted run exactly.
std::vector<EpochRecord> train(TrainState& state, std::span<const CaptionedExample> examples,
                               const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Fresh-start convenience wrapper.
std::vector<EpochRecord> train(ModelParams& params, std::span<const CaptionedExample> examples,
                               const TrainConfig& config);

std::string loss_history_csv(std::span<const EpochRecord> history);

}  // namespace capnet
