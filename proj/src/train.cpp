#include "capnet/train.hpp"

#include <charconv>
#include <cmath>
#include <exception>
#include <sstream>

#include "capnet/random.hpp"

namespace capnet {

namespace {

struct ExampleGradient {
  ModelParams grad;
  double loss = 0.0;
};

ExampleGradient example_gradient(const ModelParams& p, const CaptionedExample& ex) {
  const auto trace = forward_caption(p, ex.feature, ex.caption_ids);
  return {backward(p, trace), trace.loss};
}

BatchGradient reduce_in_order(const ModelParams& p, std::span<const CaptionedExample> examples,
                              std::span<const std::size_t> indices,
                              std::vector<ExampleGradient>& parts) {
  BatchGradient out{ModelParams::zeros(p.dims), std::vector<double>(indices.size()), 0};
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.grad.add(parts[k].grad);
    out.losses[k] = parts[k].loss;
    out.predictions += examples[indices[k]].caption_ids.size() - 1;
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

BatchGradient batch_gradient_serial(const ModelParams& p, std::span<const CaptionedExample> examples,
                                    std::span<const std::size_t> indices) {
  BatchGradient out{ModelParams::zeros(p.dims), std::vector<double>(indices.size()), 0};
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& ex = examples[indices[k]];
    auto part = example_gradient(p, ex);
    out.grad.add(part.grad);
    out.losses[k] = part.loss;
    out.predictions += ex.caption_ids.size() - 1;
  }
  return out;
}

BatchGradient batch_gradient(const ModelParams& p, std::span<const CaptionedExample> examples,
                             std::span<const std::size_t> indices) {
  std::vector<ExampleGradient> parts(indices.size());
  const auto n = static_cast<std::ptrdiff_t>(indices.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      parts[k] = example_gradient(p, examples[indices[k]]);
    } catch (...) {
#pragma omp critical(capnet_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return reduce_in_order(p, examples, indices, parts);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
    throw std::invalid_argument("grad_clip_norm must be > 0 when set");
  }
}

OptimizerState OptimizerState::fresh(OptimizerKind kind, const Dims& dims) {
  OptimizerState s;
  s.kind = kind;
  if (kind == OptimizerKind::kAdam) {
    s.m = ModelParams::zeros(dims);
    s.v = ModelParams::zeros(dims);
  }
  return s;
}

double global_norm(const ModelParams& grads) {
  double sq = 0.0;
  for (auto t : grads.tensors()) {
    for (double g : t) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(ModelParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

void optimizer_step(ModelParams& params, ModelParams grads, OptimizerState& state,
                    const TrainConfig& config) {
  if (config.grad_clip_norm) clip_global_norm(grads, *config.grad_clip_norm);
  ++state.step;
  auto theta = params.views();
  const auto g = grads.tensors();
  const double lr = config.learning_rate;

  if (state.kind == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
      for (std::size_t i = 0; i < theta[k].values.size(); ++i) theta[k].values[i] -= lr * g[k][i];
    }
    return;
  }

  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);
  auto m = state.m.views();
  auto v = state.v.views();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].values.size(); ++i) {
      const double gi = g[k][i];
      double& mi = m[k].values[i];
      double& vi = v[k].values[i];
      mi = b1 * mi + (1.0 - b1) * gi;
      vi = b2 * vi + (1.0 - b2) * gi * gi;
      const double mhat = mi / bias1;
      const double vhat = vi / bias2;
      theta[k].values[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_epsilon);
    }
  }
}

std::vector<EpochRecord> train(TrainState& state, std::span<const CaptionedExample> examples,
                               const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (examples.empty()) throw std::invalid_argument("train: dataset is empty");
  for (const auto& ex : examples) {
    if (ex.feature.size() != state.params.dims.image) {
      throw ShapeError("train: example for image " + std::to_string(ex.image_id) +
                       " has feature length " + std::to_string(ex.feature.size()) +
                       ", model expects D=" + std::to_string(state.params.dims.image));
    }
  }
  if (state.optimizer.kind != config.optimizer) {
    throw std::invalid_argument("train: optimizer state does not match configured optimizer");
  }

  std::vector<EpochRecord> history;
  std::vector<double> losses(examples.size());
  for (std::size_t epoch = state.epoch + 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(examples.size(), config.batch_size,
                                      derive_seed(config.seed, epoch));
    std::size_t predictions = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      auto bg = batch_gradient(state.params, examples, batch);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        if (!std::isfinite(bg.losses[k])) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", batch " << b + 1 << "/"
              << batches.size() << " (image " << examples[batch[k]].image_id
              << "); parameter norms:";
          for (auto& view : state.params.views()) {
            double sq = 0.0;
            for (double x : view.values) sq += x * x;
            msg << ' ' << view.name << '=' << std::sqrt(sq);
          }
          throw NonFiniteLossError(msg.str());
        }
        losses[batch[k]] = bg.losses[k];
      }
      predictions += bg.predictions;
      bg.grad.scale(1.0 / static_cast<double>(batch.size()));
      optimizer_step(state.params, std::move(bg.grad), state.optimizer, config);
    }
    double total = 0.0;
    for (double l : losses) total += l;  // index order, independent of shuffling
    state.epoch = epoch;
    EpochRecord rec{epoch, total / static_cast<double>(predictions)};
    history.push_back(rec);
    if (on_epoch) on_epoch(state, rec);
  }
  return history;
}

std::vector<EpochRecord> train(ModelParams& params, std::span<const CaptionedExample> examples,
                               const TrainConfig& config) {
  const Dims dims = params.dims;
  TrainState state{std::move(params), OptimizerState::fresh(config.optimizer, dims), 0};
  auto history = train(state, examples, config);
  params = std::move(state.params);
  return history;
}

std::string loss_history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,mean_per_token_loss\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.mean_loss) + "\n";
  }
  return out;
}

}  // namespace capnet
