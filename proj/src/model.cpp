#include "capnet/model.hpp"

#include <cmath>

#include "capnet/random.hpp"

namespace capnet {

namespace {

void check_dims(const Dims& d) {
  if (d.image == 0 || d.embed == 0 || d.hidden == 0 || d.vocab == 0) {
    throw ShapeError("model dims must all be >= 1, got " + d.to_string());
  }
}

// Fills the gate activations, c, tanh(c) and h of `sc` from x, h_prev, c_prev.
void lstm_forward(const ModelParams& p, StepCache& sc) {
  if (sc.x.size() != p.dims.embed) {
    throw ShapeError("lstm_step: input length " + std::to_string(sc.x.size()) +
                     ", expected E=" + std::to_string(p.dims.embed));
  }
  if (sc.h_prev.size() != p.dims.hidden || sc.c_prev.size() != p.dims.hidden) {
    throw ShapeError("lstm_step: state length mismatch, expected H=" +
                     std::to_string(p.dims.hidden));
  }
  for (std::size_t k = 0; k < kNumGates; ++k) {
    const auto& g = p.gates[k];
    Vector pre = matmul(g.input, sc.x);
    add_inplace(pre, matmul(g.recurrent, sc.h_prev));
    add_inplace(pre, g.bias);
    sc.act[k] = k == kCandidateGate ? tanh(pre) : sigmoid(pre);
  }
  sc.c = add(hadamard(sc.act[kForgetGate], sc.c_prev),
             hadamard(sc.act[kInputGate], sc.act[kCandidateGate]));
  sc.tanh_c = tanh(sc.c);
  sc.h = hadamard(sc.act[kOutputGate], sc.tanh_c);
}

Vector output_probs(const ModelParams& p, const Vector& h) {
  Vector logits = matmul(p.out_w, h);
  add_inplace(logits, p.out_b);
  return softmax(logits);
}

const Vector& embedding_row(const ModelParams& p, TokenId id, Vector& scratch) {
  if (id >= p.dims.vocab) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(p.dims.vocab));
  }
  const auto row = p.embedding.row(id);
  scratch = Vector(std::vector<double>(row.begin(), row.end()));
  return scratch;
}

}  // namespace

std::string Dims::to_string() const {
  return "D=" + std::to_string(image) + " E=" + std::to_string(embed) +
         " H=" + std::to_string(hidden) + " V=" + std::to_string(vocab);
}

ModelParams ModelParams::zeros(const Dims& d) {
  check_dims(d);
  ModelParams p;
  p.dims = d;
  p.image_w = Matrix(d.embed, d.image);
  p.image_b = Vector(d.embed);
  p.embedding = Matrix(d.vocab, d.embed);
  for (auto& g : p.gates) {
    g.input = Matrix(d.hidden, d.embed);
    g.recurrent = Matrix(d.hidden, d.hidden);
    g.bias = Vector(d.hidden);
  }
  p.out_w = Matrix(d.vocab, d.hidden);
  p.out_b = Vector(d.vocab);
  return p;
}

std::vector<ParamView> ModelParams::views() {
  static constexpr const char* kGateNames[kNumGates] = {"input", "forget", "output", "candidate"};
  std::vector<ParamView> v;
  v.push_back({"image_w", image_w.span()});
  v.push_back({"image_b", image_b.span()});
  v.push_back({"embedding", embedding.span()});
  for (std::size_t k = 0; k < kNumGates; ++k) {
    const std::string base = std::string("lstm.") + kGateNames[k];
    v.push_back({base + ".W", gates[k].input.span()});
    v.push_back({base + ".U", gates[k].recurrent.span()});
    v.push_back({base + ".b", gates[k].bias.span()});
  }
  v.push_back({"out_w", out_w.span()});
  v.push_back({"out_b", out_b.span()});
  return v;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  auto& self = const_cast<ModelParams&>(*this);
  std::vector<std::span<const double>> out;
  for (auto& view : self.views()) out.emplace_back(view.values);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

void ModelParams::scale(double factor) {
  for (auto& view : views()) {
    for (auto& x : view.values) x *= factor;
  }
}

void ModelParams::add(const ModelParams& other) {
  if (!(dims == other.dims)) throw ShapeError("ModelParams::add: " + dims.to_string() + " vs " + other.dims.to_string());
  auto dst = views();
  const auto src = other.tensors();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    for (std::size_t i = 0; i < dst[k].values.size(); ++i) dst[k].values[i] += src[k][i];
  }
}

ModelParams init_params(const Dims& dims, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(dims);
  Rng rng(seed);
  auto fill_uniform = [&](Matrix& m) {
    const double r = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (auto& x : m.span()) x = rng.uniform(-r, r);
  };
  fill_uniform(p.image_w);
  fill_uniform(p.embedding);
  for (auto& g : p.gates) {
    fill_uniform(g.input);
    fill_uniform(g.recurrent);
  }
  fill_uniform(p.out_w);
  p.gates[kForgetGate].bias.fill(1.0);
  return p;
}

Vector encode_image(const ModelParams& p, const Vector& feature) {
  if (feature.size() != p.dims.image) {
    throw ShapeError("encode_image: feature length " + std::to_string(feature.size()) +
                     ", expected D=" + std::to_string(p.dims.image));
  }
  Vector e = matmul(p.image_w, feature);
  add_inplace(e, p.image_b);
  return e;
}

LstmState lstm_step(const ModelParams& p, const LstmState& s, const Vector& x) {
  StepCache sc;
  sc.x = x;
  sc.h_prev = s.h;
  sc.c_prev = s.c;
  lstm_forward(p, sc);
  return {std::move(sc.h), std::move(sc.c)};
}

ForwardTrace forward_caption(const ModelParams& p, const Vector& feature,
                             std::span<const TokenId> ids) {
  if (ids.size() < 2 || ids.front() != kStartId || ids.back() != kStopId) {
    throw ContractError("forward_caption: caption must be framed as START ... STOP");
  }
  ForwardTrace trace;
  trace.feature = feature;
  trace.steps.reserve(ids.size());

  StepCache img;
  img.image_step = true;
  img.x = encode_image(p, feature);
  img.h_prev = Vector(p.dims.hidden);
  img.c_prev = Vector(p.dims.hidden);
  lstm_forward(p, img);
  trace.steps.push_back(std::move(img));

  Vector scratch;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
    const StepCache& prev = trace.steps.back();
    StepCache sc;
    sc.input = ids[t];
    sc.target = ids[t + 1];
    if (sc.target >= p.dims.vocab) {
      throw IndexError("target id " + std::to_string(sc.target) + " outside vocabulary of size " +
                       std::to_string(p.dims.vocab));
    }
    sc.x = embedding_row(p, ids[t], scratch);
    sc.h_prev = prev.h;
    sc.c_prev = prev.c;
    lstm_forward(p, sc);
    sc.probs = output_probs(p, sc.h);
    trace.loss += neg_log_likelihood(sc.probs, sc.target);
    trace.steps.push_back(std::move(sc));
  }
  trace.predictions = ids.size() - 1;
  return trace;
}

double caption_loss(const ModelParams& p, const Vector& feature, std::span<const TokenId> ids) {
  return forward_caption(p, feature, ids).loss;
}

ModelParams backward(const ModelParams& p, const ForwardTrace& trace) {
  ModelParams grad = ModelParams::zeros(p.dims);
  const std::size_t H = p.dims.hidden;
  Vector dh_next(H);
  Vector dc_next(H);

  for (std::size_t s = trace.steps.size(); s-- > 0;) {
    const StepCache& sc = trace.steps[s];
    Vector dh = dh_next;

    if (!sc.image_step) {
      // d(-log p_target)/dlogits = p - onehot, zero when the floor clipped p.
      Vector dlogits = sc.probs;
      if (sc.probs[sc.target] >= kProbFloor) {
        dlogits[sc.target] -= 1.0;
      } else {
        dlogits.fill(0.0);
      }
      add_outer(grad.out_w, dlogits, sc.h);
      add_inplace(grad.out_b, dlogits);
      add_inplace(dh, matmul_transposed(p.out_w, dlogits));
    }

    const auto& i = sc.act[kInputGate];
    const auto& f = sc.act[kForgetGate];
    const auto& o = sc.act[kOutputGate];
    const auto& g = sc.act[kCandidateGate];

    std::array<Vector, kNumGates> dpre;
    for (auto& v : dpre) v = Vector(H);
    Vector dc(H);
    for (std::size_t j = 0; j < H; ++j) {
      const double d_o = dh[j] * sc.tanh_c[j];
      dc[j] = dh[j] * o[j] * (1.0 - sc.tanh_c[j] * sc.tanh_c[j]) + dc_next[j];
      const double d_i = dc[j] * g[j];
      const double d_g = dc[j] * i[j];
      const double d_f = dc[j] * sc.c_prev[j];
      dpre[kInputGate][j] = d_i * i[j] * (1.0 - i[j]);
      dpre[kForgetGate][j] = d_f * f[j] * (1.0 - f[j]);
      dpre[kOutputGate][j] = d_o * o[j] * (1.0 - o[j]);
      dpre[kCandidateGate][j] = d_g * (1.0 - g[j] * g[j]);
      dc_next[j] = dc[j] * f[j];
    }

    Vector dx(p.dims.embed);
    dh_next = Vector(H);
    for (std::size_t k = 0; k < kNumGates; ++k) {
      add_outer(grad.gates[k].input, dpre[k], sc.x);
      add_outer(grad.gates[k].recurrent, dpre[k], sc.h_prev);
      add_inplace(grad.gates[k].bias, dpre[k]);
      add_inplace(dx, matmul_transposed(p.gates[k].input, dpre[k]));
      add_inplace(dh_next, matmul_transposed(p.gates[k].recurrent, dpre[k]));
    }

    if (sc.image_step) {
      add_outer(grad.image_w, dx, trace.feature);
      add_inplace(grad.image_b, dx);
    } else {
      auto row = grad.embedding.row(sc.input);
      for (std::size_t e = 0; e < row.size(); ++e) row[e] += dx[e];
    }
  }
  return grad;
}

StepOutput step_probabilities(const ModelParams& p, const LstmState& s, const StepInput& input) {
  StepCache sc;
  Vector scratch;
  if (const auto* img = std::get_if<ImageInput>(&input)) {
    sc.x = img->embedding;
  } else {
    sc.x = embedding_row(p, std::get<TokenId>(input), scratch);
  }
  sc.h_prev = s.h;
  sc.c_prev = s.c;
  lstm_forward(p, sc);
  Vector probs = output_probs(p, sc.h);
  return {std::move(probs), {std::move(sc.h), std::move(sc.c)}};
}

LstmState image_state(const ModelParams& p, const Vector& feature) {
  return lstm_step(p, LstmState::zeros(p.dims.hidden), encode_image(p, feature));
}

}  // namespace capnet
