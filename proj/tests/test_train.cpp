#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "capnet/train.hpp"
#include "capnet/verify.hpp"

using namespace capnet;

namespace {

struct Corpus {
  Vocabulary vocab;
  std::vector<CaptionedExample> examples;
};

Corpus synthetic_corpus(std::size_t images, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_images = images;
  spec.seed = seed;
  const auto ds = generate_synthetic(spec);
  std::vector<std::string> caps;
  for (const auto& a : ds.annotations) caps.push_back(a.caption);
  auto vocab = Vocabulary::build(caps, 1);
  auto examples = build_examples(ds.annotations, ds.features, vocab);
  return {std::move(vocab), std::move(examples)};
}

}  // namespace

TEST_CASE("SGD step arithmetic") {
  const Dims dims{2, 2, 2, 4};
  auto p = verify::random_model(dims, 1, 0.5);
  const auto before = p;
  auto g = verify::random_model(dims, 2, 0.5);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.learning_rate = 0.1;
  cfg.grad_clip_norm.reset();
  auto st = OptimizerState::fresh(OptimizerKind::kSgd, dims);
  optimizer_step(p, g, st, cfg);
  CHECK(st.step == 1);
  const auto pv = p.tensors();
  const auto bv = before.tensors();
  const auto gv = g.tensors();
  for (std::size_t k = 0; k < pv.size(); ++k) {
    for (std::size_t i = 0; i < pv[k].size(); ++i) CHECK(pv[k][i] == bv[k][i] - 0.1 * gv[k][i]);
  }
}

TEST_CASE("first Adam step moves each parameter by about the learning rate") {
  const Dims dims{2, 2, 2, 4};
  auto p = ModelParams::zeros(dims);
  auto g = verify::random_model(dims, 3, 1.0);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.grad_clip_norm.reset();
  auto st = OptimizerState::fresh(OptimizerKind::kAdam, dims);
  optimizer_step(p, g, st, cfg);
  const auto pv = p.tensors();
  const auto gv = g.tensors();
  for (std::size_t k = 0; k < pv.size(); ++k) {
    for (std::size_t i = 0; i < pv[k].size(); ++i) {
      if (std::abs(gv[k][i]) < 1e-3) continue;
      CHECK(std::abs(std::abs(pv[k][i]) - 1e-3) < 1e-6);
      CHECK(pv[k][i] * gv[k][i] < 0.0);
    }
  }
}

TEST_CASE("global norm clipping") {
  const Dims dims{1, 1, 1, 3};
  auto g = ModelParams::zeros(dims);
  g.out_b[0] = 30.0;
  g.out_b[1] = 40.0;
  CHECK(global_norm(g) == 50.0);
  CHECK(clip_global_norm(g, 5.0) == 50.0);
  CHECK(g.out_b[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(g.out_b[1] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(global_norm(g) == doctest::Approx(5.0).epsilon(1e-15));

  auto small = ModelParams::zeros(dims);
  small.out_b[2] = 1.0;
  const auto copy = small;
  clip_global_norm(small, 5.0);
  CHECK(small == copy);

  // Clipping inside optimizer_step: a norm-50 gradient becomes a tenth of itself.
  auto p = ModelParams::zeros(dims);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.learning_rate = 1.0;
  auto st = OptimizerState::fresh(OptimizerKind::kSgd, dims);
  auto big = ModelParams::zeros(dims);
  big.out_b[0] = 30.0;
  big.out_b[1] = 40.0;
  optimizer_step(p, big, st, cfg);
  CHECK(p.out_b[0] == doctest::Approx(-3.0));
  CHECK(p.out_b[1] == doctest::Approx(-4.0));
}

TEST_CASE("zero learning rate leaves parameters unchanged and loss constant") {
  const auto corpus = synthetic_corpus(6, 1);
  auto p = init_params({8, 6, 5, corpus.vocab.size()}, 9);
  const auto before = p;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  const auto hist = train(p, corpus.examples, cfg);
  CHECK(p == before);
  REQUIRE(hist.size() == 3);
  CHECK(hist[0].mean_loss == hist[1].mean_loss);
  CHECK(hist[1].mean_loss == hist[2].mean_loss);

  // The recorded loss is the mean per-token loss of the unchanged model.
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : corpus.examples) {
    total += caption_loss(before, ex.feature, ex.caption_ids);
    tokens += ex.caption_ids.size() - 1;
  }
  CHECK(hist[0].mean_loss == doctest::Approx(total / static_cast<double>(tokens)).epsilon(1e-12));
}

TEST_CASE("training is deterministic") {
  const auto corpus = synthetic_corpus(10, 2);
  const Dims dims{8, 6, 5, corpus.vocab.size()};
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  cfg.learning_rate = 1e-2;
  cfg.seed = 77;
  auto a = init_params(dims, 1);
  auto b = init_params(dims, 1);
  const auto ha = train(a, corpus.examples, cfg);
  const auto hb = train(b, corpus.examples, cfg);
  CHECK(a == b);
  CHECK(ha == hb);

  cfg.seed = 78;
  auto c = init_params(dims, 1);
  train(c, corpus.examples, cfg);
  CHECK_FALSE(a == c);
}

TEST_CASE("resuming from a mid-run state reproduces the uninterrupted run") {
  const auto corpus = synthetic_corpus(9, 3);
  const Dims dims{8, 5, 4, corpus.vocab.size()};
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.learning_rate = 5e-3;
  cfg.seed = 5;

  TrainState full{init_params(dims, 2), OptimizerState::fresh(cfg.optimizer, dims), 0};
  TrainState snapshot;
  const auto hist = train(full, corpus.examples, cfg, [&](const TrainState& s, const EpochRecord& r) {
    if (r.epoch == 3) snapshot = s;
  });

  REQUIRE(snapshot.epoch == 3);
  const auto tail = train(snapshot, corpus.examples, cfg);
  REQUIRE(tail.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(tail[k] == hist[k + 3]);
  CHECK(snapshot.params == full.params);
  CHECK(snapshot.optimizer == full.optimizer);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  const auto corpus = synthetic_corpus(4, 4);
  auto p = init_params({8, 4, 3, corpus.vocab.size()}, 3);
  p.out_w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(p, corpus.examples, cfg);
    FAIL("expected NonFiniteLossError");
  } catch (const NonFiniteLossError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch 1") != std::string::npos);
    CHECK(what.find("batch 1") != std::string::npos);
    CHECK(what.find("out_w=") != std::string::npos);
  }
}

TEST_CASE("loss trends down on a learnable set") {
  const auto corpus = synthetic_corpus(12, 5);
  auto p = init_params({8, 16, 16, corpus.vocab.size()}, 4);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-2;
  cfg.seed = 9;
  const auto hist = train(p, corpus.examples, cfg);
  REQUIRE(hist.size() == 40);
  auto quartile_min = [&](std::size_t q) {
    double m = hist[q * 10].mean_loss;
    for (std::size_t i = q * 10; i < q * 10 + 10; ++i) m = std::min(m, hist[i].mean_loss);
    return m;
  };
  for (std::size_t q = 0; q + 1 < 4; ++q) CHECK(quartile_min(q + 1) < quartile_min(q));
  for (const auto& r : hist) CHECK(std::isfinite(r.mean_loss));
}

TEST_CASE("config validation and mismatches") {
  const auto corpus = synthetic_corpus(4, 6);
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.grad_clip_norm = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  auto wrong = init_params({3, 4, 3, corpus.vocab.size()}, 1);
  CHECK_THROWS_AS(train(wrong, corpus.examples, TrainConfig{}), ShapeError);
}

TEST_CASE("loss history csv") {
  const std::vector<EpochRecord> hist = {{1, 2.5}, {2, 0.125}};
  CHECK(loss_history_csv(hist) == "epoch,mean_per_token_loss\n1,2.5\n2,0.125\n");
}
