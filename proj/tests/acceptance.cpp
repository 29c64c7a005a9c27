// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <omp.h>

#include "capnet/checkpoint.hpp"
#include "capnet/commands.hpp"
#include "capnet/decode.hpp"
#include "capnet/metrics.hpp"
#include "capnet/random.hpp"
#include "capnet/reference_fixture.hpp"
#include "capnet/train.hpp"
#include "capnet/verify.hpp"
#include "capnet/vocab.hpp"

using namespace capnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::ostringstream line;
  line << (o.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(34) << name << std::fixed
       << std::setprecision(2) << std::right << std::setw(8) << s << " s  " << o.detail;
  std::cout << line.str() << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string num(double x, int digits = 3) {
  std::ostringstream ss;
  ss << std::setprecision(digits) << x;
  return ss.str();
}

// Independent greedy decoder: repeated argmax over step_probabilities.
std::vector<TokenId> argmax_walk(const ModelParams& p, const Vector& f, std::size_t max_len) {
  auto at = step_probabilities(p, image_state(p, f), kStartId);
  std::vector<TokenId> out;
  while (out.size() < max_len) {
    const auto best = static_cast<TokenId>(std::max_element(at.probs.begin(), at.probs.end()) -
                                           at.probs.begin());
    out.push_back(best);
    if (best == kStopId) break;
    at = step_probabilities(p, at.state, best);
  }
  return out;
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0, worst_double = 0.0;
  std::string where;
  bool pass = true;
  for (std::uint64_t i = 0; i < 25; ++i) {
    const auto inst = verify::random_instance(derive_seed(20240, i));
    const auto rep = verify::check_model_gradients(inst, 1e-5, 1e-4);
    worst_double = std::max(worst_double, verify::check_model_gradients(inst, 1e-5, 1e-4, 1.0,
                                                                        verify::LossPrecision::kDouble).worst);
    pass = pass && rep.pass;
    if (rep.worst > worst) {
      worst = rep.worst;
      where = rep.worst_param + " on instance " + std::to_string(i) + " (" + inst.params.dims.to_string() + ")";
    }
  }
  const double s = seconds_since(t0);
  return {pass && worst < 1e-4 && s < 30.0,
          "25 instances, eps 1e-5: max rel err " + num(worst) + " in " + where + " (limit 1e-4, 30 s); differences of a double-precision loss reach " +
              num(worst_double) + " on gradients below its rounding resolution"};
}

Outcome beam_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t agree = 0;
  double worst_gap = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng(derive_seed(31, i));
    const std::size_t V = 3 + rng.below(4);
    const std::size_t max_len = 2 + rng.below(4);
    const Dims dims{4, 4, 5, V};
    const auto p = verify::random_model(dims, rng.next(), 1.5);
    const auto f = verify::random_feature(4, rng.next());
    std::size_t K = 1;
    for (std::size_t k = 0; k < max_len; ++k) K *= V;
    const auto beam = beam_search(p, f, K, max_len).best();
    const auto oracle = verify::exhaustive_decode(p, f, max_len).front();
    const double gap = std::abs(beam.log_prob - oracle.log_prob);
    worst_gap = std::max(worst_gap, gap);
    if (beam.tokens == oracle.tokens && gap <= 1e-10) ++agree;
  }
  std::size_t greedy_agree = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng(derive_seed(32, i));
    const Dims dims{4, 5, 6, 3 + rng.below(10)};
    const auto p = verify::random_model(dims, rng.next(), 1.5);
    const auto f = verify::random_feature(4, rng.next());
    const auto beam = beam_search(p, f, 1, 12).best();
    if (beam.tokens == argmax_walk(p, f, 12) && greedy_decode(p, f, 12).best() == beam) ++greedy_agree;
  }
  const double s = seconds_since(t0);
  return {agree == 50 && greedy_agree == 100 && s < 60.0,
          "full-width beam = exhaustive on " + std::to_string(agree) + "/50 (max |dlogp| " + num(worst_gap) +
              "), K=1 = greedy on " + std::to_string(greedy_agree) + "/100"};
}

Outcome beam_dominance() {
  std::size_t ok = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng(derive_seed(33, i));
    const Dims dims{4, 5, 6, 4 + rng.below(9)};
    const auto p = verify::random_model(dims, rng.next(), 1.5);
    const auto f = verify::random_feature(4, rng.next());
    const std::size_t max_len = 3 + rng.below(6);
    double prev = -INFINITY;
    bool monotone = true;
    for (std::size_t K : {1, 2, 4, 8}) {
      const double top = beam_search(p, f, K, max_len).best().log_prob;
      monotone = monotone && top >= prev;
      prev = top;
    }
    if (monotone) ++ok;
  }
  return {ok == 50, "top score non-decreasing over K in {1,2,4,8} on " + std::to_string(ok) + "/50 models"};
}

Outcome bleu_fixtures() {
  const Tokens same = tokenize("a woman holding a cell phone in her hand");
  const double identical = sentence_bleu(same, std::vector<Tokens>{same}).score;

  const Tokens sevens = tokenize("the the the the the the the");
  const std::vector<Tokens> refs = {tokenize("the cat is on the mat")};
  const auto clip = modified_precision(sevens, refs, 1);

  bool dup_invariant = true;
  for (const auto& ex : published_examples()) {
    const auto cand = tokenize(ex.candidate);
    std::vector<Tokens> r;
    for (const auto& s : ex.references) r.push_back(tokenize(s));
    auto doubled = r;
    doubled.insert(doubled.end(), r.begin(), r.end());
    dup_invariant = dup_invariant && sentence_bleu(cand, r) == sentence_bleu(cand, doubled);
  }
  dup_invariant = dup_invariant && sentence_bleu(sevens, refs) ==
                                       sentence_bleu(sevens, std::vector<Tokens>{refs[0], refs[0], refs[0]});

  return {identical == 1.0 && clip == ClippedCount{2, 7} && dup_invariant,
          "identical -> " + num(identical) + ", clipped unigram precision " + std::to_string(clip.clipped) +
              "/" + std::to_string(clip.total) + ", duplicate references " +
              (dup_invariant ? "change nothing" : "CHANGED the report")};
}

Outcome overfit() {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();

  SyntheticSpec spec;
  spec.num_images = 20;
  spec.dim = 8;
  spec.seed = 1;
  const auto ds = generate_synthetic(spec);
  std::vector<std::string> caps;
  for (const auto& a : ds.annotations) caps.push_back(a.caption);
  const auto vocab = Vocabulary::build(caps, 1);
  const auto examples = build_examples(ds.annotations, ds.features, vocab);

  TrainConfig cfg;  // Adam, lr 1e-3, batch 8, clip 5
  cfg.epochs = 200;
  cfg.seed = 1;
  TrainState state{init_params({8, 32, 32, vocab.size()}, derive_seed(1, 0x1417)),
                   OptimizerState::fresh(cfg.optimizer, {8, 32, 32, vocab.size()}), 0};
  std::size_t reached = 0;
  train(state, examples, cfg, [&](const TrainState&, const EpochRecord& r) {
    if (!reached && r.mean_loss < 0.1) reached = r.epoch;
  });
  double final_loss = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    final_loss += caption_loss(state.params, ex.feature, ex.caption_ids);
    tokens += ex.caption_ids.size() - 1;
  }
  final_loss /= static_cast<double>(tokens);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
    const auto& a = ds.annotations[i];
    const auto best = greedy_decode(state.params, ds.features.at(a.image_id), 20).best();
    if (best.finished && vocab.decode(best.tokens) == synthetic_caption(spec, ds.pattern_of[i])) ++correct;
  }
  const double s = seconds_since(t0);
  omp_set_num_threads(saved);
  return {reached > 0 && reached <= 200 && s < 120.0 && correct >= 19,
          "loss < 0.1 at epoch " + std::to_string(reached) + ", loss after 200 epochs " + num(final_loss) +
              ", greedy captions correct " + std::to_string(correct) + "/20, 1 thread"};
}

Outcome determinism() {
  const auto dir = fs::path(CAPNET_SCRATCH_DIR) / "acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream sink;

  SyntheticOptions so;
  so.spec.seed = 7;
  so.annotations = dir / "anns.json";
  so.features = dir / "feats.csv";
  cmd_make_synthetic(so, sink);
  cmd_build_vocab({so.annotations, 1, dir / "vocab.txt"}, sink);

  auto opts = [&](const char* tag, std::size_t epochs) {
    TrainOptions t;
    t.annotations = so.annotations;
    t.features = so.features;
    t.vocab = dir / "vocab.txt";
    t.checkpoint = dir / (std::string(tag) + ".ckpt");
    t.loss_csv = dir / (std::string(tag) + ".csv");
    t.embed_dim = 16;
    t.hidden_dim = 16;
    t.config.epochs = epochs;
    t.config.batch_size = 4;
    t.config.seed = 99;
    return t;
  };
  cmd_train(opts("a", 20), sink);
  cmd_train(opts("b", 20), sink);
  const bool repeat = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt") &&
                      slurp(dir / "a.csv") == slurp(dir / "b.csv");

  cmd_train(opts("r", 10), sink);
  auto rest = opts("r", 20);
  rest.resume = dir / "r.ckpt";
  cmd_train(rest, sink);
  const bool resume = slurp(dir / "a.ckpt") == slurp(dir / "r.ckpt") &&
                      slurp(dir / "a.csv") == slurp(dir / "r.csv");

  return {repeat && resume, std::string("two identical runs: ") + (repeat ? "bit-identical" : "DIFFER") +
                                "; resume at epoch 10 of 20: " + (resume ? "bit-identical" : "DIFFERS")};
}

Outcome published_statement() {
  EvaluateOptions opts;
  opts.published_examples = true;
  std::ostringstream table;
  const double avg = cmd_evaluate(opts, table);
  std::cout << table.str();
  std::string computed;
  for (const auto& ex : published_examples()) {
    const auto cand = tokenize(ex.candidate);
    std::vector<Tokens> r;
    for (const auto& s : ex.references) r.push_back(tokenize(s));
    if (!computed.empty()) computed += ", ";
    computed += "image " + std::to_string(ex.image_id) + " " + num(100.0 * sentence_bleu(cand, r).score, 4) +
                " vs published " + num(ex.published_bleu);
  }
  // A documentation target: the comparison must run and print, the values are not asserted.
  return {std::isfinite(avg) && table.str().find("published_bleu") != std::string::npos,
          "not reproducible at desk scale; printed for comparison: " + computed + " (BLEU-4, no smoothing)"};
}

Outcome checkpoint_round_trip() {
  bool exact = true;
  for (std::uint64_t i = 0; i < 10; ++i) {
    Rng rng(derive_seed(55, i));
    const Dims dims{1 + rng.below(6), 1 + rng.below(8), 1 + rng.below(8), 3 + rng.below(10)};
    Checkpoint c;
    c.vocab_hash = sha256(std::to_string(i));
    c.epoch = rng.below(1000);
    c.seed = rng.next();
    c.params = verify::random_model(dims, rng.next(), 10.0);
    const auto kind = i % 2 ? OptimizerKind::kSgd : OptimizerKind::kAdam;
    c.optimizer = OptimizerState::fresh(kind, dims);
    c.optimizer.step = rng.below(100000);
    if (kind == OptimizerKind::kAdam) {
      c.optimizer.m = verify::random_model(dims, rng.next(), 1.0);
      c.optimizer.v = verify::random_model(dims, rng.next(), 1.0);
    }
    const auto path = fs::path(CAPNET_SCRATCH_DIR) / "acceptance_round_trip.ckpt";
    fs::create_directories(path.parent_path());
    save_checkpoint(path, c);
    const auto back = load_checkpoint(path);
    exact = exact && back == c && serialize_checkpoint(back) == slurp(path);
  }

  Checkpoint c;
  c.vocab_hash = sha256("trained vocabulary");
  c.params = verify::random_model({2, 2, 2, 4}, 1, 1.0);
  c.optimizer = OptimizerState::fresh(OptimizerKind::kSgd, c.dims());
  bool refused = false;
  try {
    require_compatible(parse_checkpoint(serialize_checkpoint(c)), c.dims(), sha256("another vocabulary"));
  } catch (const CheckpointError&) {
    refused = true;
  }
  return {exact && refused, std::string("10 random checkpoints ") + (exact ? "bit-exact" : "NOT exact") +
                                ", mismatched vocabulary hash " + (refused ? "refused" : "ACCEPTED")};
}

}  // namespace

int main() {
  report("gradient correctness", gradient_correctness);
  report("beam search oracle equivalence", beam_oracle);
  report("beam dominance", beam_dominance);
  report("BLEU fixtures", bleu_fixtures);
  report("overfit synthetic set", overfit);
  report("determinism and resume", determinism);
  report("published-number statement", published_statement);
  report("checkpoint round trip", checkpoint_round_trip);
  std::cout << (failures ? "acceptance FAILED: " + std::to_string(failures) + " criteria" : "acceptance passed")
            << std::endl;
  return failures ? 1 : 0;
}
