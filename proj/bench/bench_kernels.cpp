// Times the OpenMP kernels against their serial references and checks that
// both produce identical results.
//
//   bench_kernels [threads] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include <omp.h>

#include "capnet/data_io.hpp"
#include "capnet/decode.hpp"
#include "capnet/metrics.hpp"
#include "capnet/model.hpp"
#include "capnet/random.hpp"
#include "capnet/reference_fixture.hpp"
#include "capnet/train.hpp"
#include "capnet/verify.hpp"

using namespace capnet;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / repeats;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s serial %9.2f ms  parallel %9.2f ms  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_max_threads();
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
  omp_set_num_threads(threads);
  std::printf("threads %d, repeats %d\n", threads, repeats);

  // Batch gradient: 64 captions of 12 tokens on a mid-sized model.
  const Dims dims{64, 64, 64, 200};
  const auto params = init_params(dims, 1);
  Rng rng(2);
  std::vector<CaptionedExample> examples;
  for (int i = 0; i < 64; ++i) {
    CaptionedExample ex{i, verify::random_feature(dims.image, rng.next()), {kStartId}};
    for (int t = 0; t < 10; ++t) ex.caption_ids.push_back(static_cast<TokenId>(3 + rng.below(dims.vocab - 3)));
    ex.caption_ids.push_back(kStopId);
    examples.push_back(std::move(ex));
  }
  std::vector<std::size_t> idx(examples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  BatchGradient gs, gp;
  const double gs_ms = time_ms([&] { gs = batch_gradient_serial(params, examples, idx); }, repeats);
  const double gp_ms = time_ms([&] { gp = batch_gradient(params, examples, idx); }, repeats);
  report("batch_gradient", gs_ms, gp_ms, gs.grad == gp.grad && gs.losses == gp.losses);

  // Beam-search captioning of 32 images.
  FeatureTable table(dims.image);
  for (int i = 0; i < 32; ++i) table.add(i, verify::random_feature(dims.image, rng.next()));
  std::map<ImageId, DecodeResult> cs, cp;
  const double cs_ms = time_ms([&] { cs = caption_batch_serial(params, table, 3, 12); }, repeats);
  const double cp_ms = time_ms([&] { cp = caption_batch(params, table, 3, 12); }, repeats);
  bool same = cs.size() == cp.size();
  for (const auto& [id, r] : cs) same = same && r.ranked == cp.at(id).ranked;
  report("caption_batch", cs_ms, cp_ms, same);

  // Sentence BLEU over a replicated corpus.
  std::vector<EvalPair> pairs;
  for (int rep = 0; rep < 2000; ++rep) {
    for (const auto& ex : published_examples()) {
      EvalPair p{rep, tokenize(ex.candidate), {}};
      for (const auto& r : ex.references) p.references.push_back(tokenize(r));
      pairs.push_back(std::move(p));
    }
  }
  std::vector<BleuReport> bs, bp;
  const double bs_ms = time_ms([&] { bs = score_pairs_serial(pairs); }, repeats);
  const double bp_ms = time_ms([&] { bp = score_pairs(pairs); }, repeats);
  report("score_pairs", bs_ms, bp_ms, bs == bp);
  return 0;
}
