#include "capnet/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "capnet/checkpoint.hpp"
#include "capnet/decode.hpp"
#include "capnet/log.hpp"
#include "capnet/metrics.hpp"
#include "capnet/random.hpp"
#include "capnet/reference_fixture.hpp"
#include "capnet/verify.hpp"
#include "capnet/vocab.hpp"

namespace capnet {

using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kInitStream = 0x1417;

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CommandError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CommandError("cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw CommandError("write failed for " + path.string());
}

std::string join_ids(const std::vector<ImageId>& ids) {
  std::string s;
  for (auto id : ids) {
    if (!s.empty()) s += ", ";
    s += std::to_string(id);
  }
  return s;
}

std::string fixed(double x, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << x;
  return ss.str();
}

}  // namespace

// ---- build-vocab -------------------------------------------------------------

BuildVocabSummary cmd_build_vocab(const BuildVocabOptions& opts, std::ostream& out) {
  const auto annotations = load_annotations(opts.annotations);
  std::vector<std::string> captions;
  captions.reserve(annotations.size());
  for (const auto& a : annotations) captions.push_back(a.caption);

  const auto vocab = Vocabulary::build(captions, opts.min_count);
  vocab.save(opts.out);

  std::size_t total = 0, covered = 0;
  for (const auto& c : captions) {
    for (const auto& t : tokenize(c)) {
      ++total;
      if (vocab.contains(t)) ++covered;
    }
  }
  BuildVocabSummary summary{vocab.size(), total ? 100.0 * covered / total : 0.0};
  if (vocab.size() == 3) {
    log::warn("no token reaches min_count=" + std::to_string(opts.min_count) +
              "; vocabulary holds only the reserved symbols");
  }
  out << "vocabulary size " << summary.size << ", coverage " << fixed(summary.coverage, 2)
      << "% of " << total << " tokens\n";
  return summary;
}

// ---- train -------------------------------------------------------------------

std::vector<EpochRecord> cmd_train(const TrainOptions& opts, std::ostream& out) {
  opts.config.validate();
  const auto annotations = load_annotations(opts.annotations);
  const auto features = load_features(opts.features);
  const auto vocab = Vocabulary::load(opts.vocab);
  const auto vocab_hash = vocab.hash();

  if (opts.image_dim && *opts.image_dim != features.dim()) {
    throw CommandError("configured image dimension " + std::to_string(*opts.image_dim) +
                       " does not match feature file dimension " + std::to_string(features.dim()));
  }
  const Dims dims{features.dim(), opts.embed_dim, opts.hidden_dim, vocab.size()};
  const auto examples = build_examples(annotations, features, vocab);
  if (examples.empty()) throw CommandError("no training examples in " + opts.annotations.string());

  TrainState state;
  bool resumed = false;
  if (opts.resume) {
    auto ckpt = load_checkpoint(*opts.resume);
    require_compatible(ckpt, dims, vocab_hash);
    if (ckpt.seed != opts.config.seed) {
      throw CommandError("checkpoint was trained with seed " + std::to_string(ckpt.seed) +
                         ", not " + std::to_string(opts.config.seed));
    }
    if (ckpt.optimizer.kind != opts.config.optimizer) {
      throw CommandError("checkpoint optimizer differs from the configured optimizer");
    }
    state = {std::move(ckpt.params), std::move(ckpt.optimizer), ckpt.epoch};
    resumed = true;
    log::info("resuming from epoch " + std::to_string(state.epoch));
  } else {
    state = {init_params(dims, derive_seed(opts.config.seed, kInitStream)),
             OptimizerState::fresh(opts.config.optimizer, dims), 0};
  }

  if (!resumed || !fs::exists(opts.loss_csv)) write_text(opts.loss_csv, loss_history_csv({}));

  log::info("training " + dims.to_string() + " on " + std::to_string(examples.size()) +
            " examples, " + std::to_string(state.params.parameter_count()) + " parameters");

  auto save = [&](const TrainState& s) {
    Checkpoint ckpt{vocab_hash, s.epoch, opts.config.seed, s.params, s.optimizer};
    save_checkpoint(opts.checkpoint, ckpt);
  };

  const auto history = train(state, examples, opts.config,
                             [&](const TrainState& s, const EpochRecord& rec) {
    {
      std::ofstream csv(opts.loss_csv, std::ios::binary | std::ios::app);
      const auto row = loss_history_csv(std::span(&rec, 1));
      csv << row.substr(row.find('\n') + 1);
      if (!csv) throw CommandError("cannot append to " + opts.loss_csv.string());
    }
    log::info("epoch " + std::to_string(rec.epoch) + " mean per-token loss " +
              fixed(rec.mean_loss, 6));
    const bool cadence = opts.config.checkpoint_every > 0 && rec.epoch % opts.config.checkpoint_every == 0;
    if (cadence || rec.epoch == opts.config.epochs) save(s);
  });

  if (history.empty()) {
    // Already at or past the requested epoch count.
    save(state);
  }
  out << "trained to epoch " << state.epoch;
  if (!history.empty()) out << ", final mean per-token loss " << fixed(history.back().mean_loss, 6);
  out << "\n";
  return history;
}

// ---- caption -----------------------------------------------------------------

void cmd_caption(const CaptionOptions& opts, std::ostream& out) {
  const auto ckpt = load_checkpoint(opts.checkpoint);
  const auto vocab = Vocabulary::load(opts.vocab);
  require_vocabulary(ckpt, vocab.hash());
  if (ckpt.dims().vocab != vocab.size()) {
    throw CommandError("checkpoint vocabulary size differs from the vocabulary file");
  }

  const auto all = load_features(opts.features);
  if (all.empty()) throw CommandError("feature file " + opts.features.string() + " has no rows");
  if (all.dim() != ckpt.dims().image) {
    throw CommandError("feature dimension " + std::to_string(all.dim()) +
                       " does not match the model's D=" + std::to_string(ckpt.dims().image));
  }

  FeatureTable selected(all.dim());
  if (opts.image_ids.empty()) {
    selected = all;
  } else {
    std::vector<ImageId> missing;
    for (auto id : opts.image_ids) {
      if (!all.contains(id)) {
        missing.push_back(id);
      } else if (!selected.contains(id)) {
        selected.add(id, all.at(id));
      }
    }
    if (!missing.empty()) throw CommandError("unknown image ids: " + join_ids(missing));
  }

  const auto results = caption_batch(ckpt.params, selected, opts.beam_width, opts.max_len);
  ordered_json arr = ordered_json::array();
  for (const auto& [id, res] : results) {
    const auto& best = res.best();
    arr.push_back({{"image_id", id}, {"caption", vocab.decode(best.tokens)}, {"log_prob", best.log_prob}});
  }
  write_text(opts.out, arr.dump(1) + "\n");
  out << "captioned " << results.size() << " images (beam " << opts.beam_width << ", max_len "
      << opts.max_len << ")\n";
}

// ---- evaluate ----------------------------------------------------------------

namespace {

std::vector<EvalPair> pairs_from_captions(const EvaluateOptions& opts) {
  const auto captions = nlohmann::json::parse(read_text(opts.captions));
  const auto annotations = load_annotations(opts.annotations);
  std::map<ImageId, std::vector<Tokens>> refs;
  for (const auto& a : annotations) refs[a.image_id].push_back(tokenize(a.caption));

  std::vector<EvalPair> pairs;
  std::vector<ImageId> missing;
  std::set<ImageId> seen;
  for (const auto& item : captions) {
    const auto id = item.at("image_id").get<ImageId>();
    if (!seen.insert(id).second) throw CommandError("duplicate caption for image " + std::to_string(id));
    auto it = refs.find(id);
    if (it == refs.end()) {
      missing.push_back(id);
      continue;
    }
    pairs.push_back({id, tokenize(item.at("caption").get<std::string>()), it->second});
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw CommandError("no reference captions for image ids: " + join_ids(missing));
  }
  return pairs;
}

std::vector<EvalPair> published_pairs() {
  std::vector<EvalPair> pairs;
  for (const auto& ex : published_examples()) {
    EvalPair p{ex.image_id, tokenize(ex.candidate), {}};
    for (const auto& r : ex.references) p.references.push_back(tokenize(r));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

double cmd_evaluate(const EvaluateOptions& opts, std::ostream& out) {
  std::vector<EvalPair> pairs;
  if (opts.published_examples) {
    pairs = published_pairs();
  } else if (!opts.pairs.empty()) {
    pairs = parse_eval_pairs(read_text(opts.pairs));
  } else {
    pairs = pairs_from_captions(opts);
  }
  if (pairs.empty()) throw CommandError("nothing to evaluate");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const EvalPair& a, const EvalPair& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].image_id == pairs[i - 1].image_id) {
      throw CommandError("duplicate evaluation entry for image " + std::to_string(pairs[i].image_id));
    }
  }

  const EvalSettings settings{opts.max_n, opts.pooled};
  const auto reports = score_pairs(pairs, settings.max_n);
  const double average = average_score(reports);
  if (!opts.out.empty()) write_text(opts.out, bleu_report_json(pairs, reports, settings));

  log::info("BLEU settings: max_n=" + std::to_string(settings.max_n) +
            ", uniform weights over orders with nonzero denominator, closest-reference brevity "
            "penalty, no smoothing");
  if (opts.published_examples) {
    out << "image  computed_bleu  published_bleu\n";
    std::map<ImageId, double> published;
    for (const auto& ex : published_examples()) published[ex.image_id] = ex.published_bleu;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out << std::setw(5) << pairs[i].image_id << "  " << std::setw(13) << fixed(100.0 * reports[i].score, 2)
          << "  " << std::setw(14) << fixed(published.at(pairs[i].image_id), 1) << "\n";
    }
    out << "computed with BLEU-" << settings.max_n
        << ", no smoothing; published values used an unstated variant and are not asserted\n";
  }
  out << "images " << pairs.size() << ", average BLEU " << fixed(average, 2);
  if (opts.pooled) out << ", pooled corpus BLEU " << fixed(pooled_corpus_bleu(pairs, settings.max_n), 2);
  out << "\n";
  return average;
}

// ---- selfcheck ---------------------------------------------------------------

bool cmd_selfcheck(const SelfcheckOptions& opts, std::ostream& out) {
  struct Row {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Row> rows;
  const auto t0 = std::chrono::steady_clock::now();
  const double corrupt = opts.corrupt_gradient ? 2.0 : 1.0;

  // Analytic BPTT gradients against central differences.
  {
    double worst = 0.0;
    bool pass = true;
    for (std::uint64_t i = 0; i < 5; ++i) {
      const auto inst = verify::random_instance(derive_seed(opts.seed, 100 + i));
      const auto rep = verify::check_model_gradients(inst, 1e-5, 1e-4, corrupt);
      worst = std::max(worst, rep.worst);
      pass = pass && rep.pass;
    }
    rows.push_back({"gradient check (5 instances)", pass, "max rel err " + std::to_string(worst)});
  }

  // Beam search with a beam wide enough to keep everything vs enumeration.
  {
    bool pass = true;
    std::size_t models = 0;
    for (std::uint64_t i = 0; i < 10; ++i) {
      Rng rng(derive_seed(opts.seed, 200 + i));
      const Dims dims{3, 4, 4, 3 + rng.below(4)};
      const std::size_t max_len = 2 + rng.below(3);
      const auto p = verify::random_model(dims, rng.next(), 1.5);
      const auto f = verify::random_feature(dims.image, rng.next());
      std::size_t width = 1;
      for (std::size_t k = 0; k < max_len; ++k) width *= dims.vocab;
      const auto beam = beam_search(p, f, width, max_len).best();
      const auto oracle = verify::exhaustive_decode(p, f, max_len).front();
      pass = pass && beam.tokens == oracle.tokens && std::abs(beam.log_prob - oracle.log_prob) <= 1e-10;
      ++models;
    }
    rows.push_back({"beam vs exhaustive search", pass, std::to_string(models) + " models"});
  }

  // BLEU fixtures.
  {
    const Tokens cand = tokenize("the the the the the the the");
    const std::vector<Tokens> refs = {tokenize("the cat is on the mat")};
    const auto clip = modified_precision(cand, refs, 1);
    const Tokens same = tokenize("a woman holding a cell phone");
    const std::vector<Tokens> same_refs = {same};
    const auto perfect = sentence_bleu(same, same_refs);
    const std::vector<Tokens> dup_refs = {refs[0], refs[0]};
    const bool dup_same = sentence_bleu(cand, refs) == sentence_bleu(cand, dup_refs);
    const bool pass = clip == ClippedCount{2, 7} && perfect.score == 1.0 && dup_same;
    rows.push_back({"BLEU fixtures", pass,
                    "clip " + std::to_string(clip.clipped) + "/" + std::to_string(clip.total)});
  }

  // Checkpoint round trip and vocabulary-hash refusal.
  {
    const Dims dims{3, 4, 5, 6};
    Checkpoint ckpt{sha256("vocab"), 3, opts.seed, verify::random_model(dims, opts.seed, 1.0),
                    OptimizerState::fresh(OptimizerKind::kAdam, dims)};
    ckpt.optimizer.m = verify::random_model(dims, opts.seed + 1, 1.0);
    const bool roundtrip = parse_checkpoint(serialize_checkpoint(ckpt)) == ckpt;
    bool refused = false;
    try {
      require_compatible(ckpt, dims, sha256("other vocab"));
    } catch (const CheckpointError&) {
      refused = true;
    }
    rows.push_back({"checkpoint round trip", roundtrip && refused, ""});
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool all = true;
  out << std::left;
  for (const auto& r : rows) {
    out << std::setw(32) << r.name << (r.pass ? "PASS  " : "FAIL  ") << r.detail << "\n";
    all = all && r.pass;
  }
  out << "selfcheck " << (all ? "passed" : "FAILED") << " in " << fixed(seconds, 2) << " s\n";
  return all;
}

// ---- make-synthetic ----------------------------------------------------------

void cmd_make_synthetic(const SyntheticOptions& opts, std::ostream& out) {
  const auto ds = generate_synthetic(opts.spec);
  save_annotations(opts.annotations, ds.annotations);
  save_features(opts.features, ds.features);
  out << "wrote " << ds.annotations.size() << " captioned images (D=" << opts.spec.dim << ")\n";
}

}  // namespace capnet
