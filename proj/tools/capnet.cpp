// capnet: vocabulary building, training, captioning, evaluation and self-check.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "capnet/commands.hpp"
#include "capnet/log.hpp"

int main(int argc, char** argv) {
  using namespace capnet;

  CLI::App app{"capnet: LSTM image-caption generator with beam search and BLEU evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value config file, [command] sections; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  BuildVocabOptions vocab_opts;
  auto* build_vocab = app.add_subcommand("build-vocab", "Build a vocabulary file from annotations");
  build_vocab->add_option("--annotations", vocab_opts.annotations, "COCO-style captions JSON")->required();
  build_vocab->add_option("--min-count", vocab_opts.min_count, "Minimum token frequency")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  build_vocab->add_option("--out", vocab_opts.out, "Vocabulary file to write")->required();

  TrainOptions train_opts;
  std::string optimizer = "adam";
  double clip = 5.0;
  std::string resume;
  std::size_t image_dim = 0;
  auto* train_cmd = app.add_subcommand("train", "Train the caption model");
  train_cmd->add_option("--annotations", train_opts.annotations)->required();
  train_cmd->add_option("--features", train_opts.features, "Feature CSV")->required();
  train_cmd->add_option("--vocab", train_opts.vocab)->required();
  train_cmd->add_option("--checkpoint", train_opts.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--loss-csv", train_opts.loss_csv, "Per-epoch loss history")->required();
  train_cmd->add_option("--resume", resume, "Continue from this checkpoint");
  train_cmd->add_option("--image-dim", image_dim, "Expected feature dimension (0: take from file)");
  train_cmd->add_option("--embed-dim", train_opts.embed_dim)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--hidden-dim", train_opts.hidden_dim)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--epochs", train_opts.config.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch-size", train_opts.config.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--learning-rate", train_opts.config.learning_rate)->capture_default_str();
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  train_cmd->add_option("--adam-beta1", train_opts.config.adam_beta1)->capture_default_str();
  train_cmd->add_option("--adam-beta2", train_opts.config.adam_beta2)->capture_default_str();
  train_cmd->add_option("--adam-epsilon", train_opts.config.adam_epsilon)->capture_default_str();
  train_cmd->add_option("--grad-clip", clip, "Global gradient norm cap (0 disables)")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train_opts.config.checkpoint_every, "Epoch cadence (0: end only)")
      ->capture_default_str();

  CaptionOptions caption_opts;
  auto* caption_cmd = app.add_subcommand("caption", "Caption images with beam search");
  caption_cmd->add_option("--checkpoint", caption_opts.checkpoint)->required();
  caption_cmd->add_option("--vocab", caption_opts.vocab)->required();
  caption_cmd->add_option("--features", caption_opts.features)->required();
  caption_cmd->add_option("--out", caption_opts.out, "Captions JSON to write")->required();
  caption_cmd->add_option("--beam", caption_opts.beam_width, "Beam width K")->check(CLI::PositiveNumber)->capture_default_str();
  caption_cmd->add_option("--max-len", caption_opts.max_len)->check(CLI::PositiveNumber)->capture_default_str();
  caption_cmd->add_option("--ids", caption_opts.image_ids, "Only these image ids");

  EvaluateOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score captions with BLEU");
  eval_cmd->add_option("--captions", eval_opts.captions, "Captions JSON from `caption`");
  eval_cmd->add_option("--annotations", eval_opts.annotations, "Reference annotations");
  eval_cmd->add_option("--pairs", eval_opts.pairs, "Candidate/references JSON list");
  eval_cmd->add_option("--out", eval_opts.out, "Report JSON to write");
  eval_cmd->add_option("--max-n", eval_opts.max_n)->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_flag("--pooled", eval_opts.pooled, "Also report pooled-count corpus BLEU");
  eval_cmd->add_flag("--published-examples", eval_opts.published_examples,
                     "Score the two built-in published examples and print them beside the published values");

  SelfcheckOptions check_opts;
  auto* check_cmd = app.add_subcommand("selfcheck", "Gradient, search and metric self-tests");
  check_cmd->add_flag("--corrupt-gradient", check_opts.corrupt_gradient, "Negative control: must fail");

  SyntheticOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("make-synthetic", "Write a small learnable dataset");
  synth_cmd->add_option("--annotations", synth_opts.annotations)->required();
  synth_cmd->add_option("--features", synth_opts.features)->required();
  synth_cmd->add_option("--images", synth_opts.spec.num_images)->capture_default_str();
  synth_cmd->add_option("--dim", synth_opts.spec.dim)->capture_default_str();
  synth_cmd->add_option("--noise", synth_opts.spec.noise)->capture_default_str();
  synth_cmd->add_option("--patterns", synth_opts.spec.patterns, "Comma-separated pattern words")
      ->delimiter(',')
      ->capture_default_str();
  synth_cmd->add_option("--template", synth_opts.spec.caption_template)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  const std::string run_config = app.config_to_str(true, false);
  log::write(*train_cmd ? log::Level::kInfo : log::Level::kDebug, "run configuration:\n" + run_config);

  try {
    if (*build_vocab) {
      cmd_build_vocab(vocab_opts, std::cout);
    } else if (*train_cmd) {
      train_opts.config.seed = seed;
      train_opts.config.optimizer = optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
      train_opts.config.grad_clip_norm = clip > 0.0 ? std::optional<double>(clip) : std::nullopt;
      if (!resume.empty()) train_opts.resume = resume;
      if (image_dim > 0) train_opts.image_dim = image_dim;
      cmd_train(train_opts, std::cout);
    } else if (*caption_cmd) {
      cmd_caption(caption_opts, std::cout);
    } else if (*eval_cmd) {
      const bool from_captions = !eval_opts.captions.empty() && !eval_opts.annotations.empty();
      if (!eval_opts.published_examples && !from_captions && eval_opts.pairs.empty()) {
        std::cerr << "evaluate: give --captions and --annotations, --pairs, or --published-examples\n";
        return 2;
      }
      cmd_evaluate(eval_opts, std::cout);
    } else if (*check_cmd) {
      check_opts.seed = seed;
      return cmd_selfcheck(check_opts, std::cout) ? 0 : 1;
    } else if (*synth_cmd) {
      synth_opts.spec.seed = seed;
      cmd_make_synthetic(synth_opts, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
