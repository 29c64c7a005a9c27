#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "capnet/data_io.hpp"
#include "capnet/train.hpp"

namespace capnet {

/// A command could not meet its post-condition. The CLI maps this to a
/// nonzero exit after printing the message.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

struct BuildVocabOptions {
  fs::path annotations;
  std::size_t min_count = 4;
  fs::path out;
};

struct BuildVocabSummary {
  std::size_t size = 0;
  double coverage = 0.0;  // percent of corpus tokens that are in-vocabulary
};

BuildVocabSummary cmd_build_vocab(const BuildVocabOptions& opts, std::ostream& out);

struct TrainOptions {
  fs::path annotations;
  fs::path features;
  fs::path vocab;
  fs::path checkpoint;
  fs::path loss_csv;
  std::optional<fs::path> resume;
  std::optional<std::size_t> image_dim;  // must match the feature file when set
  std::size_t embed_dim = 256;
  std::size_t hidden_dim = 256;
  TrainConfig config;
};

std::vector<EpochRecord> cmd_train(const TrainOptions& opts, std::ostream& out);

struct CaptionOptions {
  fs::path checkpoint;
  fs::path vocab;
  fs::path features;
  fs::path out;
  std::size_t beam_width = 3;
  std::size_t max_len = 20;
  std::vector<ImageId> image_ids;  // empty: every image in the feature file
};

void cmd_caption(const CaptionOptions& opts, std::ostream& out);

struct EvaluateOptions {
  fs::path captions;     // [{"image_id", "caption", ...}]
  fs::path annotations;  // references
  fs::path pairs;        // alternative input: [{"image_id", "candidate", "references"}]
  fs::path out;
  std::size_t max_n = 4;
  bool pooled = false;
  bool published_examples = false;
};

/// Returns the aggregate average BLEU (0-100).
double cmd_evaluate(const EvaluateOptions& opts, std::ostream& out);

struct SelfcheckOptions {
  bool corrupt_gradient = false;  // negative control: doubles analytic gradients
  std::uint64_t seed = 0;
};

bool cmd_selfcheck(const SelfcheckOptions& opts, std::ostream& out);

struct SyntheticOptions {
  SyntheticSpec spec;
  fs::path annotations;
  fs::path features;
};

void cmd_make_synthetic(const SyntheticOptions& opts, std::ostream& out);

}  // namespace capnet
