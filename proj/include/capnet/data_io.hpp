#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "capnet/numeric.hpp"
#include "capnet/vocab.hpp"

namespace capnet {

using ImageId = std::int64_t;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed JSON; `byte_offset` is where the parser gave up.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : DataError(what), byte_offset(byte_offset) {}
  std::size_t byte_offset;
};

/// Records that reference image ids the file (or feature table) does not define.
class IntegrityError : public DataError {
 public:
  IntegrityError(const std::string& what, std::vector<ImageId> ids)
      : DataError(what), missing_ids(std::move(ids)) {}
  std::vector<ImageId> missing_ids;
};

struct Annotation {
  ImageId image_id = 0;
  std::string caption;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// COCO captions subset: {"images": [{"id"}], "annotations": [{"image_id", "caption"}]}.
std::vector<Annotation> parse_annotations(std::string_view json_text);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const std::vector<Annotation>& annotations);

/// Precomputed image features, all of dimension D. Iteration is by ascending id.
class FeatureTable {
 public:
  explicit FeatureTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  /// Throws DataError on duplicate id, wrong length or non-finite entries.
  void add(ImageId id, Vector feature);

  bool contains(ImageId id) const { return rows_.count(id) != 0; }
  const Vector& at(ImageId id) const;

  auto begin() const { return rows_.begin(); }
  auto end() const { return rows_.end(); }

  friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

 private:
  std::size_t dim_;
  std::map<ImageId, Vector> rows_;
};

/// CSV: header "image_id,<D>", then "id,v1,...,vD" with shortest round-trip floats.
FeatureTable parse_features(std::string_view csv_text);
FeatureTable load_features(const std::filesystem::path& path);
std::string serialize_features(const FeatureTable& table);
void save_features(const std::filesystem::path& path, const FeatureTable& table);

struct CaptionedExample {
  ImageId image_id = 0;
  Vector feature;
  std::vector<TokenId> caption_ids;  // START ... STOP
};

/// Pairs each annotation with its feature row and encodes the caption.
/// Annotations without a feature row raise IntegrityError listing the ids.
std::vector<CaptionedExample> build_examples(const std::vector<Annotation>& annotations,
                                             const FeatureTable& features,
                                             const Vocabulary& vocab);

/// Shuffled partition of [0, count) into batches of `batch_size` (last may be short).
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   std::uint64_t seed);

struct SyntheticSpec {
  std::size_t num_images = 20;
  std::vector<std::string> patterns = {"cat", "dog"};
  std::string caption_template = "a {}";
  std::size_t dim = 8;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  FeatureTable features{1};
  std::vector<Annotation> annotations;
  std::vector<std::size_t> pattern_of;  // per image, in id order
};

/// Image i (id i+1) gets pattern i mod P: a one-hot at index P's slot plus
/// uniform noise, captioned by substituting the pattern word into the template.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

std::string synthetic_caption(const SyntheticSpec& spec, std::size_t pattern);

}  // namespace capnet
