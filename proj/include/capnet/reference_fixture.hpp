#pragma once

#include <string>
#include <vector>

#include "capnet/data_io.hpp"

namespace capnet {

/// Two captioned validation images with their five human references and the
/// per-image BLEU originally published for the generated caption. Used as a
/// comparison fixture; the published numbers come from an unstated BLEU
/// variant and a full-scale model, so they are printed, never asserted.
struct PublishedExample {
  ImageId image_id;
  std::string candidate;
  std::vector<std::string> references;
  double published_bleu;
};

const std::vector<PublishedExample>& published_examples();

}  // namespace capnet
