#include "capnet/reference_fixture.hpp"

namespace capnet {

const std::vector<PublishedExample>& published_examples() {
  static const std::vector<PublishedExample> examples = {
      {4,
       "a woman sitting at a table with a plate of food.",
       {"The young woman is seated at the table for lunch, holding a hotdog.",
        "a woman is eatting a hotdog at a wooden table.",
        "there is a woman holding food at a table.",
        "a young woman holding a sandwich at a table.",
        "a woman that is sitting down holding a hotdog."},
       63.0},
      {5,
       "a woman holding a cell phone in her hand.",
       {"a woman holding a Hello Kitty phone on her hands",
        "a woman holds up her phone in front of her face",
        "a woman in white shirt holding up a cellphone",
        "a woman checking her cell phone with a hello kitty case",
        "the asian girl is holding her miss kitty phone"},
       77.0},
  };
  return examples;
}

}  // namespace capnet
