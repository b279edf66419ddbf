#pragma once

#include <string>

#include "metasre/networks.hpp"

// Checkpoint file: one JSON object
//   {"format": "metasre-checkpoint", "version": 1, "role": "rcn" | "rlgn",
//    "dims": {"vocab_size", "embed_dim", "hidden", "num_classes"},
//    "vocabulary": [regular tokens in id order],
//    "label_names": [K names],
//    "tensors": [{"name", "shape": [rows, cols], "values": [...]}, ...]}
// Tensors appear in the fixed kParamNames order. Doubles are written with
// round-trip precision, so save/load is lossless.
namespace metasre {

struct Checkpoint {
  ClassifierParams params;
  Vocabulary vocabulary;
  std::vector<std::string> label_names;
};

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace metasre
