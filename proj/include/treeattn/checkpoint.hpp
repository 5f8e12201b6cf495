#pragma once

#include <string>

#include "treeattn/train.hpp"

namespace treeattn {

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  Vocabulary vocab;
};

/// Versioned binary container: config, variant tag, vocabulary (tokens and
/// hash), then every named parameter as shape + little-endian 64-bit
/// floats. Written to a temp file and renamed into place.
void save_checkpoint(const std::string& path, ModelParams& params,
                     const TrainConfig& config, const Vocabulary& vocab);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace treeattn
