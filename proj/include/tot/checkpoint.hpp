#pragma once

#include <cstdint>
#include <filesystem>

#include "tot/encoder.hpp"

namespace tot {

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

// Settings needed to turn embeddings into cluster probabilities at inference.
struct InferenceSettings {
  double temperature = 0.1;
  bool normalize = true;
};

struct Checkpoint {
  EncoderParams params;
  AdamState adam;
  InferenceSettings inference;
};

// Binary layout is documented in docs/checkpoint_format.md.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tot
