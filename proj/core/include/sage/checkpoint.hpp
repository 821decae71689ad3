#pragma once

#include <cstdint>
#include <string>

#include "sage/model.hpp"

namespace sage {

/// A trained model snapshot with metadata. Persists through a container file:
/// magic "SAGECPT1", a little-endian u32 header length, a JSON header
/// (kind, tag, step, created_at, config, tensor directory, payload hash),
/// then all tensors as little-endian 32-bit floats in row-major order.
struct Checkpoint {
  ModelStateF state;
  int step = 0;
  std::string tag;
  std::int64_t created_at = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Soft prompts reuse the same container with kind "soft_prompt" and a
/// single n x d tensor; the probe name rides in the header.
void save_soft_prompt(const SoftPromptF& prompt, int step,
                      const std::string& path);
SoftPromptF load_soft_prompt(const std::string& path, int* step = nullptr);

}  // namespace sage
