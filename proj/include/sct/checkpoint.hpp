#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "sct/model.hpp"
#include "sct/preprocess.hpp"
#include "sct/train_config.hpp"

namespace sct {

struct Checkpoint {
  Model<float> model;
  NormalizationParams source_norm;
  NormalizationParams target_norm = hu_window();
  TrainConfig config;
  std::size_t epoch = 0;
  double val_loss = std::numeric_limits<double>::infinity();
};

// Layout: a magic line, a `manifest_bytes = <n>` line, an n-byte text
// manifest of `key = value` entries (spec, normalization, config, epoch,
// validation loss, tensor table), then the tensors as raw little-endian
// float32 in table order. The file must end exactly after the last tensor.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Manifest portion only, for inspection.
std::map<std::string, std::string> checkpoint_manifest(std::span<const std::uint8_t> bytes);

// FNV-1a 64-bit, hex encoded.
std::string content_hash(std::span<const std::uint8_t> bytes);

} // namespace sct
