#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sct/checkpoint.hpp"
#include "sct/volume.hpp"

namespace sct {

struct SynthesisOptions {
  float outside_fill = -1024.0f;
  std::size_t batch_size = 4;
};

struct SynthesisResult {
  Volume sct;
  double seconds = 0.0;
};

// Slice-by-slice synthesis: normalize the source with the checkpoint's
// settings (percentile landmarks refitted on this volume), run every slab,
// map back to HU, and fill voxels outside the mask when one is given.
SynthesisResult synthesize(const Checkpoint& checkpoint, const Volume& source,
                           const std::optional<Volume>& mask = std::nullopt,
                           const SynthesisOptions& options = {});

struct BatchFailure {
  std::string case_id;
  std::string message;
};

struct BatchReport {
  std::vector<std::string> written;
  std::vector<BatchFailure> failures;
  std::string checkpoint_hash;
};

// Writes <case>_sct.mha for every case in the directory plus
// predict_manifest.json. A failing case is recorded and skipped.
BatchReport batch_predict(const std::filesystem::path& checkpoint_path, const std::filesystem::path& case_dir,
                          const std::filesystem::path& out_dir, const SynthesisOptions& options = {});

} // namespace sct
