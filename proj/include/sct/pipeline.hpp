#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sct/checkpoint.hpp"
#include "sct/model.hpp"
#include "sct/train_config.hpp"
#include "sct/volume.hpp"

namespace sct {

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

// Seeded shuffle, then the first round(ratio * n) ids train and the rest
// validate. Both sides keep at least one case.
Split split_dataset(std::vector<std::string> ids, double ratio, std::uint64_t seed);

// Slice indices feeding channel k: clamp(z + k - (n - 1) / 2, 0, nz - 1).
std::vector<std::size_t> slab_indices(std::size_t nz, std::size_t z, std::size_t n);

// N-channel transverse image, channel-major, (height = ny, width = nx).
struct Slab {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;
};

Slab extract_slab(const Volume& volume, std::size_t z, std::size_t n);

struct SampleRef {
  std::size_t volume = 0;
  std::size_t z = 0;

  bool operator==(const SampleRef&) const = default;
};

// M uniform center indices per volume, shuffled into one stream. The stream
// depends only on (depths, M, seed, epoch).
std::vector<SampleRef> sample_epoch(std::span<const std::size_t> depths, std::size_t samples_per_volume,
                                    std::uint64_t seed, std::size_t epoch);

// [begin, end) ranges of batch_size consecutive samples; the last may be short.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t count, std::size_t batch_size);

// Reflect (mirror without edge repeat) index into [0, n).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

struct PadPlan {
  std::size_t height = 0, width = 0;          // original
  std::size_t padded_height = 0, padded_width = 0;
  std::size_t top = 0, left = 0;
};

// Pads H, W up to the next multiple, splitting the excess around the centre.
PadPlan plan_padding(std::size_t height, std::size_t width, std::size_t multiple);

// Network-space case: normalized source and target, binary mask.
struct PreparedCase {
  std::string case_id;
  Volume source;
  std::optional<Volume> target;
  Volume mask;
  NormalizationParams source_norm;
};

PreparedCase prepare_case(const CaseRecord& record, const NormalizationParams& source_settings);

// Runs the model over every slice of a normalized source, returning the
// normalized prediction volume (nx * ny * nz, x-fastest). Slices are pushed
// through in chunks of batch_size; results do not depend on the chunking.
std::vector<float> predict_normalized(const Model<float>& model, const Volume& normalized_source,
                                      std::size_t slices, std::size_t batch_size);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_index = 0;
  double best_val_loss = 0.0;

  bool operator==(const TrainHistory&) const = default;
};

std::string history_csv(const TrainHistory& history);

// Mean over slices (with a nonempty mask) of the per-slice masked L1
// between prediction and target, both in normalized space.
double validation_loss(const Model<float>& model, std::span<const PreparedCase> cases, std::size_t slices,
                       std::size_t batch_size);

struct TrainOptions {
  // When set: history.csv, best.ckpt and last.ckpt are written here.
  std::optional<std::filesystem::path> run_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  TrainHistory history;
  // Per-epoch count of samples drawn (M x number of training volumes).
  std::vector<std::size_t> samples_per_epoch;
};

TrainResult train(std::span<const CaseRecord> train_cases, std::span<const CaseRecord> val_cases,
                  const TrainConfig& config, const ModelSpec& spec, const TrainOptions& options = {});

// Selects cases by id from a pool, in the given id order.
std::vector<CaseRecord> select_cases(std::span<const CaseRecord> pool, std::span<const std::string> ids);

} // namespace sct
