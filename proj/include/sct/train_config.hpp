#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "sct/optim.hpp"
#include "sct/preprocess.hpp"
#include "sct/volume.hpp"

namespace sct {

enum class LossMasking { Off, MaskWeighted };

std::string_view to_string(LossMasking v);
LossMasking parse_loss_masking(std::string_view text);

struct TrainConfig {
  std::size_t slices = 3;               // N, odd
  std::size_t samples_per_volume = 64;  // M
  std::size_t batch_size = 4;
  std::size_t epochs = 100;
  std::optional<double> lr0;            // unset: per task/organ default
  double lr_min = 0.0;
  AdamWHyper optimizer;
  double split_ratio = 0.9;
  std::uint64_t seed = 0;
  LossMasking loss_masking = LossMasking::MaskWeighted;
  Task task = Task::MriToCt;
  Organ organ = Organ::Brain;
  double p_low = 1.0;
  double p_high = 99.0;

  bool operator==(const TrainConfig&) const = default;
};

// 1e-3, 5e-4, 1e-4, 5e-5 for MRI/brain, MRI/pelvis, CBCT/brain, CBCT/pelvis.
double default_lr0(Task task, Organ organ);
double effective_lr0(const TrainConfig& config);
LrSchedule schedule_of(const TrainConfig& config);

void validate(const TrainConfig& config);

// Source-side normalization settings for the configured task.
NormalizationParams source_settings(const TrainConfig& config);

void write_config(std::map<std::string, std::string>& out, const TrainConfig& config);
TrainConfig read_config(const std::map<std::string, std::string>& in);

} // namespace sct
