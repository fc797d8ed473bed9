#pragma once

#include <map>
#include <string>

#include "sct/volume.hpp"

namespace sct {

enum class NormalizationKind { PercentileLinear, HUWindow };

inline constexpr double kHuMin = -1024.0;
inline constexpr double kHuMax = 3071.0;

// Intensity mapping onto [0, 1]. PercentileLinear landmarks are fitted per
// volume from masked percentiles; HUWindow uses the fixed window bounds.
struct NormalizationParams {
  NormalizationKind kind = NormalizationKind::HUWindow;
  double p_low = 1.0;
  double p_high = 99.0;
  double hu_min = kHuMin;
  double hu_max = kHuMax;
  double fitted_low = kHuMin;
  double fitted_high = kHuMax;
  bool fitted = true;

  bool operator==(const NormalizationParams&) const = default;
};

NormalizationParams hu_window(double hu_min = kHuMin, double hu_max = kHuMax);
// Settings only; landmarks are filled in by fit_percentile_linear.
NormalizationParams percentile_settings(double p_low = 1.0, double p_high = 99.0);

// Percentile of sorted values with linear interpolation between order
// statistics (rank = p/100 * (n - 1)).
double percentile_sorted(std::span<const float> sorted, double p);

NormalizationParams fit_percentile_linear(const Volume& volume, const Volume& mask,
                                          double p_low = 1.0, double p_high = 99.0);
// Refits landmarks for PercentileLinear settings; HUWindow passes through.
NormalizationParams refit(const NormalizationParams& settings, const Volume& volume, const Volume& mask);

float normalize_value(float value, const NormalizationParams& params);
Volume apply_normalization(const Volume& volume, const NormalizationParams& params);

float denormalize_value(float value, double hu_min = kHuMin, double hu_max = kHuMax);
Volume denormalize_to_hu(const Volume& volume, double hu_min = kHuMin, double hu_max = kHuMax);

// Serialization into `prefix.key = value` manifest entries.
void write_params(std::map<std::string, std::string>& out, const std::string& prefix,
                  const NormalizationParams& params);
NormalizationParams read_params(const std::map<std::string, std::string>& in, const std::string& prefix);

} // namespace sct
