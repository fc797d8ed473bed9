#include "sct/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "sct/error.hpp"
#include "sct/text.hpp"

namespace sct {

NormalizationParams hu_window(double hu_min, double hu_max) {
  if (!(hu_min < hu_max)) fail(ErrorCode::InvalidArgument, "HU window needs hu_min < hu_max");
  NormalizationParams p;
  p.kind = NormalizationKind::HUWindow;
  p.hu_min = hu_min;
  p.hu_max = hu_max;
  p.fitted_low = hu_min;
  p.fitted_high = hu_max;
  p.fitted = true;
  return p;
}

NormalizationParams percentile_settings(double p_low, double p_high) {
  if (!(p_low >= 0.0 && p_high <= 100.0 && p_low < p_high))
    fail(ErrorCode::InvalidArgument, "percentiles need 0 <= p_low < p_high <= 100");
  NormalizationParams p;
  p.kind = NormalizationKind::PercentileLinear;
  p.p_low = p_low;
  p.p_high = p_high;
  p.fitted_low = 0.0;
  p.fitted_high = 0.0;
  p.fitted = false;
  return p;
}

double percentile_sorted(std::span<const float> sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::EmptyMask, "percentile of an empty set");
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - sorted[lo]);
}

NormalizationParams fit_percentile_linear(const Volume& volume, const Volume& mask, double p_low,
                                          double p_high) {
  NormalizationParams params = percentile_settings(p_low, p_high);
  if (volume.unit() != Unit::Arbitrary)
    fail(ErrorCode::InvalidArgument, "percentile normalization expects an Arbitrary-unit volume");
  if (!same_dims(volume, mask)) fail(ErrorCode::DimMismatch, "volume and mask dims differ");
  std::vector<float> values;
  const auto v = volume.voxels();
  const auto m = mask.voxels();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (m[i] != 0.0f) values.push_back(v[i]);
  if (values.empty()) fail(ErrorCode::EmptyMask, "mask selects no voxel");
  std::sort(values.begin(), values.end());
  params.fitted_low = percentile_sorted(values, p_low);
  params.fitted_high = percentile_sorted(values, p_high);
  if (!(params.fitted_low < params.fitted_high))
    fail(ErrorCode::DegenerateIntensity, "masked intensities are constant between the percentiles");
  params.fitted = true;
  return params;
}

NormalizationParams refit(const NormalizationParams& settings, const Volume& volume, const Volume& mask) {
  if (settings.kind == NormalizationKind::HUWindow) return settings;
  return fit_percentile_linear(volume, mask, settings.p_low, settings.p_high);
}

float normalize_value(float value, const NormalizationParams& params) {
  if (!params.fitted) fail(ErrorCode::UnfittedParams, "normalization landmarks not fitted");
  const double lo = params.kind == NormalizationKind::HUWindow ? params.hu_min : params.fitted_low;
  const double hi = params.kind == NormalizationKind::HUWindow ? params.hu_max : params.fitted_high;
  const double t = (static_cast<double>(value) - lo) / (hi - lo);
  return static_cast<float>(std::clamp(t, 0.0, 1.0));
}

Volume apply_normalization(const Volume& volume, const NormalizationParams& params) {
  if (!params.fitted) fail(ErrorCode::UnfittedParams, "normalization landmarks not fitted");
  std::vector<float> out(volume.size());
  const auto v = volume.voxels();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = normalize_value(v[i], params);
  return volume.with_voxels(std::move(out), Unit::Arbitrary);
}

float denormalize_value(float value, double hu_min, double hu_max) {
  return static_cast<float>(hu_min + static_cast<double>(value) * (hu_max - hu_min));
}

Volume denormalize_to_hu(const Volume& volume, double hu_min, double hu_max) {
  std::vector<float> out(volume.size());
  const auto v = volume.voxels();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = denormalize_value(v[i], hu_min, hu_max);
  return volume.with_voxels(std::move(out), Unit::HU);
}

void write_params(std::map<std::string, std::string>& out, const std::string& prefix,
                  const NormalizationParams& p) {
  out[prefix + ".kind"] = p.kind == NormalizationKind::HUWindow ? "HUWindow" : "PercentileLinear";
  out[prefix + ".p_low"] = text::format_double(p.p_low);
  out[prefix + ".p_high"] = text::format_double(p.p_high);
  out[prefix + ".hu_min"] = text::format_double(p.hu_min);
  out[prefix + ".hu_max"] = text::format_double(p.hu_max);
  out[prefix + ".fitted_low"] = text::format_double(p.fitted_low);
  out[prefix + ".fitted_high"] = text::format_double(p.fitted_high);
  out[prefix + ".fitted"] = p.fitted ? "true" : "false";
}

NormalizationParams read_params(const std::map<std::string, std::string>& in, const std::string& prefix) {
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = in.find(prefix + "." + key);
    if (it == in.end()) fail(ErrorCode::CorruptCheckpoint, "missing " + prefix + "." + key);
    return it->second;
  };
  NormalizationParams p;
  const auto& kind = get("kind");
  if (kind == "HUWindow")
    p.kind = NormalizationKind::HUWindow;
  else if (kind == "PercentileLinear")
    p.kind = NormalizationKind::PercentileLinear;
  else
    fail(ErrorCode::CorruptCheckpoint, "unknown normalization kind " + kind);
  p.p_low = text::parse_double(get("p_low"));
  p.p_high = text::parse_double(get("p_high"));
  p.hu_min = text::parse_double(get("hu_min"));
  p.hu_max = text::parse_double(get("hu_max"));
  p.fitted_low = text::parse_double(get("fitted_low"));
  p.fitted_high = text::parse_double(get("fitted_high"));
  p.fitted = text::parse_bool(get("fitted"));
  return p;
}

} // namespace sct
