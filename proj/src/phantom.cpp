#include "sct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "sct/error.hpp"

namespace sct {

namespace {

double normalized(std::size_t i, std::size_t n) {
  return 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n) - 1.0;
}

std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

} // namespace

PhantomSpec default_phantom(SourceMode mode) {
  PhantomSpec s;
  s.mode = mode;
  if (mode == SourceMode::Cbct) s.source_noise = 20.0;
  s.classes = {
      {"skin", {{0.0, 0.0, 0.0}, {0.88, 0.92, 1.25}, 0.0}, 20.0f, 0.55f},
      {"skull", {{0.0, 0.0, 0.0}, {0.80, 0.84, 1.18}, 0.0}, 1000.0f, 0.12f},
      {"brain", {{0.0, 0.0, 0.0}, {0.70, 0.75, 1.10}, 0.0}, 40.0f, 0.70f},
      {"ventricle_l", {{-0.18, 0.05, 0.0}, {0.10, 0.28, 0.55}, 0.3}, 5.0f, 0.95f},
      {"ventricle_r", {{0.18, 0.05, 0.0}, {0.10, 0.28, 0.55}, -0.3}, 5.0f, 0.95f},
      {"lesion", {{0.32, -0.38, 0.25}, {0.13, 0.13, 0.35}, 0.0}, 70.0f, 0.32f},
      {"air_cavity", {{0.0, 0.62, -0.30}, {0.14, 0.09, 0.30}, 0.0}, -900.0f, 0.02f},
      {"dense_bone", {{-0.45, -0.15, -0.40}, {0.09, 0.09, 0.25}, 0.4}, 1500.0f, 0.06f},
  };
  return s;
}

void validate(const PhantomSpec& s) {
  if (s.classes.empty()) fail(ErrorCode::InvalidSpec, "phantom needs at least one tissue class");
  if (s.classes.size() > 254) fail(ErrorCode::InvalidSpec, "too many tissue classes");
  for (auto d : s.dims)
    if (d == 0) fail(ErrorCode::InvalidSpec, "phantom dims must be positive");
  const auto in_window = [](double hu) { return hu >= -1024.0 && hu <= 3071.0; };
  if (!in_window(s.background_hu)) fail(ErrorCode::InvalidSpec, "background HU outside [-1024, 3071]");
  for (const auto& c : s.classes) {
    if (!in_window(c.hu)) fail(ErrorCode::InvalidSpec, c.name + ": HU outside [-1024, 3071]");
    for (auto r : c.shape.radii)
      if (!(r > 0.0)) fail(ErrorCode::InvalidSpec, c.name + ": radii must be positive");
  }
  if (s.ct_noise < 0.0 || s.source_noise < 0.0 || s.bias_amplitude < 0.0 || s.bias_amplitude >= 1.0)
    fail(ErrorCode::InvalidSpec, "noise sigmas must be >= 0 and bias amplitude in [0, 1)");
}

bool inside(const Ellipsoid& e, const Dims& dims, std::size_t x, std::size_t y, std::size_t z) {
  const double u = normalized(x, dims[0]) - e.center[0];
  const double v = normalized(y, dims[1]) - e.center[1];
  const double w = normalized(z, dims[2]) - e.center[2];
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double ur = c * u + s * v;
  const double vr = -s * u + c * v;
  const double q = (ur / e.radii[0]) * (ur / e.radii[0]) + (vr / e.radii[1]) * (vr / e.radii[1]) +
                   (w / e.radii[2]) * (w / e.radii[2]);
  return q <= 1.0;
}

std::vector<std::uint8_t> label_map(const PhantomSpec& spec) {
  validate(spec);
  const auto& d = spec.dims;
  std::vector<std::uint8_t> labels(d[0] * d[1] * d[2], 0);
  for (std::size_t k = 0; k < spec.classes.size(); ++k)
    for (std::size_t z = 0; z < d[2]; ++z)
      for (std::size_t y = 0; y < d[1]; ++y)
        for (std::size_t x = 0; x < d[0]; ++x)
          if (inside(spec.classes[k].shape, d, x, y, z)) labels[x + d[0] * (y + d[1] * z)] = static_cast<std::uint8_t>(k + 1);
  return labels;
}

CaseRecord generate(const PhantomSpec& spec) {
  const auto labels = label_map(spec);
  const auto& d = spec.dims;
  const std::size_t n = labels.size();
  auto noise_rng = rng_for(spec.seed, 1);
  auto field_rng = rng_for(spec.seed, 2);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> signed_unit(-1.0, 1.0);

  const double px = phase(field_rng), py = phase(field_rng), pz = phase(field_rng);
  const double shift = spec.cbct_shift * signed_unit(field_rng);

  std::vector<float> ct(n), source(n), mask(n);
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const std::size_t i = x + d[0] * (y + d[1] * z);
        const std::uint8_t label = labels[i];
        const double hu = label ? spec.classes[label - 1].hu : spec.background_hu;
        const double intensity = label ? spec.classes[label - 1].intensity : spec.background_intensity;
        const double ct_value = std::clamp(hu + spec.ct_noise * unit_normal(noise_rng), -1024.0, 3071.0);
        ct[i] = static_cast<float>(ct_value);
        mask[i] = label ? 1.0f : 0.0f;
        const double u = normalized(x, d[0]), v = normalized(y, d[1]), w = normalized(z, d[2]);
        if (spec.mode == SourceMode::Mri) {
          const double bias = 1.0 + spec.bias_amplitude * std::sin(0.5 * std::numbers::pi * u + px) *
                                        std::cos(0.5 * std::numbers::pi * v + py) *
                                        std::cos(0.25 * std::numbers::pi * w + pz);
          source[i] = static_cast<float>(intensity * bias + spec.source_noise * unit_normal(noise_rng));
        } else {
          const double cupping = spec.cbct_shading * (1.0 - std::min(1.0, u * u + v * v));
          const double value = ct_value + shift - cupping + spec.source_noise * unit_normal(noise_rng);
          source[i] = static_cast<float>(std::clamp(value, -1024.0, 3071.0));
        }
      }

  const Task task = spec.mode == SourceMode::Mri ? Task::MriToCt : Task::CbctToCt;
  Volume src(d, std::move(source), source_unit(task), spec.spacing);
  Volume ct_vol(d, std::move(ct), Unit::HU, spec.spacing);
  Volume mask_vol(d, std::move(mask), Unit::Binary, spec.spacing);
  return validate_case(spec.case_id, std::move(src), std::move(ct_vol), std::move(mask_vol), task, spec.organ);
}

PhantomSpec cohort_member(std::size_t index, const PhantomSpec& base, std::uint64_t seed, double jitter) {
  PhantomSpec s = base;
  char id[32];
  std::snprintf(id, sizeof(id), "case_%03zu", index);
  s.case_id = id;
  s.seed = seed ^ ((static_cast<std::uint64_t>(index) + 1) * 0x9e3779b97f4a7c15ull);
  auto rng = rng_for(seed, 1000 + index);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& c : s.classes) {
    for (auto& v : c.shape.center) v += jitter * u(rng);
    for (auto& r : c.shape.radii) r *= 1.0 + jitter * u(rng);
    c.shape.angle += jitter * u(rng);
  }
  return s;
}

std::vector<CaseRecord> generate_cohort(std::size_t n, const PhantomSpec& base, std::uint64_t seed, double jitter) {
  if (n < 1) fail(ErrorCode::InvalidSpec, "cohort size must be >= 1");
  if (jitter < 0.0 || jitter >= 0.5) fail(ErrorCode::InvalidSpec, "jitter must lie in [0, 0.5)");
  validate(base);
  std::vector<CaseRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate(cohort_member(i, base, seed, jitter)));
  return out;
}

} // namespace sct
