#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sct/volume.hpp"

namespace sct {

// Axis-aligned ellipsoid rotated about z, in normalized coordinates where
// the volume spans [-1, 1] along every axis (voxel centers at
// 2 (i + 0.5) / n - 1).
struct Ellipsoid {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 radii{0.5, 0.5, 0.5};
  double angle = 0.0;  // radians, about z
};

struct TissueClass {
  std::string name;
  Ellipsoid shape;
  float hu = 0.0f;
  float intensity = 0.0f;  // MRI-like source value
};

enum class SourceMode { Mri, Cbct };

struct PhantomSpec {
  std::string case_id = "phantom";
  Dims dims{64, 64, 16};
  Vec3 spacing{1.0, 1.0, 2.5};
  std::uint64_t seed = 0;
  std::vector<TissueClass> classes;  // later classes overwrite earlier ones
  float background_hu = -1024.0f;
  float background_intensity = 0.0f;
  double bias_amplitude = 0.15;   // multiplicative MRI bias field
  double ct_noise = 15.0;         // HU
  double source_noise = 0.02;     // MRI units, or HU in CBCT mode
  double cbct_shading = 80.0;     // HU, radial cupping amplitude
  double cbct_shift = 40.0;       // HU, max global offset
  SourceMode mode = SourceMode::Mri;
  Organ organ = Organ::Brain;
};

// Head-like default: skin, skull, brain, ventricles, a lesion, an air
// cavity and dense bone; MRI intensities deliberately non-monotone in HU.
PhantomSpec default_phantom(SourceMode mode = SourceMode::Mri);

void validate(const PhantomSpec& spec);

bool inside(const Ellipsoid& e, const Dims& dims, std::size_t x, std::size_t y, std::size_t z);

// Per-voxel label: 0 background, k + 1 for class k.
std::vector<std::uint8_t> label_map(const PhantomSpec& spec);

CaseRecord generate(const PhantomSpec& spec);

// Per-index jitter of ellipsoid centers (+/- jitter), radii (x (1 +/- jitter))
// and angles (+/- jitter rad); ids case_000, case_001, ...
std::vector<CaseRecord> generate_cohort(std::size_t n, const PhantomSpec& base, std::uint64_t seed,
                                        double jitter = 0.05);

PhantomSpec cohort_member(std::size_t index, const PhantomSpec& base, std::uint64_t seed, double jitter);

} // namespace sct
