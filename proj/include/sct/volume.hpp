#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sct {

enum class Unit { HU, Arbitrary, Binary };

using Dims = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;

// A 3D scalar field stored x-fastest, z-slowest: voxel (x, y, z) lives at
// x + nx * (y + ny * z). Immutable once constructed.
class Volume {
public:
  Volume(Dims dims, std::vector<float> voxels, Unit unit = Unit::Arbitrary,
         Vec3 spacing = {1.0, 1.0, 1.0}, Vec3 origin = {0.0, 0.0, 0.0});

  static Volume filled(Dims dims, float value, Unit unit = Unit::Arbitrary,
                       Vec3 spacing = {1.0, 1.0, 1.0}, Vec3 origin = {0.0, 0.0, 0.0});

  const Dims& dims() const noexcept { return dims_; }
  std::size_t nx() const noexcept { return dims_[0]; }
  std::size_t ny() const noexcept { return dims_[1]; }
  std::size_t nz() const noexcept { return dims_[2]; }
  std::size_t size() const noexcept { return voxels_.size(); }
  std::size_t slice_size() const noexcept { return dims_[0] * dims_[1]; }

  const Vec3& spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }
  Unit unit() const noexcept { return unit_; }

  std::span<const float> voxels() const noexcept { return voxels_; }
  std::span<const float> slice(std::size_t z) const;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_[0] * (y + dims_[1] * z);
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return voxels_[index(x, y, z)];
  }

  // Same geometry, new contents.
  Volume with_voxels(std::vector<float> voxels, Unit unit) const;

  bool operator==(const Volume&) const = default;

private:
  Dims dims_;
  Vec3 spacing_;
  Vec3 origin_;
  Unit unit_;
  std::vector<float> voxels_;
};

std::string_view to_string(Unit unit);

enum class Task { MriToCt, CbctToCt };
enum class Organ { Brain, Pelvis };

std::string_view to_string(Task task);
std::string_view to_string(Organ organ);
Task parse_task(std::string_view text);
Organ parse_organ(std::string_view text);

// Unit a source volume must carry for the given task.
Unit source_unit(Task task);

struct CaseRecord {
  std::string case_id;
  Volume source;
  std::optional<Volume> target;
  Volume mask;
  Task task = Task::MriToCt;
  Organ organ = Organ::Brain;
};

bool same_dims(const Volume& a, const Volume& b) noexcept;
std::size_t count_nonzero(const Volume& v) noexcept;

// Builds a CaseRecord after checking that all volumes share dims and that the
// mask selects at least one voxel.
CaseRecord validate_case(std::string case_id, Volume source, std::optional<Volume> target,
                         Volume mask, Task task, Organ organ);

} // namespace sct
