#include "sct/volume.hpp"

#include <algorithm>
#include <cmath>

#include "sct/error.hpp"

namespace sct {

namespace {

std::string dims_string(const Dims& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

} // namespace

Volume::Volume(Dims dims, std::vector<float> voxels, Unit unit, Vec3 spacing, Vec3 origin)
    : dims_(dims), spacing_(spacing), origin_(origin), unit_(unit), voxels_(std::move(voxels)) {
  for (auto d : dims_)
    if (d == 0) fail(ErrorCode::InvalidVolume, "zero extent in dims " + dims_string(dims_));
  if (voxels_.size() != dims_[0] * dims_[1] * dims_[2])
    fail(ErrorCode::InvalidVolume, "voxel count " + std::to_string(voxels_.size()) +
                                       " does not match dims " + dims_string(dims_));
  for (auto s : spacing_)
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::InvalidVolume, "spacing must be positive");
  if (unit_ == Unit::Binary &&
      !std::all_of(voxels_.begin(), voxels_.end(), [](float v) { return v == 0.0f || v == 1.0f; }))
    fail(ErrorCode::InvalidVolume, "binary volume holds values other than 0 and 1");
}

Volume Volume::filled(Dims dims, float value, Unit unit, Vec3 spacing, Vec3 origin) {
  return Volume(dims, std::vector<float>(dims[0] * dims[1] * dims[2], value), unit, spacing, origin);
}

std::span<const float> Volume::slice(std::size_t z) const {
  if (z >= dims_[2]) fail(ErrorCode::OutOfRange, "slice index " + std::to_string(z));
  return std::span<const float>(voxels_).subspan(z * slice_size(), slice_size());
}

Volume Volume::with_voxels(std::vector<float> voxels, Unit unit) const {
  return Volume(dims_, std::move(voxels), unit, spacing_, origin_);
}

std::string_view to_string(Unit unit) {
  switch (unit) {
    case Unit::HU: return "HU";
    case Unit::Arbitrary: return "Arbitrary";
    case Unit::Binary: return "Binary";
  }
  return "?";
}

std::string_view to_string(Task task) {
  return task == Task::MriToCt ? "MRI-to-sCT" : "CBCT-to-sCT";
}

std::string_view to_string(Organ organ) { return organ == Organ::Brain ? "brain" : "pelvis"; }

Task parse_task(std::string_view text) {
  if (text == "MRI-to-sCT" || text == "mri") return Task::MriToCt;
  if (text == "CBCT-to-sCT" || text == "cbct") return Task::CbctToCt;
  fail(ErrorCode::InvalidArgument, "unknown task '" + std::string(text) + "'");
}

Organ parse_organ(std::string_view text) {
  if (text == "brain") return Organ::Brain;
  if (text == "pelvis") return Organ::Pelvis;
  fail(ErrorCode::InvalidArgument, "unknown organ '" + std::string(text) + "'");
}

Unit source_unit(Task task) { return task == Task::MriToCt ? Unit::Arbitrary : Unit::HU; }

bool same_dims(const Volume& a, const Volume& b) noexcept { return a.dims() == b.dims(); }

std::size_t count_nonzero(const Volume& v) noexcept {
  return static_cast<std::size_t>(
      std::count_if(v.voxels().begin(), v.voxels().end(), [](float x) { return x != 0.0f; }));
}

CaseRecord validate_case(std::string case_id, Volume source, std::optional<Volume> target,
                         Volume mask, Task task, Organ organ) {
  if (!same_dims(source, mask))
    fail(ErrorCode::DimMismatch, case_id + ": source " + dims_string(source.dims()) + " vs mask " +
                                     dims_string(mask.dims()));
  if (target && !same_dims(source, *target))
    fail(ErrorCode::DimMismatch, case_id + ": source " + dims_string(source.dims()) +
                                     " vs target " + dims_string(target->dims()));
  if (count_nonzero(mask) == 0) fail(ErrorCode::EmptyMask, case_id + ": mask selects no voxel");
  return CaseRecord{std::move(case_id), std::move(source), std::move(target), std::move(mask), task,
                    organ};
}

} // namespace sct
