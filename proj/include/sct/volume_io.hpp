#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sct/volume.hpp"

namespace sct {

enum class ElementType { Float, Short, UChar };

std::string_view to_string(ElementType type);

// Parses the uncompressed, LOCAL-data, 3D MetaImage subset. The unit is not
// part of the format and is supplied by the caller.
Volume read_mha(std::span<const std::uint8_t> bytes, Unit unit = Unit::Arbitrary);

// Canonical header (ObjectType, NDims, DimSize, ElementType, ElementSpacing,
// Offset, ElementDataFile) followed by little-endian voxel data.
std::vector<std::uint8_t> write_mha(const Volume& volume, ElementType type = ElementType::Float);

Volume load_mha(const std::filesystem::path& path, Unit unit = Unit::Arbitrary);
// Reads a mask file; any nonzero voxel becomes 1.
Volume load_mask(const std::filesystem::path& path);
void save_mha(const std::filesystem::path& path, const Volume& volume,
              ElementType type = ElementType::Float);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

// Case directory layout: <prefix>_source.mha, <prefix>_ct.mha (optional),
// <prefix>_mask.mha.
struct CasePaths {
  std::string case_id;
  std::filesystem::path source;
  std::optional<std::filesystem::path> ct;
  std::filesystem::path mask;
};

std::vector<CasePaths> discover_cases(const std::filesystem::path& directory);
CaseRecord load_case(const CasePaths& paths, Task task, Organ organ);
void save_case(const std::filesystem::path& directory, const CaseRecord& record);

} // namespace sct
