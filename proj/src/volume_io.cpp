#include "sct/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "sct/error.hpp"
#include "sct/text.hpp"

namespace sct {

static_assert(std::endian::native == std::endian::little, "raw voxel I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxHeaderBytes = 64 * 1024;

std::size_t element_size(ElementType type) {
  switch (type) {
    case ElementType::Float: return 4;
    case ElementType::Short: return 2;
    case ElementType::UChar: return 1;
  }
  return 0;
}

ElementType parse_element_type(std::string_view text) {
  if (text == "MET_FLOAT") return ElementType::Float;
  if (text == "MET_SHORT") return ElementType::Short;
  if (text == "MET_UCHAR") return ElementType::UChar;
  fail(ErrorCode::UnsupportedFormat, "element type '" + std::string(text) + "'");
}

template <typename T, std::size_t N>
std::array<T, N> parse_tuple(const std::string& key, std::string_view value) {
  const auto parts = text::split_whitespace(value);
  if (parts.size() != N) fail(ErrorCode::MalformedHeader, key + " needs " + std::to_string(N) + " values");
  std::array<T, N> out{};
  try {
    for (std::size_t i = 0; i < N; ++i) {
      if constexpr (std::is_integral_v<T>) {
        const auto v = text::parse_int(parts[i]);
        if (v <= 0) fail(ErrorCode::MalformedHeader, key + " entries must be positive");
        out[i] = static_cast<T>(v);
      } else {
        out[i] = text::parse_double(parts[i]);
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedHeader) throw;
    fail(ErrorCode::MalformedHeader, key + ": " + e.what());
  }
  return out;
}

struct Header {
  std::map<std::string, std::string> fields;
  std::size_t data_offset = 0;
};

Header parse_header(std::span<const std::uint8_t> bytes) {
  Header header;
  std::size_t pos = 0;
  while (true) {
    if (pos >= bytes.size()) fail(ErrorCode::MalformedHeader, "missing ElementDataFile line");
    if (pos > kMaxHeaderBytes) fail(ErrorCode::MalformedHeader, "header too long");
    const auto* begin = bytes.data() + pos;
    const auto* end = bytes.data() + bytes.size();
    const auto* nl = std::find(begin, end, std::uint8_t{'\n'});
    if (nl == end) fail(ErrorCode::MalformedHeader, "unterminated header line");
    for (const auto* c = begin; c != nl; ++c)
      if (*c == 0 || *c > 0x7e) fail(ErrorCode::MalformedHeader, "non-ASCII header byte");
    std::string_view line(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nl - begin));
    pos += line.size() + 1;
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::MalformedHeader, "line without '=': " + std::string(line));
    std::string key(text::trim(line.substr(0, eq)));
    if (key.empty()) fail(ErrorCode::MalformedHeader, "empty key");
    header.fields[key] = std::string(text::trim(line.substr(eq + 1)));
    if (key == "ElementDataFile") break;
  }
  header.data_offset = pos;
  return header;
}

bool header_flag(const Header& h, const std::string& key) {
  const auto it = h.fields.find(key);
  if (it == h.fields.end()) return false;
  try {
    return text::parse_bool(it->second);
  } catch (const Error&) {
    fail(ErrorCode::MalformedHeader, key + " must be True or False");
  }
}

} // namespace

std::string_view to_string(ElementType type) {
  switch (type) {
    case ElementType::Float: return "MET_FLOAT";
    case ElementType::Short: return "MET_SHORT";
    case ElementType::UChar: return "MET_UCHAR";
  }
  return "?";
}

Volume read_mha(std::span<const std::uint8_t> bytes, Unit unit) {
  const Header h = parse_header(bytes);
  const auto& f = h.fields;
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = f.find(key);
    if (it == f.end()) fail(ErrorCode::MalformedHeader, "missing " + key);
    return it->second;
  };

  if (need("ElementDataFile") != "LOCAL")
    fail(ErrorCode::UnsupportedFormat, "only ElementDataFile = LOCAL is supported");
  std::int64_t ndims = 0;
  try {
    ndims = text::parse_int(need("NDims"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedHeader) throw;
    fail(ErrorCode::MalformedHeader, "NDims is not an integer");
  }
  if (ndims != 3) fail(ErrorCode::UnsupportedFormat, "NDims = " + std::to_string(ndims));
  if (header_flag(h, "CompressedData")) fail(ErrorCode::UnsupportedFormat, "compressed data");
  if (header_flag(h, "BinaryDataByteOrderMSB") || header_flag(h, "ElementByteOrderMSB"))
    fail(ErrorCode::UnsupportedFormat, "big-endian data");
  if (auto it = f.find("ElementNumberOfChannels"); it != f.end() && text::trim(it->second) != "1")
    fail(ErrorCode::UnsupportedFormat, "multi-channel data");

  const auto dims_raw = parse_tuple<std::int64_t, 3>("DimSize", need("DimSize"));
  const ElementType type = parse_element_type(need("ElementType"));
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  if (auto it = f.find("ElementSpacing"); it != f.end()) {
    spacing = parse_tuple<double, 3>("ElementSpacing", it->second);
    for (auto s : spacing)
      if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::MalformedHeader, "ElementSpacing must be positive");
  }
  if (auto it = f.find("Offset"); it != f.end()) origin = parse_tuple<double, 3>("Offset", it->second);

  const std::size_t available = bytes.size() - h.data_offset;
  const std::size_t esize = element_size(type);
  std::size_t count = 1;
  for (auto d : dims_raw) {
    const auto ud = static_cast<std::size_t>(d);
    if (count > available / esize / ud)
      fail(ErrorCode::TruncatedData, "header declares more voxels than the stream holds");
    count *= ud;
  }
  const Dims dims{static_cast<std::size_t>(dims_raw[0]), static_cast<std::size_t>(dims_raw[1]),
                  static_cast<std::size_t>(dims_raw[2])};

  const std::uint8_t* data = bytes.data() + h.data_offset;
  std::vector<float> voxels(count);
  switch (type) {
    case ElementType::Float:
      std::memcpy(voxels.data(), data, count * 4);
      break;
    case ElementType::Short:
      for (std::size_t i = 0; i < count; ++i) {
        std::int16_t v;
        std::memcpy(&v, data + 2 * i, 2);
        voxels[i] = static_cast<float>(v);
      }
      break;
    case ElementType::UChar:
      for (std::size_t i = 0; i < count; ++i) voxels[i] = static_cast<float>(data[i]);
      break;
  }
  return Volume(dims, std::move(voxels), unit, spacing, origin);
}

std::vector<std::uint8_t> write_mha(const Volume& volume, ElementType type) {
  const auto tuple = [](const auto& a) {
    std::string s;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i) s += ' ';
      if constexpr (std::is_integral_v<std::decay_t<decltype(a[0])>>)
        s += std::to_string(a[i]);
      else
        s += text::format_double(a[i]);
    }
    return s;
  };
  std::string header;
  header += "ObjectType = Image\n";
  header += "NDims = 3\n";
  header += "DimSize = " + tuple(volume.dims()) + "\n";
  header += "ElementType = " + std::string(to_string(type)) + "\n";
  header += "ElementSpacing = " + tuple(volume.spacing()) + "\n";
  header += "Offset = " + tuple(volume.origin()) + "\n";
  header += "ElementDataFile = LOCAL\n";

  const auto voxels = volume.voxels();
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t base = out.size();
  out.resize(base + voxels.size() * element_size(type));
  std::uint8_t* data = out.data() + base;

  const auto quantize = [](float v, double lo, double hi) {
    const double r = std::nearbyint(static_cast<double>(v));
    if (!(r >= lo && r <= hi))
      fail(ErrorCode::RangeOverflow, "value " + text::format_float(v) + " outside [" +
                                         text::format_double(lo) + ", " + text::format_double(hi) + "]");
    return r;
  };
  switch (type) {
    case ElementType::Float:
      std::memcpy(data, voxels.data(), voxels.size() * 4);
      break;
    case ElementType::Short:
      for (std::size_t i = 0; i < voxels.size(); ++i) {
        const auto v = static_cast<std::int16_t>(quantize(voxels[i], -32768.0, 32767.0));
        std::memcpy(data + 2 * i, &v, 2);
      }
      break;
    case ElementType::UChar:
      for (std::size_t i = 0; i < voxels.size(); ++i)
        data[i] = static_cast<std::uint8_t>(quantize(voxels[i], 0.0, 255.0));
      break;
  }
  return out;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingPath, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    fail(ErrorCode::IoError, "short read on " + path.string());
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed on " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Volume load_mha(const fs::path& path, Unit unit) { return read_mha(read_file(path), unit); }

Volume load_mask(const fs::path& path) {
  const Volume raw = load_mha(path, Unit::Arbitrary);
  std::vector<float> bin(raw.size());
  std::transform(raw.voxels().begin(), raw.voxels().end(), bin.begin(),
                 [](float v) { return v != 0.0f ? 1.0f : 0.0f; });
  return raw.with_voxels(std::move(bin), Unit::Binary);
}

void save_mha(const fs::path& path, const Volume& volume, ElementType type) {
  write_file(path, write_mha(volume, type));
}

std::vector<CasePaths> discover_cases(const fs::path& directory) {
  if (!fs::is_directory(directory)) fail(ErrorCode::MissingPath, "not a directory: " + directory.string());
  constexpr std::string_view suffix = "_source.mha";
  std::vector<CasePaths> cases;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() <= suffix.size() || !name.ends_with(suffix)) continue;
    CasePaths c;
    c.case_id = name.substr(0, name.size() - suffix.size());
    c.source = entry.path();
    c.mask = directory / (c.case_id + "_mask.mha");
    if (auto ct = directory / (c.case_id + "_ct.mha"); fs::exists(ct)) c.ct = ct;
    cases.push_back(std::move(c));
  }
  std::sort(cases.begin(), cases.end(),
            [](const CasePaths& a, const CasePaths& b) { return a.case_id < b.case_id; });
  return cases;
}

CaseRecord load_case(const CasePaths& paths, Task task, Organ organ) {
  Volume source = load_mha(paths.source, source_unit(task));
  std::optional<Volume> target;
  if (paths.ct) target = load_mha(*paths.ct, Unit::HU);
  Volume mask = load_mask(paths.mask);
  return validate_case(paths.case_id, std::move(source), std::move(target), std::move(mask), task, organ);
}

void save_case(const fs::path& directory, const CaseRecord& record) {
  fs::create_directories(directory);
  save_mha(directory / (record.case_id + "_source.mha"), record.source);
  if (record.target) save_mha(directory / (record.case_id + "_ct.mha"), *record.target);
  save_mha(directory / (record.case_id + "_mask.mha"), record.mask, ElementType::UChar);
}

} // namespace sct
