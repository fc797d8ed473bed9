#include "sct/checkpoint.hpp"

#include <cstring>
#include <string_view>

#include "sct/error.hpp"
#include "sct/text.hpp"
#include "sct/volume_io.hpp"

namespace sct {

namespace {

constexpr std::string_view kMagic = "SCT25D-CHECKPOINT 1\n";
constexpr std::string_view kLengthKey = "manifest_bytes = ";

std::string tensor_key(std::size_t i, const char* field) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tensor.%04zu.", i);
  return std::string(buf) + field;
}

struct Parsed {
  std::map<std::string, std::string> manifest;
  std::size_t data_offset = 0;
};

Parsed parse(std::span<const std::uint8_t> bytes) {
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!all.starts_with(kMagic)) fail(ErrorCode::CorruptCheckpoint, "bad magic");
  std::size_t pos = kMagic.size();
  const auto nl = all.find('\n', pos);
  if (nl == std::string_view::npos || all.substr(pos, kLengthKey.size()) != kLengthKey)
    fail(ErrorCode::CorruptCheckpoint, "missing manifest length");
  std::uint64_t length = 0;
  try {
    length = text::parse_uint(all.substr(pos + kLengthKey.size(), nl - pos - kLengthKey.size()));
  } catch (const Error&) {
    fail(ErrorCode::CorruptCheckpoint, "bad manifest length");
  }
  pos = nl + 1;
  if (length > all.size() - pos) fail(ErrorCode::CorruptCheckpoint, "manifest truncated");
  Parsed p;
  try {
    p.manifest = text::parse_key_values(all.substr(pos, length));
  } catch (const Error& e) {
    fail(ErrorCode::CorruptCheckpoint, std::string("manifest: ") + e.what());
  }
  p.data_offset = pos + length;
  return p;
}

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  std::map<std::string, std::string> m;
  write_spec(m, ck.model.spec());
  write_params(m, "norm.source", ck.source_norm);
  write_params(m, "norm.target", ck.target_norm);
  write_config(m, ck.config);
  m["epoch"] = std::to_string(ck.epoch);
  m["val_loss"] = text::format_double(ck.val_loss);
  const auto& params = ck.model.named_parameters();
  m["tensor.count"] = std::to_string(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[tensor_key(i, "name")] = params[i].first;
    std::string shape;
    for (auto d : params[i].second.shape()) shape += (shape.empty() ? "" : " ") + std::to_string(d);
    m[tensor_key(i, "shape")] = shape;
  }
  std::string manifest;
  for (const auto& [k, v] : m) manifest += k + " = " + v + "\n";

  std::string head(kMagic);
  head += std::string(kLengthKey) + std::to_string(manifest.size()) + "\n" + manifest;
  std::vector<std::uint8_t> out(head.begin(), head.end());
  for (const auto& [name, t] : params) {
    const std::size_t base = out.size();
    out.resize(base + t.numel() * sizeof(float));
    std::memcpy(out.data() + base, t.values().data(), t.numel() * sizeof(float));
  }
  return out;
}

std::map<std::string, std::string> checkpoint_manifest(std::span<const std::uint8_t> bytes) {
  return parse(bytes).manifest;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  const Parsed p = parse(bytes);
  const auto& m = p.manifest;
  try {
    const ModelSpec spec = read_spec(m);
    const auto layout = parameter_layout(spec);
    const auto count = static_cast<std::size_t>(text::parse_int(m.at("tensor.count")));
    if (count != layout.size()) fail(ErrorCode::CorruptCheckpoint, "tensor count does not match spec");
    std::size_t offset = p.data_offset;
    std::vector<std::pair<std::string, ad::Tensor<float>>> params;
    for (std::size_t i = 0; i < count; ++i) {
      const std::string& name = m.at(tensor_key(i, "name"));
      ad::Shape shape;
      for (auto part : text::split_whitespace(m.at(tensor_key(i, "shape"))))
        shape.push_back(static_cast<std::size_t>(text::parse_int(part)));
      if (name != layout[i].first || shape != layout[i].second)
        fail(ErrorCode::CorruptCheckpoint, "tensor " + name + " does not match the model layout");
      const std::size_t n = ad::numel(shape);
      if (n * sizeof(float) > bytes.size() - offset)
        fail(ErrorCode::CorruptCheckpoint, "tensor data truncated at " + name);
      std::vector<float> values(n);
      std::memcpy(values.data(), bytes.data() + offset, n * sizeof(float));
      offset += n * sizeof(float);
      params.emplace_back(name, ad::Tensor<float>::from(shape, std::move(values), true));
    }
    if (offset != bytes.size()) fail(ErrorCode::CorruptCheckpoint, "trailing bytes after tensor data");
    Checkpoint ck{Model<float>(spec, std::move(params)), read_params(m, "norm.source"),
                  read_params(m, "norm.target"), read_config(m), 0, 0.0};
    ck.epoch = static_cast<std::size_t>(text::parse_int(m.at("epoch")));
    ck.val_loss = text::parse_double(m.at("val_loss"));
    return ck;
  } catch (const std::out_of_range&) {
    fail(ErrorCode::CorruptCheckpoint, "manifest is missing a required entry");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    fail(ErrorCode::CorruptCheckpoint, e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

std::string content_hash(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace sct
