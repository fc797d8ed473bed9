#include "sct/inference.hpp"

#include <chrono>

#include <json.hpp>

#include "sct/error.hpp"
#include "sct/pipeline.hpp"
#include "sct/text.hpp"
#include "sct/volume_io.hpp"

namespace sct {

namespace fs = std::filesystem;

SynthesisResult synthesize(const Checkpoint& ck, const Volume& source, const std::optional<Volume>& mask,
                           const SynthesisOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Task task = ck.config.task;
  if (source.unit() != source_unit(task))
    fail(ErrorCode::TaskMismatch, "source unit " + std::string(to_string(source.unit())) + " does not fit task " +
                                      std::string(to_string(task)));
  if (mask && !same_dims(source, *mask)) fail(ErrorCode::DimMismatch, "source and mask dims differ");

  NormalizationParams norm = ck.source_norm;
  if (norm.kind == NormalizationKind::PercentileLinear) {
    // Landmarks come from the incoming volume; without a mask, all voxels count.
    const Volume fit_mask = mask ? *mask : Volume::filled(source.dims(), 1.0f, Unit::Binary);
    norm = refit(norm, source, fit_mask);
  }
  const Volume normalized = apply_normalization(source, norm);
  auto voxels = predict_normalized(ck.model, normalized, ck.config.slices, options.batch_size);
  const double hu_min = ck.target_norm.hu_min, hu_max = ck.target_norm.hu_max;
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    if (mask && mask->voxels()[i] == 0.0f)
      voxels[i] = options.outside_fill;
    else
      voxels[i] = denormalize_value(voxels[i], hu_min, hu_max);
  }
  SynthesisResult r{source.with_voxels(std::move(voxels), Unit::HU), 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

BatchReport batch_predict(const fs::path& checkpoint_path, const fs::path& case_dir, const fs::path& out_dir,
                          const SynthesisOptions& options) {
  const auto bytes = read_file(checkpoint_path);
  const Checkpoint ck = deserialize_checkpoint(bytes);
  BatchReport report;
  report.checkpoint_hash = content_hash(bytes);
  const auto cases = discover_cases(case_dir);
  fs::create_directories(out_dir);

  for (const auto& c : cases) {
    try {
      const Volume source = load_mha(c.source, source_unit(ck.config.task));
      std::optional<Volume> mask;
      if (fs::exists(c.mask)) mask = load_mask(c.mask);
      const auto result = synthesize(ck, source, mask, options);
      const fs::path out = out_dir / (c.case_id + "_sct.mha");
      save_mha(out, result.sct);
      report.written.push_back(out.filename().string());
    } catch (const std::exception& e) {
      report.failures.push_back({c.case_id, e.what()});
    }
  }

  nlohmann::ordered_json manifest;
  manifest["checkpoint"] = checkpoint_path.filename().string();
  manifest["checkpoint_hash"] = report.checkpoint_hash;
  manifest["task"] = std::string(to_string(ck.config.task));
  manifest["organ"] = std::string(to_string(ck.config.organ));
  manifest["slices"] = ck.config.slices;
  manifest["normalization"] = {
      {"source_kind", ck.source_norm.kind == NormalizationKind::HUWindow ? "HUWindow" : "PercentileLinear"},
      {"p_low", ck.source_norm.p_low},
      {"p_high", ck.source_norm.p_high},
      {"hu_min", ck.target_norm.hu_min},
      {"hu_max", ck.target_norm.hu_max},
  };
  manifest["outside_fill"] = options.outside_fill;
  manifest["outputs"] = report.written;
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : report.failures) failures.push_back({{"case_id", f.case_id}, {"error", f.message}});
  manifest["failures"] = failures;
  write_text(out_dir / "predict_manifest.json", manifest.dump(2) + "\n");
  return report;
}

} // namespace sct
