#include "sct/train_config.hpp"

#include "sct/error.hpp"
#include "sct/text.hpp"

namespace sct {

std::string_view to_string(LossMasking v) { return v == LossMasking::Off ? "off" : "mask-weighted"; }

LossMasking parse_loss_masking(std::string_view t) {
  if (t == "off") return LossMasking::Off;
  if (t == "mask-weighted") return LossMasking::MaskWeighted;
  fail(ErrorCode::InvalidArgument, "unknown loss masking '" + std::string(t) + "'");
}

double default_lr0(Task task, Organ organ) {
  if (task == Task::MriToCt) return organ == Organ::Brain ? 1e-3 : 5e-4;
  return organ == Organ::Brain ? 1e-4 : 5e-5;
}

double effective_lr0(const TrainConfig& c) { return c.lr0.value_or(default_lr0(c.task, c.organ)); }

LrSchedule schedule_of(const TrainConfig& c) { return LrSchedule{effective_lr0(c), c.lr_min, c.epochs}; }

void validate(const TrainConfig& c) {
  if (c.slices < 1 || c.slices % 2 == 0) fail(ErrorCode::InvalidArgument, "slices (N) must be odd");
  if (c.samples_per_volume < 1) fail(ErrorCode::InvalidArgument, "samples_per_volume (M) must be >= 1");
  if (c.batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0))
    fail(ErrorCode::InvalidArgument, "split_ratio must lie in (0, 1)");
  validate(schedule_of(c));
  const auto& o = c.optimizer;
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0 && o.beta2 >= 0.0 && o.beta2 < 1.0 && o.eps > 0.0 &&
        o.weight_decay >= 0.0))
    fail(ErrorCode::InvalidArgument, "invalid AdamW hyperparameters");
  percentile_settings(c.p_low, c.p_high);
}

NormalizationParams source_settings(const TrainConfig& c) {
  return c.task == Task::MriToCt ? percentile_settings(c.p_low, c.p_high) : hu_window();
}

void write_config(std::map<std::string, std::string>& out, const TrainConfig& c) {
  out["train.slices"] = std::to_string(c.slices);
  out["train.samples_per_volume"] = std::to_string(c.samples_per_volume);
  out["train.batch_size"] = std::to_string(c.batch_size);
  out["train.epochs"] = std::to_string(c.epochs);
  out["train.lr0"] = text::format_double(effective_lr0(c));
  out["train.lr0_explicit"] = c.lr0 ? "true" : "false";
  out["train.lr_min"] = text::format_double(c.lr_min);
  out["train.split_ratio"] = text::format_double(c.split_ratio);
  out["train.seed"] = std::to_string(c.seed);
  out["train.loss_masking"] = std::string(to_string(c.loss_masking));
  out["train.p_low"] = text::format_double(c.p_low);
  out["train.p_high"] = text::format_double(c.p_high);
  out["task"] = std::string(to_string(c.task));
  out["organ"] = std::string(to_string(c.organ));
  write_hyper(out, c.optimizer);
}

TrainConfig read_config(const std::map<std::string, std::string>& in) {
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = in.find(key);
    if (it == in.end()) fail(ErrorCode::CorruptCheckpoint, "missing " + key);
    return it->second;
  };
  TrainConfig c;
  c.slices = static_cast<std::size_t>(text::parse_int(get("train.slices")));
  c.samples_per_volume = static_cast<std::size_t>(text::parse_int(get("train.samples_per_volume")));
  c.batch_size = static_cast<std::size_t>(text::parse_int(get("train.batch_size")));
  c.epochs = static_cast<std::size_t>(text::parse_int(get("train.epochs")));
  if (text::parse_bool(get("train.lr0_explicit"))) c.lr0 = text::parse_double(get("train.lr0"));
  c.lr_min = text::parse_double(get("train.lr_min"));
  c.split_ratio = text::parse_double(get("train.split_ratio"));
  c.seed = text::parse_uint(get("train.seed"));
  c.loss_masking = parse_loss_masking(get("train.loss_masking"));
  c.p_low = text::parse_double(get("train.p_low"));
  c.p_high = text::parse_double(get("train.p_high"));
  c.task = parse_task(get("task"));
  c.organ = parse_organ(get("organ"));
  c.optimizer = read_hyper(in);
  return c;
}

} // namespace sct
