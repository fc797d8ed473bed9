#include "sct/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sct/error.hpp"
#include "sct/text.hpp"
#include "sct/volume_io.hpp"

namespace sct {

namespace fs = std::filesystem;

namespace {

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kModelStream = 3;

// Copies one plane into a padded buffer using mirror reflection.
void fill_padded(const float* plane, const PadPlan& plan, float* dst) {
  for (std::size_t y = 0; y < plan.padded_height; ++y) {
    const std::size_t sy =
        reflect_index(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(plan.top), plan.height);
    const float* row = plane + sy * plan.width;
    float* out = dst + y * plan.padded_width;
    for (std::size_t x = 0; x < plan.padded_width; ++x)
      out[x] = row[reflect_index(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(plan.left),
                                 plan.width)];
  }
}

// (B, N, Hp, Wp) input for the given center slices of one volume or several.
template <typename SliceOf>
ad::Tensor<float> assemble_input(std::size_t count, std::size_t n, const PadPlan& plan, SliceOf&& slice_of) {
  const std::size_t padded = plan.padded_height * plan.padded_width;
  std::vector<float> data(count * n * padded);
  for (std::size_t b = 0; b < count; ++b)
    for (std::size_t k = 0; k < n; ++k) fill_padded(slice_of(b, k), plan, data.data() + (b * n + k) * padded);
  return ad::Tensor<float>::from({count, n, plan.padded_height, plan.padded_width}, std::move(data));
}

ad::Tensor<float> run_cropped(const Model<float>& model, const ad::Tensor<float>& input, const PadPlan& plan) {
  auto out = model.forward(input);
  if (plan.padded_height == plan.height && plan.padded_width == plan.width) return out;
  return ad::crop2d(out, plan.top, plan.left, plan.height, plan.width);
}

} // namespace

Split split_dataset(std::vector<std::string> ids, double ratio, std::uint64_t seed) {
  if (ids.size() < 2) fail(ErrorCode::TooFewCases, "need at least 2 cases to split, got " + std::to_string(ids.size()));
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  auto rng = seeded_rng(seed, kSplitStream, 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = ids.size();
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

std::vector<std::size_t> slab_indices(std::size_t nz, std::size_t z, std::size_t n) {
  if (n == 0 || n % 2 == 0) fail(ErrorCode::InvalidArgument, "slab size must be odd");
  if (z >= nz) fail(ErrorCode::OutOfRange, "slice " + std::to_string(z) + " outside [0, " + std::to_string(nz) + ")");
  const auto half = static_cast<std::ptrdiff_t>((n - 1) / 2);
  std::vector<std::size_t> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto idx = static_cast<std::ptrdiff_t>(z) + static_cast<std::ptrdiff_t>(k) - half;
    out[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(nz) - 1));
  }
  return out;
}

Slab extract_slab(const Volume& volume, std::size_t z, std::size_t n) {
  const auto idx = slab_indices(volume.nz(), z, n);
  Slab s{n, volume.ny(), volume.nx(), {}};
  s.data.reserve(n * volume.slice_size());
  for (auto i : idx) {
    const auto plane = volume.slice(i);
    s.data.insert(s.data.end(), plane.begin(), plane.end());
  }
  return s;
}

std::vector<SampleRef> sample_epoch(std::span<const std::size_t> depths, std::size_t samples_per_volume,
                                    std::uint64_t seed, std::size_t epoch) {
  auto rng = seeded_rng(seed, kSampleStream, epoch);
  std::vector<SampleRef> out;
  out.reserve(depths.size() * samples_per_volume);
  for (std::size_t v = 0; v < depths.size(); ++v) {
    if (depths[v] == 0) fail(ErrorCode::InvalidArgument, "volume with no slices");
    std::uniform_int_distribution<std::size_t> pick(0, depths[v] - 1);
    for (std::size_t m = 0; m < samples_per_volume; ++m) out.push_back({v, pick(rng)});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t count, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch size must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < count; b += batch_size) out.emplace_back(b, std::min(count, b + batch_size));
  return out;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

PadPlan plan_padding(std::size_t height, std::size_t width, std::size_t multiple) {
  PadPlan p;
  p.height = height;
  p.width = width;
  p.padded_height = (height + multiple - 1) / multiple * multiple;
  p.padded_width = (width + multiple - 1) / multiple * multiple;
  p.top = (p.padded_height - height) / 2;
  p.left = (p.padded_width - width) / 2;
  return p;
}

PreparedCase prepare_case(const CaseRecord& record, const NormalizationParams& settings) {
  const NormalizationParams fitted = refit(settings, record.source, record.mask);
  PreparedCase p{record.case_id, apply_normalization(record.source, fitted), std::nullopt, record.mask, fitted};
  if (record.target) p.target = apply_normalization(*record.target, hu_window());
  return p;
}

std::vector<float> predict_normalized(const Model<float>& model, const Volume& source, std::size_t slices,
                                      std::size_t batch_size) {
  ad::NoGradGuard no_grad;
  const PadPlan plan = plan_padding(source.ny(), source.nx(), spatial_multiple(model.spec()));
  const std::size_t nz = source.nz(), plane = source.slice_size();
  std::vector<float> out(source.size());
  for (auto [begin, end] : batch_ranges(nz, batch_size)) {
    std::vector<std::vector<std::size_t>> idx;
    for (std::size_t z = begin; z < end; ++z) idx.push_back(slab_indices(nz, z, slices));
    const auto input = assemble_input(end - begin, slices, plan, [&](std::size_t b, std::size_t k) {
      return source.slice(idx[b][k]).data();
    });
    const auto pred = run_cropped(model, input, plan);
    std::copy(pred.values().begin(), pred.values().end(), out.begin() + static_cast<std::ptrdiff_t>(begin * plane));
  }
  return out;
}

std::string history_csv(const TrainHistory& h) {
  std::string s = "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : h.epochs)
    s += std::to_string(e.epoch) + "," + text::format_double(e.train_loss) + "," +
         text::format_double(e.val_loss) + "," + text::format_double(e.lr) + "\n";
  return s;
}

double validation_loss(const Model<float>& model, std::span<const PreparedCase> cases, std::size_t slices,
                       std::size_t batch_size) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& c : cases) {
    if (!c.target) fail(ErrorCode::InvalidArgument, c.case_id + ": validation case without target");
    const auto pred = predict_normalized(model, c.source, slices, batch_size);
    const auto target = c.target->voxels();
    const auto mask = c.mask.voxels();
    const std::size_t plane = c.source.slice_size();
    for (std::size_t z = 0; z < c.source.nz(); ++z) {
      double err = 0.0, weight = 0.0;
      for (std::size_t i = z * plane; i < (z + 1) * plane; ++i) {
        err += static_cast<double>(mask[i]) * std::abs(static_cast<double>(pred[i]) - target[i]);
        weight += mask[i];
      }
      if (weight > 0.0) {
        total += err / weight;
        ++counted;
      }
    }
  }
  if (counted == 0) fail(ErrorCode::EmptyMask, "validation set has no masked slice");
  return total / static_cast<double>(counted);
}

std::vector<CaseRecord> select_cases(std::span<const CaseRecord> pool, std::span<const std::string> ids) {
  std::vector<CaseRecord> out;
  for (const auto& id : ids) {
    const auto it = std::find_if(pool.begin(), pool.end(), [&](const CaseRecord& c) { return c.case_id == id; });
    if (it == pool.end()) fail(ErrorCode::MissingPath, "no case with id " + id);
    out.push_back(*it);
  }
  return out;
}

TrainResult train(std::span<const CaseRecord> train_cases, std::span<const CaseRecord> val_cases,
                  const TrainConfig& config, const ModelSpec& spec, const TrainOptions& options) {
  validate(config);
  validate(spec);
  if (spec.in_channels != config.slices)
    fail(ErrorCode::InvalidSpec, "model in_channels must equal the slab size N");
  if (spec.out_channels != 1) fail(ErrorCode::InvalidSpec, "model must produce one output channel");
  if (train_cases.empty() || val_cases.empty())
    fail(ErrorCode::TooFewCases, "training needs nonempty train and validation sets");

  const NormalizationParams settings = source_settings(config);
  const auto prepare_all = [&](std::span<const CaseRecord> cases) {
    std::vector<PreparedCase> out;
    for (const auto& c : cases) {
      if (!c.target) fail(ErrorCode::InvalidArgument, c.case_id + ": case has no ground-truth CT");
      if (c.source.unit() != source_unit(config.task))
        fail(ErrorCode::TaskMismatch, c.case_id + ": source unit " + std::string(to_string(c.source.unit())) +
                                          " does not fit task " + std::string(to_string(config.task)));
      out.push_back(prepare_case(c, settings));
    }
    return out;
  };
  const auto train_set = prepare_all(train_cases);
  const auto val_set = prepare_all(val_cases);

  const std::size_t ny = train_set.front().source.ny(), nx = train_set.front().source.nx();
  std::vector<std::size_t> depths;
  for (const auto& c : train_set) {
    if (c.source.ny() != ny || c.source.nx() != nx)
      fail(ErrorCode::DimMismatch, c.case_id + ": training cases must share in-plane dimensions");
    depths.push_back(c.source.nz());
  }
  const PadPlan plan = plan_padding(ny, nx, spatial_multiple(spec));
  const std::size_t plane = ny * nx;
  const std::size_t n = config.slices;

  Model<float> model = Model<float>::build(spec, seeded_rng(config.seed, kModelStream, 0)());
  const auto params = model.parameters();
  AdamWState<float> state{config.optimizer, 0, {}, {}};
  const LrSchedule schedule = schedule_of(config);

  const auto make_checkpoint = [&](const Model<float>& m, std::size_t epoch, double val) {
    return Checkpoint{convert_model<float>(m, true), settings, hu_window(), config, epoch, val};
  };
  if (options.run_dir) fs::create_directories(*options.run_dir);

  TrainResult result{make_checkpoint(model, 0, std::numeric_limits<double>::infinity()), {}, {}};
  bool have_best = false;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, schedule);
    const auto samples = sample_epoch(depths, config.samples_per_volume, config.seed, epoch);
    result.samples_per_epoch.push_back(samples.size());

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (auto [begin, end] : batch_ranges(samples.size(), config.batch_size)) {
      const std::size_t count = end - begin;
      std::vector<std::vector<std::size_t>> idx;
      for (std::size_t b = begin; b < end; ++b)
        idx.push_back(slab_indices(depths[samples[b].volume], samples[b].z, n));
      const auto input = assemble_input(count, n, plan, [&](std::size_t b, std::size_t k) {
        return train_set[samples[begin + b].volume].source.slice(idx[b][k]).data();
      });
      std::vector<float> target(count * plane), weight(count * plane);
      double weight_sum = 0.0;
      for (std::size_t b = 0; b < count; ++b) {
        const auto& c = train_set[samples[begin + b].volume];
        const auto t = c.target->slice(samples[begin + b].z);
        const auto m = c.mask.slice(samples[begin + b].z);
        std::copy(t.begin(), t.end(), target.begin() + static_cast<std::ptrdiff_t>(b * plane));
        std::copy(m.begin(), m.end(), weight.begin() + static_cast<std::ptrdiff_t>(b * plane));
        for (float w : m) weight_sum += w;
      }
      const bool masked = config.loss_masking == LossMasking::MaskWeighted;
      // A batch drawn entirely outside the mask carries no loss.
      if (masked && weight_sum == 0.0) continue;

      model.zero_grad();
      const auto target_t = ad::Tensor<float>::from({count, 1, ny, nx}, std::move(target));
      const auto weight_t =
          masked ? ad::Tensor<float>::from({count, 1, ny, nx}, std::move(weight)) : ad::Tensor<float>{};
      const auto loss = ad::l1_loss(run_cropped(model, input, plan), target_t, weight_t);
      const double value = loss.item();
      if (!std::isfinite(value))
        fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch at sample " +
                                           std::to_string(begin) + ": loss is " + text::format_double(value));
      ad::backward(loss);
      adamw_step<float>(params, state, lr);
      loss_sum += value * static_cast<double>(count);
      loss_count += count;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::nan("");
    rec.val_loss = validation_loss(model, val_set, n, config.batch_size);
    if (!std::isfinite(rec.val_loss))
      fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": validation loss is not finite");
    result.history.epochs.push_back(rec);

    if (!have_best || rec.val_loss < result.history.best_val_loss) {
      have_best = true;
      result.history.best_index = result.history.epochs.size() - 1;
      result.history.best_val_loss = rec.val_loss;
      result.best = make_checkpoint(model, epoch, rec.val_loss);
      if (options.run_dir) save_checkpoint(*options.run_dir / "best.ckpt", result.best);
    }
    if (options.run_dir) {
      save_checkpoint(*options.run_dir / "last.ckpt", make_checkpoint(model, epoch, rec.val_loss));
      write_text(*options.run_dir / "history.csv", history_csv(result.history));
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

} // namespace sct
