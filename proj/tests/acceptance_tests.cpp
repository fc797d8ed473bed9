#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sct/checkpoint.hpp"
#include "sct/cli.hpp"
#include "sct/inference.hpp"
#include "sct/metrics.hpp"
#include "sct/optim.hpp"
#include "sct/phantom.hpp"
#include "sct/pipeline.hpp"
#include "sct/volume_io.hpp"
#include "test_util.hpp"

using namespace sct;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20231015);
  double worst = 0.0;
  const int specs = 6;
  for (int trial = 0; trial < specs; ++trial) {
    ModelSpec s;
    s.in_channels = 3;
    s.depth = 2;
    s.base_width = 4;
    s.norm = (trial % 3 == 2) ? NormKind::None : NormKind::Instance;
    s.activation = (trial % 2 == 1) ? Activation::LeakyRelu : Activation::Relu;
    s.final_activation = (trial == 4) ? FinalActivation::Identity : FinalActivation::Sigmoid;
    const auto model = Model<double>::build(s, rng());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(3 * 64), t(64), w(64);
    for (auto& v : x) v = u(rng);
    for (auto& v : t) v = u(rng);
    for (auto& v : w) v = u(rng) < 0.7 ? 1.0 : 0.0;
    w[0] = 1.0;
    const auto xin = ad::Tensor<double>::from({1, 3, 8, 8}, x);
    const auto tgt = ad::Tensor<double>::from({1, 1, 8, 8}, t);
    const auto wgt = ad::Tensor<double>::from({1, 1, 8, 8}, w);
    const auto report = ad::grad_check<double>([&] { return ad::l1_loss(model.forward(xin), tgt, wgt); },
                                               model.parameters(), 1e-5, 1e-4);
    worst = std::max(worst, report.max_rel_error);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0, std::to_string(specs) + " specs, max rel error " + fmt("%.3g", worst) +
                                            ", " + fmt("%.1f", secs) + " s"};
}

// 2 ---------------------------------------------------------------------------

Outcome optimizer_oracle() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool decay_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const AdamWHyper h{0.8 + 0.19 * u(rng), 0.99 + 0.0099 * u(rng), 1e-8, 0.1 * u(rng)};
    const std::size_t count = 6;
    std::vector<double> p0(count);
    for (auto& v : p0) v = 3.0 * n(rng);
    std::vector<ad::Tensor<double>> params;
    for (double v : p0) params.push_back(ad::Tensor<double>::from({1}, {v}, true));
    AdamWState<double> state{h, 0, {}, {}};
    std::vector<double> p = p0, m(count, 0.0), v(count, 0.0);
    for (int step = 1; step <= 10; ++step) {
      const double lr = 1e-3 + 1e-2 * u(rng);
      for (std::size_t i = 0; i < count; ++i) {
        const double g = n(rng);
        params[i].grad()[0] = g;
        m[i] = h.beta1 * m[i] + (1 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1 - h.beta2) * g * g;
        const double mh = m[i] / (1 - std::pow(h.beta1, step));
        const double vh = v[i] / (1 - std::pow(h.beta2, step));
        p[i] -= lr * (mh / (std::sqrt(vh) + h.eps) + h.weight_decay * p[i]);
      }
      adamw_step<double>(params, state, lr);
    }
    for (std::size_t i = 0; i < count; ++i)
      worst = std::max(worst, std::abs(params[i].values()[0] - p[i]) / std::max(1e-300, std::abs(p[i])));

    // zero gradient from a fresh state
    const double lr = 1e-3 + 1e-2 * u(rng);
    std::vector<ad::Tensor<double>> fresh;
    for (double val : p0) fresh.push_back(ad::Tensor<double>::from({1}, {val}, true));
    AdamWState<double> fs_state{h, 0, {}, {}};
    adamw_step<double>(fresh, fs_state, lr);
    for (std::size_t i = 0; i < count; ++i)
      decay_exact = decay_exact && fresh[i].values()[0] == p0[i] * (1.0 - lr * h.weight_decay);
  }
  return {worst <= 1e-10 && decay_exact,
          "max rel deviation " + fmt("%.3g", worst) + ", zero-gradient decay " + (decay_exact ? "exact" : "inexact")};
}

// 3 ---------------------------------------------------------------------------

Outcome schedule() {
  bool ok = true;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double lr0 = 1e-5 + u(rng) * 1e-2;
    const double lr_min = trial % 5 == 0 ? 0.0 : lr0 * u(rng) * 0.99;
    const std::size_t T = 1 + static_cast<std::size_t>(u(rng) * 1000);
    const LrSchedule s{lr0, lr_min, T};
    ok = ok && cosine_lr(0, s) == lr0 && cosine_lr(T, s) == lr_min;
    for (std::size_t e = 0; e < T; ++e, ++checked) ok = ok && cosine_lr(e + 1, s) <= cosine_lr(e, s);
  }
  return {ok, "50 schedules, " + std::to_string(checked) + " consecutive pairs non-increasing, exact endpoints"};
}

// 4 ---------------------------------------------------------------------------

Outcome overfit() {
  const auto t0 = Clock::now();
  auto spec = default_phantom();
  spec.seed = 4;
  spec.case_id = "overfit";
  const auto c = generate(spec);
  TrainConfig cfg;
  cfg.slices = 3;
  cfg.samples_per_volume = 32;
  cfg.batch_size = 4;
  cfg.epochs = 100;
  cfg.lr0 = 1e-3;
  cfg.seed = 4;
  ModelSpec ms;
  ms.depth = 2;
  ms.base_width = 8;
  const std::vector<CaseRecord> cases{c};
  const auto res = train(cases, cases, cfg, ms);
  const double first = res.history.epochs.front().train_loss;
  const double last = res.history.epochs.back().train_loss;
  const double secs = seconds_since(t0);
  return {last <= 0.2 * first && secs <= 600.0,
          "epoch-1 L1 " + fmt("%.5f", first) + ", final L1 " + fmt("%.5f", last) + " (ratio " +
              fmt("%.3f", last / first) + "), " + fmt("%.0f", secs) + " s"};
}

// 5 ---------------------------------------------------------------------------

Outcome generalization() {
  const auto t0 = Clock::now();
  auto base = default_phantom();
  const auto cohort = generate_cohort(25, base, 2024);
  std::vector<std::string> ids;
  for (const auto& c : cohort) ids.push_back(c.case_id);
  const Split split = split_dataset(ids, 0.8, 11);
  const auto train_cases = select_cases(cohort, split.train);
  const auto val_cases = select_cases(cohort, split.val);

  TrainConfig cfg;
  cfg.slices = 3;
  cfg.samples_per_volume = 8;
  cfg.batch_size = 4;
  cfg.epochs = 40;
  cfg.lr0 = 2e-3;
  cfg.split_ratio = 0.8;
  cfg.seed = 11;
  ModelSpec ms;
  ms.depth = 3;
  ms.base_width = 8;
  const auto res = train(train_cases, val_cases, cfg, ms);

  double model_mae = 0, base_mae = 0, model_psnr = 0, base_psnr = 0, ideal_mae = 0;
  for (const auto& c : val_cases) {
    const std::size_t index = static_cast<std::size_t>(std::stoul(c.case_id.substr(5)));
    const PhantomSpec member = cohort_member(index, base, 2024, 0.05);
    const auto labels = label_map(member);
    std::vector<float> ideal(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      ideal[i] = labels[i] ? member.classes[labels[i] - 1].hu : member.background_hu;
    ideal_mae += mae(c.target->with_voxels(ideal, Unit::HU), *c.target, c.mask);
    const Volume sct = synthesize(res.best, c.source, c.mask).sct;
    const auto p = fit_percentile_linear(c.source, c.mask, cfg.p_low, cfg.p_high);
    const Volume copy = denormalize_to_hu(apply_normalization(c.source, p));
    model_mae += mae(sct, *c.target, c.mask);
    base_mae += mae(copy, *c.target, c.mask);
    model_psnr += psnr(sct, *c.target, c.mask).db;
    base_psnr += psnr(copy, *c.target, c.mask).db;
  }
  const double k = static_cast<double>(val_cases.size());
  model_mae /= k;
  base_mae /= k;
  model_psnr /= k;
  base_psnr /= k;
  ideal_mae /= k;
  const double secs = seconds_since(t0);
  const bool ok = split.train.size() == 20 && split.val.size() == 5 && model_mae <= 0.7 * base_mae &&
                  model_psnr >= base_psnr + 2.0 && secs <= 1800.0;
  return {ok, "MAE " + fmt("%.1f", model_mae) + " vs baseline " + fmt("%.1f", base_mae) + " HU (" +
                  fmt("%.0f", 100.0 * (1.0 - model_mae / base_mae)) + "% lower), PSNR " + fmt("%.2f", model_psnr) +
                  " vs " + fmt("%.2f", base_psnr) + " dB, label-lookup MAE " + fmt("%.1f", ideal_mae) + " HU, best epoch " +
                  std::to_string(res.history.best_index) + ", " + fmt("%.0f", secs) + " s"};
}

// 6 ---------------------------------------------------------------------------

double brute_mae(const Volume& a, const Volume& b, const Volume& m) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (m.voxels()[i] > 0) {
      s += std::abs(static_cast<double>(a.voxels()[i]) - b.voxels()[i]);
      ++n;
    }
  return s / static_cast<double>(n);
}

double brute_psnr(const Volume& a, const Volume& b, const Volume& m) {
  double lo = INFINITY, hi = -INFINITY, se = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (m.voxels()[i] > 0) {
      lo = std::min(lo, static_cast<double>(b.voxels()[i]));
      hi = std::max(hi, static_cast<double>(b.voxels()[i]));
      const double d = static_cast<double>(a.voxels()[i]) - b.voxels()[i];
      se += d * d;
      ++n;
    }
  return 10.0 * std::log10((hi - lo) * (hi - lo) / (se / static_cast<double>(n)));
}

double brute_ssim(const Volume& a, const Volume& b, const Volume& mask, double R) {
  const int r = 5;
  double w[11][11], total = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += w[i + r][j + r] = std::exp(-(i * i + j * j) / 4.5);
  auto sym = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return static_cast<std::size_t>(i);
  };
  const double c1 = std::pow(0.01 * R, 2), c2 = std::pow(0.03 * R, 2);
  const int nx = static_cast<int>(a.nx()), ny = static_cast<int>(a.ny());
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t z = 0; z < a.nz(); ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        if (mask.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), z) <= 0) continue;
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j) {
            const double ww = w[i + r][j + r] / total;
            const double va = a.at(sym(x + j, nx), sym(y + i, ny), z), vb = b.at(sym(x + j, nx), sym(y + i, ny), z);
            ma += ww * va;
            mb += ww * vb;
            saa += ww * va * va;
            sbb += ww * vb * vb;
            sab += ww * va * vb;
          }
        acc += ((2 * ma * mb + c1) * (2 * (sab - ma * mb) + c2)) /
               ((ma * ma + mb * mb + c1) * (saa - ma * ma + sbb - mb * mb + c2));
        ++count;
      }
  return acc / static_cast<double>(count);
}

Outcome metric_oracles() {
  std::mt19937_64 rng(66);
  double worst = 0.0;
  bool props = true;
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); };
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> side(12, 32), depth(1, 4);
    const Dims d{side(rng), side(rng), depth(rng)};
    const Volume g = test::random_volume(rng, d, Unit::HU, -1024.0, 3071.0);
    std::normal_distribution<double> noise(0.0, 20.0 + 10.0 * trial);
    std::vector<float> pv(g.voxels().begin(), g.voxels().end());
    for (auto& v : pv) v += static_cast<float>(noise(rng));
    const Volume p = g.with_voxels(pv, Unit::HU);
    const Volume m = test::random_mask(rng, d, 0.5);
    const double R = masked_range(g, m);
    worst = std::max(worst, rel(mae(p, g, m), brute_mae(p, g, m)));
    worst = std::max(worst, rel(psnr(p, g, m).db, brute_psnr(p, g, m)));
    worst = std::max(worst, rel(ssim(p, g, m, R), brute_ssim(p, g, m, R)));
    props = props && mae(g, g, m) == 0.0 && std::abs(ssim(g, g, m, R) - 1.0) <= 1e-12 && !psnr(g, g, m).defined;
  }
  return {worst <= 1e-6 && props, "20 pairs, max rel deviation " + fmt("%.3g", worst) +
                                      ", identity properties " + (props ? "hold" : "violated")};
}

// 7 ---------------------------------------------------------------------------

Outcome split_contract() {
  std::vector<std::string> ids;
  for (int i = 0; i < 180; ++i) ids.push_back("id" + std::to_string(i));
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = split_dataset(ids, 0.9, seed);
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    ok = ok && s.train.size() == 162 && s.val.size() == 18 && all.size() == 180;
  }
  return {ok, "180 ids at ratio 0.9 -> 162/18 for 10 seeds, disjoint and exhaustive"};
}

// 8 ---------------------------------------------------------------------------

Outcome round_trips() {
  std::mt19937_64 rng(88);
  std::uniform_int_distribution<std::size_t> side(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mha_ok = 0, ckpt_ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Dims d{side(rng), side(rng), side(rng)};
    const Vec3 spacing{0.1 + 3 * u(rng), 0.1 + 3 * u(rng), 0.1 + 5 * u(rng)};
    const Vec3 origin{-200 + 400 * u(rng), -200 + 400 * u(rng), -200 + 400 * u(rng)};
    const auto type = static_cast<ElementType>(trial % 3);
    std::vector<float> v(d[0] * d[1] * d[2]);
    for (auto& x : v) {
      if (type == ElementType::Float) x = static_cast<float>(-5000 + 10000 * u(rng));
      if (type == ElementType::Short) x = static_cast<float>(std::floor(-32768 + 65535 * u(rng)));
      if (type == ElementType::UChar) x = static_cast<float>(std::floor(256 * u(rng)));
    }
    const Volume vol(d, v, Unit::HU, spacing, origin);
    const auto bytes = write_mha(vol, type);
    const Volume back = read_mha(bytes, Unit::HU);
    if (back == vol && write_mha(back, type) == bytes) ++mha_ok;

    ModelSpec ms;
    ms.in_channels = 1 + 2 * (trial % 3);
    ms.depth = 1 + trial % 3;
    ms.base_width = 1 + trial % 5;
    ms.norm = trial % 2 ? NormKind::None : NormKind::Instance;
    ms.activation = trial % 4 < 2 ? Activation::Relu : Activation::LeakyRelu;
    TrainConfig cfg;
    cfg.slices = ms.in_channels;
    cfg.seed = rng();
    cfg.epochs = 1 + trial;
    if (trial % 2) cfg.lr0 = u(rng) * 1e-2 + 1e-6;
    cfg.task = trial % 2 ? Task::CbctToCt : Task::MriToCt;
    cfg.organ = trial % 3 ? Organ::Pelvis : Organ::Brain;
    cfg.optimizer.weight_decay = u(rng);
    Checkpoint ck{Model<float>::build(ms, rng()), source_settings(cfg), hu_window(), cfg,
                  static_cast<std::size_t>(trial), u(rng)};
    if (cfg.task == Task::MriToCt) {
      ck.source_norm.fitted = true;
      ck.source_norm.fitted_low = u(rng);
      ck.source_norm.fitted_high = 1.0 + u(rng);
    }
    test::TempDir dir("accept_ckpt");
    const auto path = dir.path() / "x.ckpt";
    save_checkpoint(path, ck);
    const auto loaded = load_checkpoint(path);
    bool same = loaded.config == ck.config && loaded.model.spec() == ck.model.spec() &&
                loaded.source_norm == ck.source_norm && loaded.target_norm == ck.target_norm &&
                loaded.epoch == ck.epoch && loaded.val_loss == ck.val_loss;
    for (std::size_t i = 0; same && i < ck.model.named_parameters().size(); ++i) {
      const auto& a = ck.model.named_parameters()[i];
      const auto& b = loaded.model.named_parameters()[i];
      same = a.first == b.first &&
             std::memcmp(a.second.values().data(), b.second.values().data(), a.second.numel() * sizeof(float)) == 0;
    }
    if (same && serialize_checkpoint(loaded) == read_file(path)) ++ckpt_ok;
  }
  return {mha_ok == 50 && ckpt_ok == 50,
          ".mha " + std::to_string(mha_ok) + "/50, checkpoint " + std::to_string(ckpt_ok) + "/50 bitwise identical"};
}

// 9 ---------------------------------------------------------------------------

std::vector<float> manual_synthesis(const Checkpoint& ck, const Volume& source, const Volume& mask) {
  const auto params = refit(ck.source_norm, source, mask);
  const Volume norm = apply_normalization(source, params);
  const std::size_t nx = source.nx(), ny = source.ny(), n = ck.config.slices;
  const std::size_t mult = spatial_multiple(ck.model.spec());
  const std::size_t ph = (ny + mult - 1) / mult * mult, pw = (nx + mult - 1) / mult * mult;
  const std::size_t top = (ph - ny) / 2, left = (pw - nx) / 2;
  auto refl = [](std::ptrdiff_t i, std::size_t len) {
    const auto m = static_cast<std::ptrdiff_t>(len);
    if (m == 1) return std::size_t{0};
    while (i < 0 || i >= m) i = i < 0 ? -i : 2 * (m - 1) - i;
    return static_cast<std::size_t>(i);
  };
  std::vector<float> out(source.size());
  ad::NoGradGuard guard;
  for (std::size_t z = 0; z < source.nz(); ++z) {
    std::vector<float> padded(n * ph * pw);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t zz = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
          static_cast<std::ptrdiff_t>(z + k) - static_cast<std::ptrdiff_t>((n - 1) / 2), 0,
          static_cast<std::ptrdiff_t>(source.nz()) - 1));
      for (std::size_t y = 0; y < ph; ++y)
        for (std::size_t x = 0; x < pw; ++x)
          padded[(k * ph + y) * pw + x] = norm.at(refl(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(left), nx),
                                                  refl(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(top), ny), zz);
    }
    const auto pred = ck.model.forward(ad::Tensor<float>::from({1, n, ph, pw}, padded));
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        const double v = pred.values()[(y + top) * pw + x + left];
        out[source.index(x, y, z)] = mask.at(x, y, z) > 0 ? static_cast<float>(-1024.0 + v * 4095.0) : -1024.0f;
      }
  }
  return out;
}

Outcome inference_composition() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> side(5, 20), depth(1, 6);
  double worst = 0.0;
  bool dims_ok = true, fill_ok = true;
  for (int trial = 0; trial < 12; ++trial) {
    const bool cbct = trial % 2 == 1;
    auto ps = default_phantom(cbct ? SourceMode::Cbct : SourceMode::Mri);
    ps.dims = {side(rng), side(rng), depth(rng)};
    ps.seed = rng();
    const auto c = generate(ps);
    ModelSpec ms;
    ms.in_channels = trial % 3 == 2 ? 5 : 3;
    ms.depth = 1 + trial % 3;
    ms.base_width = 4;
    TrainConfig cfg;
    cfg.slices = ms.in_channels;
    cfg.task = c.task;
    const Checkpoint ck{Model<float>::build(ms, rng()), source_settings(cfg), hu_window(), cfg, 0, 0.0};
    const auto got = synthesize(ck, c.source, c.mask, {-1024.0f, 1 + static_cast<std::size_t>(trial % 4)}).sct;
    const auto want = manual_synthesis(ck, c.source, c.mask);
    dims_ok = dims_ok && got.dims() == c.source.dims();
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(got.voxels()[i]) - want[i]));
      if (c.mask.voxels()[i] == 0.0f) fill_ok = fill_ok && got.voxels()[i] == -1024.0f;
    }
  }
  return {worst <= 1e-5 && dims_ok && fill_ok,
          "12 volumes, max deviation " + fmt("%.3g", worst) + " HU, dims " + (dims_ok ? "match" : "differ") +
              ", outside fill " + (fill_ok ? "exact" : "wrong")};
}

// 10 --------------------------------------------------------------------------

Outcome determinism() {
  test::TempDir tmp("accept_det");
  const auto data = tmp.path() / "data";
  std::ostringstream sink;
  int code = cli::run({"phantom", "--out", data.string(), "--count", "5", "--seed", "10", "--nx", "32", "--ny",
                       "32", "--nz", "8"},
                      sink, sink);
  auto train_into = [&](const fs::path& run) {
    return cli::run({"train", "--data-dir", data.string(), "--run-dir", run.string(), "--epochs", "4",
                     "--samples-per-volume", "4", "--batch-size", "2", "--depth", "2", "--base-width", "4",
                     "--seed", "10", "--split-ratio", "0.6"},
                    sink, sink);
  };
  if (code == 0) code = train_into(tmp.path() / "a");
  if (code == 0) code = train_into(tmp.path() / "b");
  if (code != 0) return {false, "cli failed with exit " + std::to_string(code) + ": " + sink.str()};
  const auto a = read_file(tmp.path() / "a" / "history.csv");
  const auto b = read_file(tmp.path() / "b" / "history.csv");
  const bool ckpt_same = read_file(tmp.path() / "a" / "best.ckpt") == read_file(tmp.path() / "b" / "best.ckpt");
  return {a == b && !a.empty() && ckpt_same,
          std::string("history.csv ") + (a == b ? "identical" : "differs") + " (" + std::to_string(a.size()) +
              " bytes), best.ckpt " + (ckpt_same ? "identical" : "differs")};
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"optimizer oracle", optimizer_oracle},
      {"cosine schedule", schedule},
      {"overfit smoke test", overfit},
      {"phantom generalization", generalization},
      {"metric oracles", metric_oracles},
      {"split contract", split_contract},
      {"format round trips", round_trips},
      {"inference composition", inference_composition},
      {"training determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
