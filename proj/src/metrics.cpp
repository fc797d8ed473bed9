#include "sct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sct/error.hpp"
#include "sct/text.hpp"

namespace sct {

namespace {

void check_inputs(const Volume& pred, const Volume& gt, const Volume& mask) {
  if (!same_dims(pred, gt) || !same_dims(pred, mask)) fail(ErrorCode::DimMismatch, "metric inputs differ in dims");
  if (count_nonzero(mask) == 0) fail(ErrorCode::EmptyMask, "mask selects no voxel");
}

double masked_mse(const Volume& pred, const Volume& gt, const Volume& mask) {
  const auto p = pred.voxels(), g = gt.voxels(), m = mask.voxels();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (m[i] > 0.0f) {
      const double d = static_cast<double>(p[i]) - g[i];
      sum += d * d;
      ++n;
    }
  return sum / static_cast<double>(n);
}

// Separable Gaussian filter of one plane with symmetric boundary handling.
void filter_plane(const std::vector<double>& in, std::size_t h, std::size_t w, const std::vector<double>& taps,
                  std::vector<double>& tmp, std::vector<double>& out) {
  const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -r; k <= r; ++k)
        acc += taps[static_cast<std::size_t>(k + r)] * in[y * w + symmetric_index(static_cast<std::ptrdiff_t>(x) + k, w)];
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -r; k <= r; ++k)
        acc += taps[static_cast<std::size_t>(k + r)] * tmp[symmetric_index(static_cast<std::ptrdiff_t>(y) + k, h) * w + x];
      out[y * w + x] = acc;
    }
}

} // namespace

double mae(const Volume& pred, const Volume& gt, const Volume& mask) {
  check_inputs(pred, gt, mask);
  const auto p = pred.voxels(), g = gt.voxels(), m = mask.voxels();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (m[i] > 0.0f) {
      sum += std::abs(static_cast<double>(p[i]) - g[i]);
      ++n;
    }
  return sum / static_cast<double>(n);
}

double masked_range(const Volume& gt, const Volume& mask) {
  if (!same_dims(gt, mask)) fail(ErrorCode::DimMismatch, "ground truth and mask differ in dims");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const auto g = gt.voxels(), m = mask.voxels();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (m[i] > 0.0f) {
      lo = std::min(lo, static_cast<double>(g[i]));
      hi = std::max(hi, static_cast<double>(g[i]));
    }
  if (hi < lo) fail(ErrorCode::EmptyMask, "mask selects no voxel");
  return hi - lo;
}

Psnr psnr(const Volume& pred, const Volume& gt, const Volume& mask, std::optional<double> data_range) {
  check_inputs(pred, gt, mask);
  const double r = data_range ? *data_range : masked_range(gt, mask);
  if (!(r > 0.0)) fail(ErrorCode::DegenerateRange, "PSNR data range is zero");
  const double mse = masked_mse(pred, gt, mask);
  if (mse == 0.0) return {0.0, false};
  return {10.0 * std::log10(r * r / mse), true};
}

std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

std::size_t symmetric_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - 1 - i);
}

double ssim(const Volume& pred, const Volume& gt, const Volume& mask, double data_range, const SsimSettings& s) {
  check_inputs(pred, gt, mask);
  if (!(data_range > 0.0)) fail(ErrorCode::DegenerateRange, "SSIM data range is zero");
  if (s.window % 2 == 0) fail(ErrorCode::InvalidArgument, "SSIM window must be odd");
  const double c1 = (s.k1 * data_range) * (s.k1 * data_range);
  const double c2 = (s.k2 * data_range) * (s.k2 * data_range);
  const auto taps = gaussian_kernel(s.window, s.sigma);
  const std::size_t h = pred.ny(), w = pred.nx(), plane = h * w;

  std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane), tmp(plane);
  std::vector<double> mx(plane), my(plane), mxx(plane), myy(plane), mxy(plane);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t z = 0; z < pred.nz(); ++z) {
    const auto m = mask.slice(z);
    if (std::none_of(m.begin(), m.end(), [](float v) { return v > 0.0f; })) continue;
    const auto p = pred.slice(z), g = gt.slice(z);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = p[i];
      y[i] = g[i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    filter_plane(x, h, w, taps, tmp, mx);
    filter_plane(y, h, w, taps, tmp, my);
    filter_plane(xx, h, w, taps, tmp, mxx);
    filter_plane(yy, h, w, taps, tmp, myy);
    filter_plane(xy, h, w, taps, tmp, mxy);
    for (std::size_t i = 0; i < plane; ++i) {
      if (!(m[i] > 0.0f)) continue;
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    s.single_case = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

std::string format_summary(const MetricSummary& s, int precision) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f ± %.*f", precision, s.mean, precision, s.std);
  return buf;
}

EvaluationReport evaluate_cases(const std::vector<EvalCase>& cases, const EvalOptions& options) {
  EvaluationReport report;
  std::vector<double> maes, psnrs, ssims;
  for (const auto& c : cases) {
    try {
      CaseMetrics m;
      m.case_id = c.case_id;
      m.data_range = options.fixed_range ? *options.fixed_range : masked_range(c.gt, c.mask);
      m.mae = mae(c.pred, c.gt, c.mask);
      m.psnr = psnr(c.pred, c.gt, c.mask, m.data_range);
      m.ssim = ssim(c.pred, c.gt, c.mask, m.data_range);
      try {
        m.psnr_alternate = psnr(c.pred, c.gt, c.mask,
                                options.fixed_range ? std::optional<double>{} : options.alternate_fixed_range);
      } catch (const Error&) {
        m.psnr_alternate.reset();
      }
      report.cases.push_back(m);
      maes.push_back(m.mae);
      if (m.psnr.defined) psnrs.push_back(m.psnr.db);
      ssims.push_back(m.ssim);
    } catch (const std::exception& e) {
      report.failures.push_back({c.case_id, e.what()});
    }
  }
  report.mae = summarize(maes);
  report.psnr = summarize(psnrs);
  report.ssim = summarize(ssims);
  return report;
}

std::string report_csv(const EvaluationReport& r) {
  std::string out = "case_id,mae,psnr,ssim\n";
  for (const auto& c : r.cases)
    out += c.case_id + "," + text::format_double(c.mae) + "," +
           (c.psnr.defined ? text::format_double(c.psnr.db) : std::string("undefined")) + "," +
           text::format_double(c.ssim) + "\n";
  out += "mean ± std (n=" + std::to_string(r.mae.count) + ")," + format_summary(r.mae) + "," +
         format_summary(r.psnr) + "," + format_summary(r.ssim, 4) + "\n";
  return out;
}

} // namespace sct
