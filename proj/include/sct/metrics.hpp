#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sct/volume.hpp"

namespace sct {

// Mean |pred - gt| over voxels with mask > 0.
double mae(const Volume& pred, const Volume& gt, const Volume& mask);

struct Psnr {
  double db = 0.0;
  bool defined = false;  // false when the masked MSE is exactly zero
};

// max(gt) - min(gt) over masked voxels.
double masked_range(const Volume& gt, const Volume& mask);

// 10 log10(R^2 / MSE) over masked voxels. R defaults to the masked
// ground-truth range.
Psnr psnr(const Volume& pred, const Volume& gt, const Volume& mask,
          std::optional<double> data_range = std::nullopt);

struct SsimSettings {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Normalized 1D Gaussian taps.
std::vector<double> gaussian_kernel(std::size_t size, double sigma);

// Half-sample symmetric extension (d c b a | a b c d | d c b a) into [0, n).
std::size_t symmetric_index(std::ptrdiff_t i, std::size_t n);

// Per transverse slice SSIM map with a separable Gaussian window on
// symmetric-padded images, averaged over masked voxels.
double ssim(const Volume& pred, const Volume& gt, const Volume& mask, double data_range,
            const SsimSettings& settings = {});

struct CaseMetrics {
  std::string case_id;
  double mae = 0.0;
  Psnr psnr;
  double ssim = 0.0;
  double data_range = 0.0;
  // PSNR under the alternative range convention (fixed when the primary is
  // per-case, per-case when the primary is fixed).
  std::optional<Psnr> psnr_alternate;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, n - 1 denominator
  std::size_t count = 0;
  bool single_case = false;
};

MetricSummary summarize(const std::vector<double>& values);
// "mean ± std" at the given precision.
std::string format_summary(const MetricSummary& s, int precision = 2);

struct EvalCase {
  std::string case_id;
  Volume pred;
  Volume gt;
  Volume mask;
};

struct EvalFailure {
  std::string case_id;
  std::string message;
};

struct EvaluationReport {
  std::vector<CaseMetrics> cases;
  std::vector<EvalFailure> failures;
  MetricSummary mae;
  MetricSummary psnr;  // over cases with a defined PSNR
  MetricSummary ssim;
};

struct EvalOptions {
  std::optional<double> fixed_range;  // e.g. 4095 HU
  double alternate_fixed_range = 4095.0;
};

EvaluationReport evaluate_cases(const std::vector<EvalCase>& cases, const EvalOptions& options = {});

// Columns case_id, mae, psnr, ssim; a final `mean ± std` row.
std::string report_csv(const EvaluationReport& report);

} // namespace sct
