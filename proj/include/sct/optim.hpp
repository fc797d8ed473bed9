#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sct/autodiff.hpp"

namespace sct {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;

  bool operator==(const AdamWHyper&) const = default;
};

template <typename T>
struct AdamWState {
  AdamWHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// One AdamW update over every parameter, reading gradients from the tensors:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
// Moments are allocated on the first step.
template <typename T>
void adamw_step(std::span<const ad::Tensor<T>> params, AdamWState<T>& state, double lr);

struct LrSchedule {
  double lr0 = 1e-3;
  double lr_min = 0.0;
  std::size_t total_epochs = 100;

  bool operator==(const LrSchedule&) const = default;
};

void validate(const LrSchedule& schedule);

// lr_min + (lr0 - lr_min) (1 + cos(pi e / T)) / 2 for e in [0, T].
double cosine_lr(std::size_t epoch, const LrSchedule& schedule);

void write_hyper(std::map<std::string, std::string>& out, const AdamWHyper& hyper);
AdamWHyper read_hyper(const std::map<std::string, std::string>& in);

} // namespace sct
