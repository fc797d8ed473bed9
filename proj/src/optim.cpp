#include "sct/optim.hpp"

#include <cmath>
#include <numbers>

#include "sct/error.hpp"
#include "sct/text.hpp"

namespace sct {

template <typename T>
void adamw_step(std::span<const ad::Tensor<T>> params, AdamWState<T>& state, double lr) {
  if (!(lr >= 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be >= 0");
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), T(0));
      state.v.emplace_back(p.numel(), T(0));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    fail(ErrorCode::ShapeMismatch, "optimizer state holds a different number of parameters");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (state.m[k].size() != params[k].numel() || params[k].grad().size() != params[k].numel())
      fail(ErrorCode::ShapeMismatch, "gradient or moment size differs from parameter " + std::to_string(k));

  state.step += 1;
  const auto& hp = state.hyper;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  const double decay = 1.0 - lr * hp.weight_decay;
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values();
    const auto g = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double m_hat = static_cast<double>(m[i]) / bc1;
      const double v_hat = static_cast<double>(v[i]) / bc2;
      const double pi = static_cast<double>(p[i]);
      p[i] = static_cast<T>(pi * decay - lr * (m_hat / (std::sqrt(v_hat) + hp.eps)));
    }
  }
}

template void adamw_step<float>(std::span<const ad::Tensor<float>>, AdamWState<float>&, double);
template void adamw_step<double>(std::span<const ad::Tensor<double>>, AdamWState<double>&, double);

void validate(const LrSchedule& s) {
  if (!(s.lr_min >= 0.0 && s.lr0 > s.lr_min)) fail(ErrorCode::InvalidArgument, "need lr0 > lr_min >= 0");
  if (s.total_epochs < 1) fail(ErrorCode::InvalidArgument, "total epochs must be >= 1");
}

double cosine_lr(std::size_t epoch, const LrSchedule& s) {
  validate(s);
  if (epoch > s.total_epochs)
    fail(ErrorCode::OutOfRangeEpoch,
         "epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(s.total_epochs) + "]");
  if (epoch == 0) return s.lr0;
  if (epoch == s.total_epochs) return s.lr_min;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(s.total_epochs);
  return s.lr_min + 0.5 * (s.lr0 - s.lr_min) * (1.0 + std::cos(phase));
}

void write_hyper(std::map<std::string, std::string>& out, const AdamWHyper& h) {
  out["optim.beta1"] = text::format_double(h.beta1);
  out["optim.beta2"] = text::format_double(h.beta2);
  out["optim.eps"] = text::format_double(h.eps);
  out["optim.weight_decay"] = text::format_double(h.weight_decay);
}

AdamWHyper read_hyper(const std::map<std::string, std::string>& in) {
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = in.find(key);
    if (it == in.end()) fail(ErrorCode::CorruptCheckpoint, "missing " + key);
    return it->second;
  };
  AdamWHyper h;
  h.beta1 = text::parse_double(get("optim.beta1"));
  h.beta2 = text::parse_double(get("optim.beta2"));
  h.eps = text::parse_double(get("optim.eps"));
  h.weight_decay = text::parse_double(get("optim.weight_decay"));
  return h;
}

} // namespace sct
