#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sct/autodiff.hpp"

namespace sct {

enum class NormKind { Instance, None };
enum class Activation { Relu, LeakyRelu };
enum class FinalActivation { Sigmoid, Identity };

struct ModelSpec {
  std::size_t in_channels = 3;
  std::size_t out_channels = 1;
  std::size_t depth = 3;
  std::size_t base_width = 16;
  NormKind norm = NormKind::Instance;
  Activation activation = Activation::Relu;
  FinalActivation final_activation = FinalActivation::Sigmoid;

  bool operator==(const ModelSpec&) const = default;
};

void validate(const ModelSpec& spec);
// Spatial extents fed to forward must be multiples of this.
std::size_t spatial_multiple(const ModelSpec& spec);

std::string_view to_string(NormKind v);
std::string_view to_string(Activation v);
std::string_view to_string(FinalActivation v);
NormKind parse_norm(std::string_view text);
Activation parse_activation(std::string_view text);
FinalActivation parse_final_activation(std::string_view text);

void write_spec(std::map<std::string, std::string>& out, const ModelSpec& spec);
ModelSpec read_spec(const std::map<std::string, std::string>& in);

// Named parameter shapes in construction order; a pure function of the spec.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelSpec& spec);

// U-Net: per level two 3x3 conv + norm + activation blocks with doubling
// width and 2x2 max-pool; decoder upsamples (nearest x2 + 3x3 conv),
// concatenates the skip and runs another block; 1x1 conv head.
template <typename T>
class Model {
public:
  Model(ModelSpec spec, std::vector<std::pair<std::string, ad::Tensor<T>>> parameters);

  // He-normal conv weights, zero biases, unit gains, zero shifts.
  static Model build(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<std::pair<std::string, ad::Tensor<T>>>& named_parameters() const noexcept {
    return params_;
  }
  std::vector<ad::Tensor<T>> parameters() const;
  const ad::Tensor<T>& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  void zero_grad() const;

  // (B, in_channels, H, W) -> (B, out_channels, H, W).
  ad::Tensor<T> forward(const ad::Tensor<T>& input) const;

private:
  ad::Tensor<T> conv(const std::string& name, const ad::Tensor<T>& x, std::size_t padding) const;
  ad::Tensor<T> block(const std::string& name, const ad::Tensor<T>& x) const;
  ad::Tensor<T> conv_norm_act(const std::string& name, const ad::Tensor<T>& x) const;
  ad::Tensor<T> activate(const ad::Tensor<T>& x) const;

  ModelSpec spec_;
  std::vector<std::pair<std::string, ad::Tensor<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

// Same parameter values in another precision.
template <typename To, typename From>
Model<To> convert_model(const Model<From>& model, bool requires_grad = true);

} // namespace sct
