#include "sct/model.hpp"

#include <cmath>
#include <random>

#include "sct/error.hpp"
#include "sct/text.hpp"

namespace sct {

using ad::Shape;
using ad::Tensor;

void validate(const ModelSpec& s) {
  if (s.depth < 1) fail(ErrorCode::InvalidSpec, "depth must be >= 1");
  if (s.depth > 8) fail(ErrorCode::InvalidSpec, "depth must be <= 8");
  if (s.base_width < 1) fail(ErrorCode::InvalidSpec, "base_width must be >= 1");
  if (s.in_channels < 1 || s.in_channels % 2 == 0)
    fail(ErrorCode::InvalidSpec, "in_channels must be odd and >= 1");
  if (s.out_channels < 1) fail(ErrorCode::InvalidSpec, "out_channels must be >= 1");
}

std::size_t spatial_multiple(const ModelSpec& spec) { return std::size_t{1} << spec.depth; }

std::string_view to_string(NormKind v) { return v == NormKind::Instance ? "instance" : "none"; }
std::string_view to_string(Activation v) { return v == Activation::Relu ? "relu" : "leaky_relu"; }
std::string_view to_string(FinalActivation v) {
  return v == FinalActivation::Sigmoid ? "sigmoid" : "identity";
}

NormKind parse_norm(std::string_view t) {
  if (t == "instance") return NormKind::Instance;
  if (t == "none") return NormKind::None;
  fail(ErrorCode::InvalidArgument, "unknown norm '" + std::string(t) + "'");
}

Activation parse_activation(std::string_view t) {
  if (t == "relu") return Activation::Relu;
  if (t == "leaky_relu") return Activation::LeakyRelu;
  fail(ErrorCode::InvalidArgument, "unknown activation '" + std::string(t) + "'");
}

FinalActivation parse_final_activation(std::string_view t) {
  if (t == "sigmoid") return FinalActivation::Sigmoid;
  if (t == "identity") return FinalActivation::Identity;
  fail(ErrorCode::InvalidArgument, "unknown final activation '" + std::string(t) + "'");
}

void write_spec(std::map<std::string, std::string>& out, const ModelSpec& s) {
  out["model.in_channels"] = std::to_string(s.in_channels);
  out["model.out_channels"] = std::to_string(s.out_channels);
  out["model.depth"] = std::to_string(s.depth);
  out["model.base_width"] = std::to_string(s.base_width);
  out["model.norm"] = std::string(to_string(s.norm));
  out["model.activation"] = std::string(to_string(s.activation));
  out["model.final_activation"] = std::string(to_string(s.final_activation));
}

ModelSpec read_spec(const std::map<std::string, std::string>& in) {
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = in.find(key);
    if (it == in.end()) fail(ErrorCode::CorruptCheckpoint, "missing " + key);
    return it->second;
  };
  ModelSpec s;
  s.in_channels = static_cast<std::size_t>(text::parse_int(get("model.in_channels")));
  s.out_channels = static_cast<std::size_t>(text::parse_int(get("model.out_channels")));
  s.depth = static_cast<std::size_t>(text::parse_int(get("model.depth")));
  s.base_width = static_cast<std::size_t>(text::parse_int(get("model.base_width")));
  s.norm = parse_norm(get("model.norm"));
  s.activation = parse_activation(get("model.activation"));
  s.final_activation = parse_final_activation(get("model.final_activation"));
  return s;
}

namespace {

void add_conv(std::vector<std::pair<std::string, Shape>>& out, const std::string& name, std::size_t cin,
              std::size_t cout, std::size_t k) {
  out.emplace_back(name + ".weight", Shape{cout, cin, k, k});
  out.emplace_back(name + ".bias", Shape{cout});
}

void add_conv_norm(std::vector<std::pair<std::string, Shape>>& out, const ModelSpec& spec,
                   const std::string& name, std::size_t cin, std::size_t cout) {
  add_conv(out, name, cin, cout, 3);
  if (spec.norm == NormKind::Instance) {
    out.emplace_back(name + ".gain", Shape{cout});
    out.emplace_back(name + ".shift", Shape{cout});
  }
}

void add_block(std::vector<std::pair<std::string, Shape>>& out, const ModelSpec& spec,
               const std::string& name, std::size_t cin, std::size_t cout) {
  add_conv_norm(out, spec, name + ".conv1", cin, cout);
  add_conv_norm(out, spec, name + ".conv2", cout, cout);
}

std::size_t width_at(const ModelSpec& spec, std::size_t level) { return spec.base_width << level; }

} // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& spec) {
  validate(spec);
  std::vector<std::pair<std::string, Shape>> out;
  std::size_t cin = spec.in_channels;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    add_block(out, spec, "enc" + std::to_string(l), cin, width_at(spec, l));
    cin = width_at(spec, l);
  }
  add_block(out, spec, "bottleneck", cin, width_at(spec, spec.depth));
  for (std::size_t l = spec.depth; l-- > 0;) {
    const std::string name = "dec" + std::to_string(l);
    add_conv(out, name + ".up", width_at(spec, l + 1), width_at(spec, l), 3);
    add_block(out, spec, name, 2 * width_at(spec, l), width_at(spec, l));
  }
  add_conv(out, "head", spec.base_width, spec.out_channels, 1);
  return out;
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::vector<std::pair<std::string, Tensor<T>>> parameters)
    : spec_(spec), params_(std::move(parameters)) {
  const auto layout = parameter_layout(spec_);
  if (layout.size() != params_.size())
    fail(ErrorCode::InvalidSpec, "parameter count does not match the spec");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != params_[i].first || layout[i].second != params_[i].second.shape())
      fail(ErrorCode::InvalidSpec, "parameter " + params_[i].first + " does not match layout entry " +
                                       layout[i].first + " " + ad::shape_string(layout[i].second));
    index_[params_[i].first] = i;
  }
}

template <typename T>
Model<T> Model<T>::build(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, Tensor<T>>> params;
  for (const auto& [name, shape] : parameter_layout(spec)) {
    std::vector<T> values(ad::numel(shape), T(0));
    if (name.ends_with(".weight")) {
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : values) v = static_cast<T>(dist(rng));
    } else if (name.ends_with(".gain")) {
      std::fill(values.begin(), values.end(), T(1));
    }
    params.emplace_back(name, Tensor<T>::from(shape, std::move(values), true));
  }
  return Model(spec, std::move(params));
}

template <typename T>
std::vector<Tensor<T>> Model<T>::parameters() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.second);
  return out;
}

template <typename T>
const Tensor<T>& Model<T>::parameter(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::InvalidArgument, "no parameter named " + name);
  return params_[it->second].second;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.second.numel();
  return n;
}

template <typename T>
void Model<T>::zero_grad() const {
  for (const auto& p : params_) p.second.zero_grad();
}

template <typename T>
Tensor<T> Model<T>::conv(const std::string& name, const Tensor<T>& x, std::size_t padding) const {
  return ad::conv2d(x, parameter(name + ".weight"), parameter(name + ".bias"), 1, padding);
}

template <typename T>
Tensor<T> Model<T>::activate(const Tensor<T>& x) const {
  return spec_.activation == Activation::Relu ? ad::relu(x) : ad::leaky_relu(x, T(0.01));
}

template <typename T>
Tensor<T> Model<T>::conv_norm_act(const std::string& name, const Tensor<T>& x) const {
  auto y = conv(name, x, 1);
  if (spec_.norm == NormKind::Instance)
    y = ad::instance_norm2d(y, parameter(name + ".gain"), parameter(name + ".shift"));
  return activate(y);
}

template <typename T>
Tensor<T> Model<T>::block(const std::string& name, const Tensor<T>& x) const {
  return conv_norm_act(name + ".conv2", conv_norm_act(name + ".conv1", x));
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& input) const {
  if (input.rank() != 4 || input.dim(1) != spec_.in_channels)
    fail(ErrorCode::ShapeMismatch, "model expects (B, " + std::to_string(spec_.in_channels) +
                                       ", H, W), got " + ad::shape_string(input.shape()));
  const std::size_t m = spatial_multiple(spec_);
  if (input.dim(2) % m != 0 || input.dim(3) % m != 0)
    fail(ErrorCode::IndivisibleExtent, "H and W must be multiples of " + std::to_string(m) + ", got " +
                                           ad::shape_string(input.shape()));
  std::vector<Tensor<T>> skips;
  Tensor<T> x = input;
  for (std::size_t l = 0; l < spec_.depth; ++l) {
    x = block("enc" + std::to_string(l), x);
    skips.push_back(x);
    x = ad::max_pool2(x);
  }
  x = block("bottleneck", x);
  for (std::size_t l = spec_.depth; l-- > 0;) {
    const std::string name = "dec" + std::to_string(l);
    x = activate(conv(name + ".up", ad::upsample_nearest2x(x), 1));
    x = block(name, ad::concat_channels(skips[l], x));
  }
  x = conv("head", x, 0);
  return spec_.final_activation == FinalActivation::Sigmoid ? ad::sigmoid(x) : x;
}

template <typename To, typename From>
Model<To> convert_model(const Model<From>& model, bool requires_grad) {
  std::vector<std::pair<std::string, Tensor<To>>> params;
  for (const auto& [name, t] : model.named_parameters()) {
    std::vector<To> values(t.values().begin(), t.values().end());
    params.emplace_back(name, Tensor<To>::from(t.shape(), std::move(values), requires_grad));
  }
  return Model<To>(model.spec(), std::move(params));
}

template class Model<float>;
template class Model<double>;
template Model<double> convert_model<double, float>(const Model<float>&, bool);
template Model<float> convert_model<float, double>(const Model<double>&, bool);
template Model<float> convert_model<float, float>(const Model<float>&, bool);

} // namespace sct
