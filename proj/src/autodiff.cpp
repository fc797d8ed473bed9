#include "sct/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <Eigen/Core>

#include "sct/error.hpp"

namespace sct::ad {

namespace {

thread_local bool g_grad_enabled = true;

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Creates the output node of an op. The backward function is attached only
// when recording is on and some input needs a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::initializer_list<Tensor<T>> inputs,
                      const char* op, std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  bool needs = false;
  for (const auto& in : inputs)
    if (in.defined() && in.requires_grad()) needs = true;
  if (needs && g_grad_enabled) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->inputs.push_back(in.node_ptr());
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
bool wants_grad(const NodePtr<T>& n) {
  return n && n->requires_grad;
}

void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

void require_rank4(const Shape& s, const char* what) {
  require(s.size() == 4, ErrorCode::ShapeMismatch,
          std::string(what) + " expects a (B, C, H, W) tensor, got " + shape_string(s));
}

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad, std::size_t out_h,
            std::size_t out_w, T* col) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = col + ((c * kh + ki) * kw + kj) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src = image + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) ? T(0) : src[ix];
          }
        }
      }
}

template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t height, std::size_t width, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w,
            T* image) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = col + ((c * kh + ki) * kw + kj) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          T* dst = image + (c * height + static_cast<std::size_t>(iy)) * width;
          const T* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(width)) dst[ix] += src[ox];
          }
        }
      }
}

} // namespace

std::size_t numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = ad::numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  for (auto e : shape)
    require(e > 0, ErrorCode::ShapeMismatch, "zero extent in shape " + shape_string(shape));
  require(values.size() == ad::numel(shape), ErrorCode::ShapeMismatch,
          std::to_string(values.size()) + " values for shape " + shape_string(shape));
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), T(0));
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, ErrorCode::NotScalar, "item() on shape " + shape_string(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() const {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach_copy(bool requires_grad) const {
  return from(node_->shape, node_->value, requires_grad);
}

// ---------------------------------------------------------------------------
// Tape and backward

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  // Iterative post-order DFS.
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename T>
void Tape<T>::run_backward(Node<T>& root) const {
  for (Node<T>* n : nodes_)
    if (!n->leaf) n->grad.assign(n->value.size(), T(0));
  root.grad[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

template <typename T>
void backward(const Tensor<T>& loss) {
  require(loss.defined(), ErrorCode::NotScalar, "backward on an empty tensor");
  require(loss.numel() == 1, ErrorCode::NotScalar, "backward needs a scalar, got " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;
  const auto tape = Tape<T>::record(loss);
  tape.run_backward(*loss.node());
}

// ---------------------------------------------------------------------------
// Ops

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank4(input.shape(), "conv2d input");
  require_rank4(weight.shape(), "conv2d weight");
  require(stride >= 1, ErrorCode::ShapeMismatch, "conv2d stride must be >= 1");
  const std::size_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  require(weight.dim(1) == cin, ErrorCode::ShapeMismatch,
          "conv2d weight " + shape_string(weight.shape()) + " vs input " + shape_string(input.shape()));
  require(kh <= h + 2 * padding && kw <= w + 2 * padding, ErrorCode::ShapeMismatch,
          "conv2d kernel larger than padded input");
  if (bias.defined())
    require(bias.shape() == Shape{cout}, ErrorCode::ShapeMismatch,
            "conv2d bias " + shape_string(bias.shape()));
  const std::size_t out_h = (h + 2 * padding - kh) / stride + 1;
  const std::size_t out_w = (w + 2 * padding - kw) / stride + 1;
  const std::size_t plane = out_h * out_w;
  const std::size_t k = cin * kh * kw;
  const bool direct = kh == 1 && kw == 1 && stride == 1 && padding == 0;

  std::vector<T> out(batch * cout * plane);
  std::vector<T> col(direct ? 0 : k * plane);
  const ConstMatMap<T> wmat(weight.values().data(), cout, k);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* x = input.values().data() + b * cin * h * w;
    const T* colp = x;
    if (!direct) {
      im2col(x, cin, h, w, kh, kw, stride, padding, out_h, out_w, col.data());
      colp = col.data();
    }
    MatMap<T> y(out.data() + b * cout * plane, cout, plane);
    y.noalias() = wmat * ConstMatMap<T>(colp, k, plane);
    if (bias.defined())
      for (std::size_t c = 0; c < cout; ++c) y.row(c).array() += bias.values()[c];
  }

  return make_result<T>(
      {batch, cout, out_h, out_w}, std::move(out), {input, weight, bias}, "conv2d",
      [=](Node<T>& self) {
        const auto& in = self.inputs[0];
        const auto& wt = self.inputs[1];
        const auto& bs = self.inputs[2];
        std::vector<T> colbuf(direct ? 0 : k * plane);
        std::vector<T> dcol(direct ? 0 : k * plane);
        const ConstMatMap<T> wm(wt->value.data(), cout, k);
        for (std::size_t b = 0; b < batch; ++b) {
          const ConstMatMap<T> dy(self.grad.data() + b * cout * plane, cout, plane);
          const T* x = in->value.data() + b * cin * h * w;
          if (wants_grad(wt)) {
            const T* colp = x;
            if (!direct) {
              im2col(x, cin, h, w, kh, kw, stride, padding, out_h, out_w, colbuf.data());
              colp = colbuf.data();
            }
            MatMap<T> dw(wt->grad.data(), cout, k);
            dw.noalias() += dy * ConstMatMap<T>(colp, k, plane).transpose();
          }
          if (wants_grad(bs))
            for (std::size_t c = 0; c < cout; ++c) bs->grad[c] += dy.row(c).sum();
          if (wants_grad(in)) {
            T* dx = in->grad.data() + b * cin * h * w;
            if (direct) {
              MatMap<T> dxm(dx, cin, plane);
              dxm.noalias() += wm.transpose() * dy;
            } else {
              MatMap<T> dc(dcol.data(), k, plane);
              dc.noalias() = wm.transpose() * dy;
              col2im(dcol.data(), cin, h, w, kh, kw, stride, padding, out_h, out_w, dx);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& t, T slope) {
  std::vector<T> out(t.numel());
  const auto x = t.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return make_result<T>(t.shape(), std::move(out), {t}, "leaky_relu", [slope](Node<T>& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T x = in.value[i];
      // Gradient at exactly 0 is 0.
      const T d = x > T(0) ? T(1) : (x < T(0) ? slope : T(0));
      in.grad[i] += d * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& t) {
  return leaky_relu(t, T(0));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& t) {
  std::vector<T> out(t.numel());
  const auto x = t.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return make_result<T>(t.shape(), std::move(out), {t}, "sigmoid", [](Node<T>& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.value[i];
      in.grad[i] += y * (T(1) - y) * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> instance_norm2d(const Tensor<T>& t, const Tensor<T>& gain, const Tensor<T>& shift, T epsilon) {
  require_rank4(t.shape(), "instance_norm2d");
  const std::size_t batch = t.dim(0), channels = t.dim(1), plane = t.dim(2) * t.dim(3);
  require(gain.shape() == Shape{channels} && shift.shape() == Shape{channels}, ErrorCode::ShapeMismatch,
          "instance_norm2d gain/shift must have shape (C)");
  std::vector<T> xhat(t.numel());
  std::vector<T> inv_std(batch * channels);
  std::vector<T> out(t.numel());
  const auto x = t.values();
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const std::size_t c = bc % channels;
    const T* xp = x.data() + bc * plane;
    T mean = 0;
    for (std::size_t i = 0; i < plane; ++i) mean += xp[i];
    mean /= static_cast<T>(plane);
    T var = 0;
    for (std::size_t i = 0; i < plane; ++i) var += (xp[i] - mean) * (xp[i] - mean);
    var /= static_cast<T>(plane);
    const T is = T(1) / std::sqrt(var + epsilon);
    inv_std[bc] = is;
    for (std::size_t i = 0; i < plane; ++i) {
      const T xh = (xp[i] - mean) * is;
      xhat[bc * plane + i] = xh;
      out[bc * plane + i] = xh * gain.values()[c] + shift.values()[c];
    }
  }
  return make_result<T>(
      t.shape(), std::move(out), {t, gain, shift}, "instance_norm2d",
      [xhat = std::move(xhat), inv_std = std::move(inv_std), batch, channels, plane](Node<T>& self) {
        const auto& in = self.inputs[0];
        const auto& g = self.inputs[1];
        const auto& s = self.inputs[2];
        for (std::size_t bc = 0; bc < batch * channels; ++bc) {
          const std::size_t c = bc % channels;
          const T* dy = self.grad.data() + bc * plane;
          const T* xh = xhat.data() + bc * plane;
          T sum_dy = 0, sum_dy_xh = 0;
          for (std::size_t i = 0; i < plane; ++i) {
            sum_dy += dy[i];
            sum_dy_xh += dy[i] * xh[i];
          }
          if (wants_grad(g)) g->grad[c] += sum_dy_xh;
          if (wants_grad(s)) s->grad[c] += sum_dy;
          if (wants_grad(in)) {
            const T gc = g->value[c];
            const T n = static_cast<T>(plane);
            const T mean_dxh = gc * sum_dy / n;
            const T mean_dxh_xh = gc * sum_dy_xh / n;
            T* dx = in->grad.data() + bc * plane;
            for (std::size_t i = 0; i < plane; ++i)
              dx[i] += inv_std[bc] * (gc * dy[i] - mean_dxh - xh[i] * mean_dxh_xh);
          }
        }
      });
}

template <typename T>
Tensor<T> max_pool2(const Tensor<T>& t) {
  require_rank4(t.shape(), "max_pool2");
  const std::size_t bc = t.dim(0) * t.dim(1), h = t.dim(2), w = t.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    fail(ErrorCode::OddExtent, "max_pool2 needs even H and W, got " + shape_string(t.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<T> out(bc * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto x = t.values();
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (p * h + 2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (p * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = x[best];
        argmax[o] = best;
      }
  return make_result<T>({t.dim(0), t.dim(1), oh, ow}, std::move(out), {t}, "max_pool2",
                        [argmax = std::move(argmax)](Node<T>& self) {
                          auto& in = *self.inputs[0];
                          for (std::size_t o = 0; o < self.grad.size(); ++o) in.grad[argmax[o]] += self.grad[o];
                        });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& t) {
  require_rank4(t.shape(), "upsample_nearest2x");
  const std::size_t bc = t.dim(0) * t.dim(1), h = t.dim(2), w = t.dim(3);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<T> out(bc * oh * ow);
  const auto x = t.values();
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) out[(p * oh + y) * ow + xo] = x[(p * h + y / 2) * w + xo / 2];
  return make_result<T>({t.dim(0), t.dim(1), oh, ow}, std::move(out), {t}, "upsample_nearest2x",
                        [bc, h, w, oh, ow](Node<T>& self) {
                          auto& in = *self.inputs[0];
                          for (std::size_t p = 0; p < bc; ++p)
                            for (std::size_t y = 0; y < oh; ++y)
                              for (std::size_t xo = 0; xo < ow; ++xo)
                                in.grad[(p * h + y / 2) * w + xo / 2] += self.grad[(p * oh + y) * ow + xo];
                        });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank4(a.shape(), "concat_channels");
  require_rank4(b.shape(), "concat_channels");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3), ErrorCode::ShapeMismatch,
          "concat_channels " + shape_string(a.shape()) + " with " + shape_string(b.shape()));
  const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<T> out(batch * (ca + cb) * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(a.values().data() + n * ca * plane, ca * plane, out.data() + n * (ca + cb) * plane);
    std::copy_n(b.values().data() + n * cb * plane, cb * plane, out.data() + (n * (ca + cb) + ca) * plane);
  }
  return make_result<T>({batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b}, "concat_channels",
                        [batch, ca, cb, plane](Node<T>& self) {
                          const auto& na = self.inputs[0];
                          const auto& nb = self.inputs[1];
                          for (std::size_t n = 0; n < batch; ++n) {
                            const T* g = self.grad.data() + n * (ca + cb) * plane;
                            if (wants_grad(na)) {
                              T* d = na->grad.data() + n * ca * plane;
                              for (std::size_t i = 0; i < ca * plane; ++i) d[i] += g[i];
                            }
                            if (wants_grad(nb)) {
                              T* d = nb->grad.data() + n * cb * plane;
                              for (std::size_t i = 0; i < cb * plane; ++i) d[i] += g[ca * plane + i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, std::size_t begin, std::size_t count) {
  require_rank4(t.shape(), "slice_channels");
  require(count >= 1 && begin + count <= t.dim(1), ErrorCode::ShapeMismatch, "slice_channels out of range");
  const std::size_t batch = t.dim(0), c = t.dim(1), plane = t.dim(2) * t.dim(3);
  std::vector<T> out(batch * count * plane);
  for (std::size_t n = 0; n < batch; ++n)
    std::copy_n(t.values().data() + (n * c + begin) * plane, count * plane, out.data() + n * count * plane);
  return make_result<T>({batch, count, t.dim(2), t.dim(3)}, std::move(out), {t}, "slice_channels",
                        [batch, c, begin, count, plane](Node<T>& self) {
                          auto& in = *self.inputs[0];
                          for (std::size_t n = 0; n < batch; ++n)
                            for (std::size_t i = 0; i < count * plane; ++i)
                              in.grad[(n * c + begin) * plane + i] += self.grad[n * count * plane + i];
                        });
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& t, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  require_rank4(t.shape(), "crop2d");
  require(height >= 1 && width >= 1 && top + height <= t.dim(2) && left + width <= t.dim(3),
          ErrorCode::ShapeMismatch, "crop2d window outside " + shape_string(t.shape()));
  const std::size_t bc = t.dim(0) * t.dim(1), h = t.dim(2), w = t.dim(3);
  std::vector<T> out(bc * height * width);
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t y = 0; y < height; ++y)
      std::copy_n(t.values().data() + (p * h + top + y) * w + left, width, out.data() + (p * height + y) * width);
  return make_result<T>({t.dim(0), t.dim(1), height, width}, std::move(out), {t}, "crop2d",
                        [bc, h, w, top, left, height, width](Node<T>& self) {
                          auto& in = *self.inputs[0];
                          for (std::size_t p = 0; p < bc; ++p)
                            for (std::size_t y = 0; y < height; ++y)
                              for (std::size_t x = 0; x < width; ++x)
                                in.grad[(p * h + top + y) * w + left + x] += self.grad[(p * height + y) * width + x];
                        });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weight) {
  require(pred.shape() == target.shape(), ErrorCode::ShapeMismatch,
          "l1_loss " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  const std::size_t n = pred.numel();
  const auto p = pred.values();
  const auto q = target.values();
  T denom = static_cast<T>(n);
  std::vector<T> w;
  if (weight.defined()) {
    require(weight.shape() == pred.shape(), ErrorCode::ShapeMismatch,
            "l1_loss weight " + shape_string(weight.shape()));
    w.assign(weight.values().begin(), weight.values().end());
    denom = 0;
    for (T v : w) {
      require(v >= T(0), ErrorCode::InvalidArgument, "l1_loss weights must be nonnegative");
      denom += v;
    }
    require(denom > T(0), ErrorCode::ZeroWeight, "l1_loss weights sum to zero");
  }
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) total += (w.empty() ? T(1) : w[i]) * std::abs(p[i] - q[i]);
  return make_result<T>(Shape{}, std::vector<T>{total / denom}, {pred, target}, "l1_loss",
                        [w = std::move(w), denom](Node<T>& self) {
                          const auto& np = self.inputs[0];
                          const auto& nt = self.inputs[1];
                          const T g = self.grad[0] / denom;
                          for (std::size_t i = 0; i < np->value.size(); ++i) {
                            const T d = np->value[i] - nt->value[i];
                            const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                            const T gi = g * s * (w.empty() ? T(1) : w[i]);
                            if (wants_grad(np)) np->grad[i] += gi;
                            if (wants_grad(nt)) nt->grad[i] -= gi;
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& t) {
  T total = 0;
  for (T v : t.values()) total += v;
  return make_result<T>(Shape{}, std::vector<T>{total}, {t}, "sum", [](Node<T>& self) {
    auto& in = *self.inputs[0];
    for (auto& g : in.grad) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> sum_product(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          "sum_product " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  T total = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) total += a.values()[i] * b.values()[i];
  return make_result<T>(Shape{}, std::vector<T>{total}, {a, b}, "sum_product", [](Node<T>& self) {
    const auto& na = self.inputs[0];
    const auto& nb = self.inputs[1];
    const T g = self.grad[0];
    for (std::size_t i = 0; i < na->value.size(); ++i) {
      if (wants_grad(na)) na->grad[i] += g * nb->value[i];
      if (wants_grad(nb)) nb->grad[i] += g * na->value[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& function, const std::vector<Tensor<T>>& inputs,
                           double h, double tolerance, double floor) {
  for (const auto& in : inputs) {
    require(in.requires_grad() && in.is_leaf(), ErrorCode::InvalidArgument,
            "grad_check inputs must be leaves that require grad");
    in.zero_grad();
  }
  backward(function());

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto values = inputs[k].values();
    const std::vector<T> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
    GradCheckEntry entry;
    entry.input = k;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        values[i] = static_cast<T>(saved + h);
        plus = static_cast<double>(function().item());
        values[i] = static_cast<T>(saved - h);
        minus = static_cast<double>(function().item());
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = static_cast<double>(analytic[i]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > entry.max_rel_error || i == 0) {
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        entry.max_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.inputs.push_back(entry);
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Instantiations

#define SCT_AD_INSTANTIATE(T)                                                                            \
  template class Tensor<T>;                                                                              \
  template class Tape<T>;                                                                                \
  template void backward<T>(const Tensor<T>&);                                                           \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,        \
                               std::size_t);                                                             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                          \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                                                 \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                       \
  template Tensor<T> instance_norm2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> max_pool2<T>(const Tensor<T>&);                                                     \
  template Tensor<T> upsample_nearest2x<T>(const Tensor<T>&);                                            \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);                      \
  template Tensor<T> crop2d<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);    \
  template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                           \
  template Tensor<T> sum_product<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template GradCheckReport grad_check<T>(const std::function<Tensor<T>()>&, const std::vector<Tensor<T>>&, \
                                         double, double, double);

SCT_AD_INSTANTIATE(float)
SCT_AD_INSTANTIATE(double)

#undef SCT_AD_INSTANTIATE

} // namespace sct::ad
