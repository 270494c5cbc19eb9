#include "midistyle/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace midistyle {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_input(const Tensor& x, int64_t channels, const char* what) {
  require(x.rank() == 4, errc::shape_mismatch, what);
  require(x.dim(1) == channels, errc::shape_mismatch, what);
}

// Gathers sliding windows of one (C,H,W) sample into a (C*k*k, n_oh*n_ow)
// matrix; out-of-bounds positions read as zero.
void im2col(const double* src, int64_t c_in, int64_t h_in, int64_t w_in,
            int64_t k, int64_t stride, int64_t pad, int64_t n_oh, int64_t n_ow,
            double* dst) {
  const int64_t plane = n_oh * n_ow;
  for (int64_t c = 0; c < c_in; ++c) {
    for (int64_t i = 0; i < k; ++i) {
      for (int64_t j = 0; j < k; ++j) {
        double* row = dst + ((c * k + i) * k + j) * plane;
        const double* channel = src + c * h_in * w_in;
        for (int64_t oh = 0; oh < n_oh; ++oh) {
          const int64_t h = oh * stride - pad + i;
          if (h < 0 || h >= h_in) {
            std::fill(row + oh * n_ow, row + (oh + 1) * n_ow, 0.0);
            continue;
          }
          for (int64_t ow = 0; ow < n_ow; ++ow) {
            const int64_t w = ow * stride - pad + j;
            row[oh * n_ow + ow] =
                (w < 0 || w >= w_in) ? 0.0 : channel[h * w_in + w];
          }
        }
      }
    }
  }
}

// Scatter-add of a (C*k*k, n_sh*n_sw) matrix back onto a (C,h_out,w_out)
// sample; source position (sh, sw) lands at (sh*stride - pad + i, ...).
void col2im_add(const double* col, int64_t c_out, int64_t h_out, int64_t w_out,
                int64_t k, int64_t stride, int64_t pad, int64_t n_sh,
                int64_t n_sw, double* dst) {
  const int64_t plane = n_sh * n_sw;
  for (int64_t c = 0; c < c_out; ++c) {
    for (int64_t i = 0; i < k; ++i) {
      for (int64_t j = 0; j < k; ++j) {
        const double* row = col + ((c * k + i) * k + j) * plane;
        double* channel = dst + c * h_out * w_out;
        for (int64_t sh = 0; sh < n_sh; ++sh) {
          const int64_t h = sh * stride - pad + i;
          if (h < 0 || h >= h_out) continue;
          for (int64_t sw = 0; sw < n_sw; ++sw) {
            const int64_t w = sw * stride - pad + j;
            if (w < 0 || w >= w_out) continue;
            channel[h * w_out + w] += row[sh * n_sw + sw];
          }
        }
      }
    }
  }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.rank() == 4 && b.rank() == 4 && a.dim(0) == b.dim(0) &&
              a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          errc::shape_mismatch, "channel concat inputs disagree");
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const int64_t plane = a.dim(2) * a.dim(3);
  Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
  for (int64_t s = 0; s < n; ++s) {
    std::copy(a.data() + s * ca * plane, a.data() + (s + 1) * ca * plane,
              out.data() + s * (ca + cb) * plane);
    std::copy(b.data() + s * cb * plane, b.data() + (s + 1) * cb * plane,
              out.data() + (s * (ca + cb) + ca) * plane);
  }
  return out;
}

// Inverse of concat_channels: splits grad into the first `ca` channels and
// the remainder.
std::pair<Tensor, Tensor> split_channels(const Tensor& g, int64_t ca) {
  require(g.rank() == 4 && g.dim(1) > ca, errc::shape_mismatch,
          "channel split point out of range");
  const int64_t n = g.dim(0), cb = g.dim(1) - ca;
  const int64_t plane = g.dim(2) * g.dim(3);
  Tensor ga({n, ca, g.dim(2), g.dim(3)});
  Tensor gb({n, cb, g.dim(2), g.dim(3)});
  for (int64_t s = 0; s < n; ++s) {
    const double* base = g.data() + s * (ca + cb) * plane;
    std::copy(base, base + ca * plane, ga.data() + s * ca * plane);
    std::copy(base + ca * plane, base + (ca + cb) * plane,
              gb.data() + s * cb * plane);
  }
  return {std::move(ga), std::move(gb)};
}

}  // namespace

int64_t Module::parameter_count() {
  int64_t total = 0;
  for (const Param* p : params()) total += p->value.size();
  return total;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int64_t in_channels, int64_t out_channels, int64_t kernel,
               int64_t stride, int64_t padding)
    : weight({out_channels, in_channels, kernel, kernel}, false),
      bias({out_channels}, true),
      in_ch_(in_channels),
      out_ch_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding) {
  require(in_channels >= 1 && out_channels >= 1 && kernel >= 1 &&
              stride >= 1 && padding >= 0,
          errc::bad_config, "invalid convolution geometry");
}

Tensor Conv2d::forward(const Tensor& x, Context* ctx) const {
  check_input(x, in_ch_, "convolution input shape mismatch");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t oh = conv_out_dim(h, k_, stride_, pad_);
  const int64_t ow = conv_out_dim(w, k_, stride_, pad_);
  require(oh >= 1 && ow >= 1, errc::shape_mismatch,
          "convolution input smaller than its kernel");

  Tensor out({n, out_ch_, oh, ow});
  RowMat col(in_ch_ * k_ * k_, oh * ow);
  ConstMatMap w_m(weight.value.data(), out_ch_, in_ch_ * k_ * k_);
  ConstVecMap b_v(bias.value.data(), out_ch_);
  for (int64_t s = 0; s < n; ++s) {
    im2col(x.data() + s * in_ch_ * h * w, in_ch_, h, w, k_, stride_, pad_, oh,
           ow, col.data());
    MatMap out_m(out.data() + s * out_ch_ * oh * ow, out_ch_, oh * ow);
    out_m.noalias() = w_m * col;
    out_m.colwise() += b_v;
  }
  if (ctx != nullptr) ctx->push(x);
  return out;
}

Tensor Conv2d::backward(const Tensor& grad, Context& ctx) {
  const Tensor x = ctx.pop();
  check_input(x, in_ch_, "saved convolution input shape mismatch");
  check_input(grad, out_ch_, "convolution gradient shape mismatch");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t oh = grad.dim(2), ow = grad.dim(3);

  Tensor gx({n, in_ch_, h, w});
  RowMat col(in_ch_ * k_ * k_, oh * ow);
  RowMat gcol(in_ch_ * k_ * k_, oh * ow);
  ConstMatMap w_m(weight.value.data(), out_ch_, in_ch_ * k_ * k_);
  MatMap gw_m(weight.grad.data(), out_ch_, in_ch_ * k_ * k_);
  VecMap gb_v(bias.grad.data(), out_ch_);
  for (int64_t s = 0; s < n; ++s) {
    im2col(x.data() + s * in_ch_ * h * w, in_ch_, h, w, k_, stride_, pad_, oh,
           ow, col.data());
    ConstMatMap g_m(grad.data() + s * out_ch_ * oh * ow, out_ch_, oh * ow);
    gw_m.noalias() += g_m * col.transpose();
    gb_v.noalias() += g_m.rowwise().sum();
    gcol.noalias() = w_m.transpose() * g_m;
    col2im_add(gcol.data(), in_ch_, h, w, k_, stride_, pad_, oh, ow,
               gx.data() + s * in_ch_ * h * w);
  }
  return gx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int64_t in_channels, int64_t out_channels,
                                 int64_t kernel, int64_t stride,
                                 int64_t padding, int64_t output_padding)
    : weight({in_channels, out_channels, kernel, kernel}, false),
      bias({out_channels}, true),
      in_ch_(in_channels),
      out_ch_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      out_pad_(output_padding) {
  require(in_channels >= 1 && out_channels >= 1 && kernel >= 1 &&
              stride >= 1 && padding >= 0 && output_padding >= 0 &&
              output_padding < stride,
          errc::bad_config, "invalid transposed-convolution geometry");
}

Tensor ConvTranspose2d::forward(const Tensor& x, Context* ctx) const {
  check_input(x, in_ch_, "transposed-convolution input shape mismatch");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t oh = conv_transpose_out_dim(h, k_, stride_, pad_, out_pad_);
  const int64_t ow = conv_transpose_out_dim(w, k_, stride_, pad_, out_pad_);
  require(oh >= 1 && ow >= 1, errc::shape_mismatch,
          "transposed convolution collapses the input");

  Tensor out = Tensor::zeros({n, out_ch_, oh, ow});
  RowMat col(out_ch_ * k_ * k_, h * w);
  ConstMatMap w_m(weight.value.data(), in_ch_, out_ch_ * k_ * k_);
  for (int64_t s = 0; s < n; ++s) {
    ConstMatMap x_m(x.data() + s * in_ch_ * h * w, in_ch_, h * w);
    col.noalias() = w_m.transpose() * x_m;
    double* out_s = out.data() + s * out_ch_ * oh * ow;
    col2im_add(col.data(), out_ch_, oh, ow, k_, stride_, pad_, h, w, out_s);
    for (int64_t c = 0; c < out_ch_; ++c) {
      const double b = bias.value[c];
      double* plane = out_s + c * oh * ow;
      for (int64_t i = 0; i < oh * ow; ++i) plane[i] += b;
    }
  }
  if (ctx != nullptr) ctx->push(x);
  return out;
}

Tensor ConvTranspose2d::backward(const Tensor& grad, Context& ctx) {
  const Tensor x = ctx.pop();
  check_input(x, in_ch_, "saved transposed-convolution input shape mismatch");
  check_input(grad, out_ch_, "transposed-convolution gradient shape mismatch");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t oh = grad.dim(2), ow = grad.dim(3);

  Tensor gx({n, in_ch_, h, w});
  RowMat gcol(out_ch_ * k_ * k_, h * w);
  ConstMatMap w_m(weight.value.data(), in_ch_, out_ch_ * k_ * k_);
  MatMap gw_m(weight.grad.data(), in_ch_, out_ch_ * k_ * k_);
  for (int64_t s = 0; s < n; ++s) {
    const double* g_s = grad.data() + s * out_ch_ * oh * ow;
    im2col(g_s, out_ch_, oh, ow, k_, stride_, pad_, h, w, gcol.data());
    ConstMatMap x_m(x.data() + s * in_ch_ * h * w, in_ch_, h * w);
    MatMap gx_m(gx.data() + s * in_ch_ * h * w, in_ch_, h * w);
    gx_m.noalias() = w_m * gcol;
    gw_m.noalias() += x_m * gcol.transpose();
    for (int64_t c = 0; c < out_ch_; ++c) {
      const double* plane = g_s + c * oh * ow;
      double acc = 0.0;
      for (int64_t i = 0; i < oh * ow; ++i) acc += plane[i];
      bias.grad[c] += acc;
    }
  }
  return gx;
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// --------------------------------------------------------- InstanceNorm2d

Tensor InstanceNorm2d::forward(const Tensor& x, Context* ctx) const {
  require(x.rank() == 4, errc::shape_mismatch,
          "instance norm expects a (N,C,H,W) input");
  const int64_t n = x.dim(0), c = x.dim(1);
  const int64_t plane = x.dim(2) * x.dim(3);
  require(plane >= 1, errc::shape_mismatch, "instance norm on empty plane");

  Tensor out(x.shape());
  Tensor inv_std({n, c});
  for (int64_t s = 0; s < n * c; ++s) {
    const double* src = x.data() + s * plane;
    double* dst = out.data() + s * plane;
    double mean = 0.0;
    for (int64_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * inv;
    inv_std[s] = inv;
  }
  if (ctx != nullptr) {
    ctx->push(out);
    ctx->push(std::move(inv_std));
  }
  return out;
}

Tensor InstanceNorm2d::backward(const Tensor& grad, Context& ctx) {
  const Tensor inv_std = ctx.pop();
  const Tensor x_hat = ctx.pop();
  check_same_shape(grad, x_hat, "instance norm gradient shape mismatch");
  const int64_t n = grad.dim(0), c = grad.dim(1);
  const int64_t plane = grad.dim(2) * grad.dim(3);

  Tensor gx(grad.shape());
  const double hw = static_cast<double>(plane);
  for (int64_t s = 0; s < n * c; ++s) {
    const double* dy = grad.data() + s * plane;
    const double* xh = x_hat.data() + s * plane;
    double* dx = gx.data() + s * plane;
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      sum_dy += dy[i];
      sum_dy_xh += dy[i] * xh[i];
    }
    const double scale = inv_std[s] / hw;
    for (int64_t i = 0; i < plane; ++i) {
      dx[i] = scale * (hw * dy[i] - sum_dy - xh[i] * sum_dy_xh);
    }
  }
  return gx;
}

// ------------------------------------------------------------ Activations

Tensor ReLU::forward(const Tensor& x, Context* ctx) const {
  Tensor out(x.shape());
  std::vector<std::uint8_t> mask;
  if (ctx != nullptr) mask.resize(static_cast<size_t>(x.size()));
  for (int64_t i = 0; i < x.size(); ++i) {
    const bool pos = x[i] > 0.0;
    out[i] = pos ? x[i] : 0.0;
    if (ctx != nullptr) mask[static_cast<size_t>(i)] = pos ? 1 : 0;
  }
  if (ctx != nullptr) ctx->push_bytes(std::move(mask));
  return out;
}

Tensor ReLU::backward(const Tensor& grad, Context& ctx) {
  const std::vector<std::uint8_t> mask = ctx.pop_bytes();
  require(static_cast<int64_t>(mask.size()) == grad.size(),
          errc::shape_mismatch, "activation mask size mismatch");
  Tensor gx(grad.shape());
  for (int64_t i = 0; i < grad.size(); ++i) {
    gx[i] = mask[static_cast<size_t>(i)] ? grad[i] : 0.0;
  }
  return gx;
}

Tensor LeakyReLU::forward(const Tensor& x, Context* ctx) const {
  Tensor out(x.shape());
  std::vector<std::uint8_t> mask;
  if (ctx != nullptr) mask.resize(static_cast<size_t>(x.size()));
  for (int64_t i = 0; i < x.size(); ++i) {
    const bool pos = x[i] > 0.0;
    out[i] = pos ? x[i] : slope_ * x[i];
    if (ctx != nullptr) mask[static_cast<size_t>(i)] = pos ? 1 : 0;
  }
  if (ctx != nullptr) ctx->push_bytes(std::move(mask));
  return out;
}

Tensor LeakyReLU::backward(const Tensor& grad, Context& ctx) {
  const std::vector<std::uint8_t> mask = ctx.pop_bytes();
  require(static_cast<int64_t>(mask.size()) == grad.size(),
          errc::shape_mismatch, "activation mask size mismatch");
  Tensor gx(grad.shape());
  for (int64_t i = 0; i < grad.size(); ++i) {
    gx[i] = mask[static_cast<size_t>(i)] ? grad[i] : slope_ * grad[i];
  }
  return gx;
}

Tensor Sigmoid::forward(const Tensor& x, Context* ctx) const {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    double y;
    if (v >= 0.0) {
      y = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y = e / (1.0 + e);
    }
    out[i] = std::min(std::max(y, kClamp), 1.0 - kClamp);
  }
  if (ctx != nullptr) ctx->push(out);
  return out;
}

Tensor Sigmoid::backward(const Tensor& grad, Context& ctx) {
  const Tensor y = ctx.pop();
  check_same_shape(grad, y, "sigmoid gradient shape mismatch");
  Tensor gx(grad.shape());
  for (int64_t i = 0; i < grad.size(); ++i) {
    gx[i] = grad[i] * y[i] * (1.0 - y[i]);
  }
  return gx;
}

// -------------------------------------------------------------- Pad / Crop

Tensor ZeroPad2d::forward(const Tensor& x, Context* ctx) const {
  (void)ctx;  // geometry is recoverable from the gradient shape
  require(x.rank() == 4, errc::shape_mismatch, "padding expects rank 4");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out = Tensor::zeros({n, c, h + top_ + bottom_, w + left_ + right_});
  const int64_t ow = w + left_ + right_;
  for (int64_t s = 0; s < n * c; ++s) {
    const double* src = x.data() + s * h * w;
    double* dst = out.data() + s * (h + top_ + bottom_) * ow;
    for (int64_t r = 0; r < h; ++r) {
      std::copy(src + r * w, src + (r + 1) * w,
                dst + (r + top_) * ow + left_);
    }
  }
  return out;
}

Tensor ZeroPad2d::backward(const Tensor& grad, Context& ctx) {
  (void)ctx;
  require(grad.rank() == 4 && grad.dim(2) > top_ + bottom_ &&
              grad.dim(3) > left_ + right_,
          errc::shape_mismatch, "padding gradient smaller than the margins");
  const int64_t n = grad.dim(0), c = grad.dim(1);
  const int64_t h = grad.dim(2) - top_ - bottom_;
  const int64_t w = grad.dim(3) - left_ - right_;
  const int64_t gw = grad.dim(3);
  Tensor gx({n, c, h, w});
  for (int64_t s = 0; s < n * c; ++s) {
    const double* src = grad.data() + s * grad.dim(2) * gw;
    double* dst = gx.data() + s * h * w;
    for (int64_t r = 0; r < h; ++r) {
      std::copy(src + (r + top_) * gw + left_, src + (r + top_) * gw + left_ + w,
                dst + r * w);
    }
  }
  return gx;
}

Tensor Crop2d::forward(const Tensor& x, Context* ctx) const {
  (void)ctx;
  require(x.rank() == 4 && x.dim(2) > top_ + bottom_ &&
              x.dim(3) > left_ + right_,
          errc::shape_mismatch, "crop margins exceed the input");
  const int64_t n = x.dim(0), c = x.dim(1);
  const int64_t h = x.dim(2) - top_ - bottom_;
  const int64_t w = x.dim(3) - left_ - right_;
  const int64_t xw = x.dim(3);
  Tensor out({n, c, h, w});
  for (int64_t s = 0; s < n * c; ++s) {
    const double* src = x.data() + s * x.dim(2) * xw;
    double* dst = out.data() + s * h * w;
    for (int64_t r = 0; r < h; ++r) {
      std::copy(src + (r + top_) * xw + left_, src + (r + top_) * xw + left_ + w,
                dst + r * w);
    }
  }
  return out;
}

Tensor Crop2d::backward(const Tensor& grad, Context& ctx) {
  (void)ctx;
  require(grad.rank() == 4, errc::shape_mismatch, "crop gradient rank");
  const int64_t n = grad.dim(0), c = grad.dim(1), h = grad.dim(2),
                w = grad.dim(3);
  const int64_t ow = w + left_ + right_;
  Tensor gx = Tensor::zeros({n, c, h + top_ + bottom_, ow});
  for (int64_t s = 0; s < n * c; ++s) {
    const double* src = grad.data() + s * h * w;
    double* dst = gx.data() + s * (h + top_ + bottom_) * ow;
    for (int64_t r = 0; r < h; ++r) {
      std::copy(src + r * w, src + (r + 1) * w, dst + (r + top_) * ow + left_);
    }
  }
  return gx;
}

// -------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, Context* ctx) const {
  Tensor cur = x;
  for (const auto& step : steps_) cur = step->forward(cur, ctx);
  return cur;
}

Tensor Sequential::backward(const Tensor& grad, Context& ctx) {
  Tensor cur = grad;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    cur = (*it)->backward(cur, ctx);
  }
  return cur;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (const auto& step : steps_) step->collect_params(out);
}

// ----------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int64_t channels) {
  body_.emplace<Conv2d>(channels, channels, 3, 1, 1);
  body_.emplace<InstanceNorm2d>();
  body_.emplace<ReLU>();
  body_.emplace<Conv2d>(channels, channels, 3, 1, 1);
  body_.emplace<InstanceNorm2d>();
}

Tensor ResidualBlock::forward(const Tensor& x, Context* ctx) const {
  Tensor out = body_.forward(x, ctx);
  out.add(x);
  return out;
}

Tensor ResidualBlock::backward(const Tensor& grad, Context& ctx) {
  Tensor gx = body_.backward(grad, ctx);
  gx.add(grad);  // identity skip
  return gx;
}

void ResidualBlock::collect_params(std::vector<Param*>& out) {
  body_.collect_params(out);
}

// --------------------------------------------------------------- UnetBlock

UnetBlock::UnetBlock(Sequential down, std::unique_ptr<Module> submodule,
                     Sequential up, bool outermost, int64_t input_channels)
    : down_(std::move(down)),
      submodule_(std::move(submodule)),
      up_(std::move(up)),
      outermost_(outermost),
      input_channels_(input_channels) {}

Tensor UnetBlock::forward(const Tensor& x, Context* ctx) const {
  Tensor h = down_.forward(x, ctx);
  if (submodule_ != nullptr) h = submodule_->forward(h, ctx);
  Tensor u = up_.forward(h, ctx);
  if (outermost_) return u;
  return concat_channels(x, u);
}

Tensor UnetBlock::backward(const Tensor& grad, Context& ctx) {
  Tensor gu;
  Tensor gx_skip;
  if (outermost_) {
    gu = grad;
  } else {
    auto parts = split_channels(grad, input_channels_);
    gx_skip = std::move(parts.first);
    gu = std::move(parts.second);
  }
  Tensor gh = up_.backward(gu, ctx);
  if (submodule_ != nullptr) gh = submodule_->backward(gh, ctx);
  Tensor gx = down_.backward(gh, ctx);
  if (!outermost_) gx.add(gx_skip);
  return gx;
}

void UnetBlock::collect_params(std::vector<Param*>& out) {
  down_.collect_params(out);
  if (submodule_ != nullptr) submodule_->collect_params(out);
  up_.collect_params(out);
}

}  // namespace midistyle
