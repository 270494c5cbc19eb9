#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "midistyle/tensor.hpp"

namespace midistyle {

// Stack of values saved by forward passes for consumption by the matching
// backward passes (strict LIFO). Activation masks are kept as raw bytes so
// they cost 1/8th of a double tensor.
class Context {
 public:
  void push(Tensor t) { saved_.push_back(std::move(t)); }
  Tensor pop() {
    require(!saved_.empty(), errc::empty_batch,
            "backward requested more saved tensors than forward stored");
    Tensor t = std::move(saved_.back());
    saved_.pop_back();
    return t;
  }

  void push_bytes(std::vector<std::uint8_t> b) {
    bytes_.push_back(std::move(b));
  }
  std::vector<std::uint8_t> pop_bytes() {
    require(!bytes_.empty(), errc::empty_batch,
            "backward requested more saved masks than forward stored");
    std::vector<std::uint8_t> b = std::move(bytes_.back());
    bytes_.pop_back();
    return b;
  }

  bool empty() const { return saved_.empty() && bytes_.empty(); }
  void clear() {
    saved_.clear();
    bytes_.clear();
  }

 private:
  std::vector<Tensor> saved_;
  std::vector<std::vector<std::uint8_t>> bytes_;
};

// A learnable tensor plus its gradient accumulator. Biases are flagged so
// the initializer can zero them while weights draw from N(0, 0.02).
struct Param {
  Tensor value;
  Tensor grad;
  bool is_bias = false;

  Param() = default;
  Param(std::vector<int64_t> shape, bool bias)
      : value(std::move(shape)), grad(value.shape()), is_bias(bias) {}

  void zero_grad() { grad.fill(0.0); }
};

// Layer interface. forward with a null context is pure inference and is
// safe to call concurrently on a frozen module; with a context it saves
// whatever backward needs. backward pops that state in reverse order,
// accumulates (+=) into parameter gradients, and returns the input
// gradient.
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor forward(const Tensor& x, Context* ctx) const = 0;
  virtual Tensor backward(const Tensor& grad, Context& ctx) = 0;
  virtual void collect_params(std::vector<Param*>& out) { (void)out; }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    collect_params(out);
    return out;
  }
  int64_t parameter_count();
};

class Conv2d : public Module {
 public:
  Conv2d(int64_t in_channels, int64_t out_channels, int64_t kernel,
         int64_t stride, int64_t padding);

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
  void collect_params(std::vector<Param*>& out) override;

  Param weight;  // (out_channels, in_channels, kernel, kernel)
  Param bias;    // (out_channels)

 private:
  int64_t in_ch_, out_ch_, k_, stride_, pad_;
};

class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d(int64_t in_channels, int64_t out_channels, int64_t kernel,
                  int64_t stride, int64_t padding, int64_t output_padding);

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
  void collect_params(std::vector<Param*>& out) override;

  Param weight;  // (in_channels, out_channels, kernel, kernel)
  Param bias;    // (out_channels)

 private:
  int64_t in_ch_, out_ch_, k_, stride_, pad_, out_pad_;
};

// Per-sample, per-channel normalization over the spatial plane using the
// population variance; no learnable scale/shift.
class InstanceNorm2d : public Module {
 public:
  static constexpr double kEps = 1e-5;

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
};

class ReLU : public Module {
 public:
  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
};

class LeakyReLU : public Module {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;

 private:
  double slope_;
};

// Logistic activation with outputs clamped to [1e-15, 1 - 1e-15] so they
// stay strictly inside (0,1) even for saturating inputs.
class Sigmoid : public Module {
 public:
  static constexpr double kClamp = 1e-15;

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
};

class ZeroPad2d : public Module {
 public:
  ZeroPad2d(int64_t top, int64_t bottom, int64_t left, int64_t right)
      : top_(top), bottom_(bottom), left_(left), right_(right) {}

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;

 private:
  int64_t top_, bottom_, left_, right_;
};

// Exact inverse of ZeroPad2d with the same margins.
class Crop2d : public Module {
 public:
  Crop2d(int64_t top, int64_t bottom, int64_t left, int64_t right)
      : top_(top), bottom_(bottom), left_(left), right_(right) {}

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;

 private:
  int64_t top_, bottom_, left_, right_;
};

class Sequential : public Module {
 public:
  Sequential() = default;

  void add(std::unique_ptr<Module> m) { steps_.push_back(std::move(m)); }
  template <typename T, typename... Args>
  T& emplace(Args&&... args) {
    auto m = std::make_unique<T>(std::forward<Args>(args)...);
    T& ref = *m;
    steps_.push_back(std::move(m));
    return ref;
  }

  size_t size() const { return steps_.size(); }

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  std::vector<std::unique_ptr<Module>> steps_;
};

// conv3x3 -> norm -> ReLU -> conv3x3 -> norm, plus the identity skip.
class ResidualBlock : public Module {
 public:
  explicit ResidualBlock(int64_t channels);

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Sequential body_;
};

// U-Net level: down-path, nested submodule, up-path, and (except at the
// outermost level) a channel-concatenation skip of the level's input onto
// the up-path output.
class UnetBlock : public Module {
 public:
  UnetBlock(Sequential down, std::unique_ptr<Module> submodule, Sequential up,
            bool outermost, int64_t input_channels);

  Tensor forward(const Tensor& x, Context* ctx) const override;
  Tensor backward(const Tensor& grad, Context& ctx) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  Sequential down_;
  std::unique_ptr<Module> submodule_;  // null at the innermost level
  Sequential up_;
  bool outermost_;
  int64_t input_channels_;
};

// Convolution geometry helpers shared by layers and shape oracles.
inline int64_t conv_out_dim(int64_t in, int64_t kernel, int64_t stride,
                            int64_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}
inline int64_t conv_transpose_out_dim(int64_t in, int64_t kernel,
                                      int64_t stride, int64_t padding,
                                      int64_t output_padding) {
  return (in - 1) * stride - 2 * padding + kernel + output_padding;
}

}  // namespace midistyle
