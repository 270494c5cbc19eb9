// Network building blocks checked against naive six-loop convolution
// oracles and central finite differences through every backward pass.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "midistyle/layers.hpp"
#include "midistyle/rng.hpp"

using namespace midistyle;

namespace {

Tensor random_tensor(const std::vector<int64_t>& shape, Rng& rng,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

void randomize_params(Module& m, Rng& rng, double scale = 0.3) {
  for (Param* p : m.params()) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = rng.uniform(-scale, scale);
    }
  }
}

// Direct convolution: walk every output cell and sum the window.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b,
                  int64_t stride, int64_t pad) {
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t co = w.dim(0), k = w.dim(2);
  const int64_t oh = conv_out_dim(h, k, stride, pad);
  const int64_t ow = conv_out_dim(wd, k, stride, pad);
  Tensor out({n, co, oh, ow});
  for (int64_t s = 0; s < n; ++s) {
    for (int64_t oc = 0; oc < co; ++oc) {
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xo = 0; xo < ow; ++xo) {
          double acc = b[oc];
          for (int64_t ic = 0; ic < ci; ++ic) {
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) {
                const int64_t hh = y * stride - pad + i;
                const int64_t ww = xo * stride - pad + j;
                if (hh < 0 || hh >= h || ww < 0 || ww >= wd) continue;
                acc += w[((oc * ci + ic) * k + i) * k + j] *
                       x[((s * ci + ic) * h + hh) * wd + ww];
              }
            }
          }
          out[((s * co + oc) * oh + y) * ow + xo] = acc;
        }
      }
    }
  }
  return out;
}

// Direct transposed convolution: scatter every input cell through the
// kernel onto the output canvas.
Tensor naive_conv_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                            int64_t stride, int64_t pad, int64_t out_pad) {
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t co = w.dim(1), k = w.dim(2);
  const int64_t oh = conv_transpose_out_dim(h, k, stride, pad, out_pad);
  const int64_t ow = conv_transpose_out_dim(wd, k, stride, pad, out_pad);
  Tensor out({n, co, oh, ow});
  for (int64_t s = 0; s < n; ++s) {
    for (int64_t oc = 0; oc < co; ++oc) {
      for (int64_t i = 0; i < oh * ow; ++i) {
        out[(s * co + oc) * oh * ow + i] = b[oc];
      }
    }
    for (int64_t ic = 0; ic < ci; ++ic) {
      for (int64_t hi = 0; hi < h; ++hi) {
        for (int64_t wi = 0; wi < wd; ++wi) {
          const double v = x[((s * ci + ic) * h + hi) * wd + wi];
          for (int64_t oc = 0; oc < co; ++oc) {
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) {
                const int64_t y = hi * stride - pad + i;
                const int64_t xx = wi * stride - pad + j;
                if (y < 0 || y >= oh || xx < 0 || xx >= ow) continue;
                out[((s * co + oc) * oh + y) * ow + xx] +=
                    w[((ic * co + oc) * k + i) * k + j] * v;
              }
            }
          }
        }
      }
    }
  }
  return out;
}

void check_close(const Tensor& got, const Tensor& want, double eps) {
  REQUIRE(got.same_shape(want));
  for (int64_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(eps));
  }
}

// L(x) = sum_i R_i * f(x)_i for a fixed random R; dL/d(output) = R.
double weighted_sum(const Tensor& out, const Tensor& r) {
  double acc = 0.0;
  for (int64_t i = 0; i < out.size(); ++i) acc += out[i] * r[i];
  return acc;
}

double fd_slot(double* slot, double h, const std::function<double()>& eval) {
  const double keep = *slot;
  *slot = keep + h;
  const double up = eval();
  *slot = keep - h;
  const double down = eval();
  *slot = keep;
  return (up - down) / (2.0 * h);
}

// Full gradient check of one module: inputs and every parameter.
void check_gradients(Module& m, Tensor x, Rng& rng, double h, double eps) {
  Tensor probe = m.forward(x, nullptr);
  const Tensor r = random_tensor(probe.shape(), rng);
  const auto eval = [&] { return weighted_sum(m.forward(x, nullptr), r); };

  for (Param* p : m.params()) p->zero_grad();
  Context ctx;
  m.forward(x, &ctx);
  const Tensor gx = m.backward(r, ctx);
  CHECK(ctx.empty());

  REQUIRE(gx.same_shape(x));
  for (int64_t i = 0; i < x.size(); ++i) {
    const double want = fd_slot(&x[i], h, eval);
    CHECK(gx[i] == doctest::Approx(want).epsilon(eps));
  }
  for (Param* p : m.params()) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      const double want = fd_slot(&p->value[i], h, eval);
      CHECK(p->grad[i] == doctest::Approx(want).epsilon(eps));
    }
  }
}

}  // namespace

TEST_CASE("context is strict LIFO and refuses to underflow") {
  Context ctx;
  CHECK(ctx.empty());
  Tensor a({2});
  a[0] = 1.0;
  Tensor b({2});
  b[0] = 2.0;
  ctx.push(a);
  ctx.push(b);
  ctx.push_bytes({7, 8});
  CHECK_FALSE(ctx.empty());
  CHECK(ctx.pop_bytes() == std::vector<std::uint8_t>{7, 8});
  CHECK(ctx.pop()[0] == 2.0);
  CHECK(ctx.pop()[0] == 1.0);
  CHECK(ctx.empty());
  CHECK_THROWS_AS(ctx.pop(), Error);
  CHECK_THROWS_AS(ctx.pop_bytes(), Error);

  ctx.push(a);
  ctx.clear();
  CHECK(ctx.empty());

  // a backward without its forward trips the underflow guard
  ReLU relu;
  Context fresh;
  Tensor g({1, 1, 1, 1});
  CHECK_THROWS_AS(relu.backward(g, fresh), Error);
}

TEST_CASE("convolution forward matches the six-loop oracle") {
  Rng rng(201);
  struct Case {
    int64_t ci, co, k, stride, pad, h, w;
  };
  const std::vector<Case> cases = {
      {2, 3, 3, 1, 1, 5, 4}, {1, 2, 4, 2, 1, 8, 6}, {3, 1, 1, 1, 0, 3, 3},
      {2, 2, 7, 1, 3, 9, 7}, {1, 4, 4, 2, 1, 16, 12}, {2, 3, 3, 2, 0, 7, 5}};
  for (const Case& c : cases) {
    Conv2d conv(c.ci, c.co, c.k, c.stride, c.pad);
    randomize_params(conv, rng);
    const Tensor x = random_tensor({2, c.ci, c.h, c.w}, rng);
    const Tensor got = conv.forward(x, nullptr);
    const Tensor want =
        naive_conv(x, conv.weight.value, conv.bias.value, c.stride, c.pad);
    CHECK(got.dim(2) == conv_out_dim(c.h, c.k, c.stride, c.pad));
    CHECK(got.dim(3) == conv_out_dim(c.w, c.k, c.stride, c.pad));
    check_close(got, want, 1e-12);
  }

  // geometry and input validation
  CHECK_THROWS_AS(Conv2d(0, 1, 3, 1, 1), Error);
  CHECK_THROWS_AS(Conv2d(1, 0, 3, 1, 1), Error);
  CHECK_THROWS_AS(Conv2d(1, 1, 0, 1, 1), Error);
  CHECK_THROWS_AS(Conv2d(1, 1, 3, 0, 1), Error);
  CHECK_THROWS_AS(Conv2d(1, 1, 3, 1, -1), Error);
  Conv2d conv(2, 3, 3, 1, 0);
  Tensor wrong_ch({1, 1, 5, 5});
  CHECK_THROWS_AS(conv.forward(wrong_ch, nullptr), Error);
  Tensor tiny({1, 2, 2, 2});
  CHECK_THROWS_AS(conv.forward(tiny, nullptr), Error);
  Tensor rank3({2, 5, 5});
  CHECK_THROWS_AS(conv.forward(rank3, nullptr), Error);
}

TEST_CASE("transposed convolution forward matches the scatter oracle") {
  Rng rng(202);
  struct Case {
    int64_t ci, co, k, stride, pad, out_pad, h, w;
  };
  const std::vector<Case> cases = {{3, 2, 3, 2, 1, 1, 4, 3},
                                   {2, 2, 4, 2, 1, 0, 5, 4},
                                   {1, 3, 3, 1, 1, 0, 6, 6},
                                   {4, 1, 2, 2, 0, 1, 3, 5}};
  for (const Case& c : cases) {
    ConvTranspose2d deconv(c.ci, c.co, c.k, c.stride, c.pad, c.out_pad);
    randomize_params(deconv, rng);
    const Tensor x = random_tensor({2, c.ci, c.h, c.w}, rng);
    const Tensor got = deconv.forward(x, nullptr);
    const Tensor want = naive_conv_transpose(
        x, deconv.weight.value, deconv.bias.value, c.stride, c.pad, c.out_pad);
    CHECK(got.dim(2) ==
          conv_transpose_out_dim(c.h, c.k, c.stride, c.pad, c.out_pad));
    check_close(got, want, 1e-12);
  }

  CHECK_THROWS_AS(ConvTranspose2d(1, 1, 3, 2, 1, 2), Error);  // out_pad >= s
  CHECK_THROWS_AS(ConvTranspose2d(1, 1, 3, 1, -1, 0), Error);
  ConvTranspose2d deconv(2, 1, 3, 2, 1, 1);
  Tensor wrong_ch({1, 3, 4, 4});
  CHECK_THROWS_AS(deconv.forward(wrong_ch, nullptr), Error);
}

TEST_CASE("stride-1 transposed convolution inverts shape against conv") {
  // the two geometry helpers agree on inverse configurations
  for (int64_t in = 4; in <= 33; in += 7) {
    CHECK(conv_transpose_out_dim(conv_out_dim(in, 3, 1, 1), 3, 1, 1, 0) == in);
    // the stride-2 round trip needs output padding to recover odd sizes
    const int64_t out_pad = in % 2;
    CHECK(conv_transpose_out_dim(conv_out_dim(in, 4, 2, 1), 4, 2, 1, out_pad) ==
          in);
  }
  CHECK(conv_out_dim(64, 7, 1, 3) == 64);
  CHECK(conv_out_dim(64, 4, 2, 1) == 32);
  CHECK(conv_transpose_out_dim(16, 4, 2, 1, 0) == 32);
  CHECK(conv_transpose_out_dim(3, 3, 2, 1, 1) == 6);
}

TEST_CASE("convolution gradients match finite differences") {
  Rng rng(203);
  Conv2d conv(2, 3, 3, 2, 1);
  randomize_params(conv, rng);
  check_gradients(conv, random_tensor({2, 2, 5, 4}, rng), rng, 1e-6, 1e-6);

  ConvTranspose2d deconv(2, 3, 3, 2, 1, 1);
  randomize_params(deconv, rng);
  check_gradients(deconv, random_tensor({2, 2, 3, 4}, rng), rng, 1e-6, 1e-6);
}

TEST_CASE("gradients accumulate across backward passes until zeroed") {
  Rng rng(204);
  Conv2d conv(1, 2, 3, 1, 1);
  randomize_params(conv, rng);
  const Tensor x = random_tensor({1, 1, 4, 4}, rng);
  const Tensor r = random_tensor({1, 2, 4, 4}, rng);

  Context ctx;
  conv.forward(x, &ctx);
  conv.backward(r, ctx);
  const Tensor once = conv.weight.grad;
  const Tensor once_b = conv.bias.grad;

  conv.forward(x, &ctx);
  conv.backward(r, ctx);
  for (int64_t i = 0; i < once.size(); ++i) {
    CHECK(conv.weight.grad[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
  }
  for (int64_t i = 0; i < once_b.size(); ++i) {
    CHECK(conv.bias.grad[i] == doctest::Approx(2.0 * once_b[i]).epsilon(1e-12));
  }

  conv.weight.zero_grad();
  conv.bias.zero_grad();
  for (int64_t i = 0; i < once.size(); ++i) CHECK(conv.weight.grad[i] == 0.0);

  // bias flags tell the initializer which tensors to zero
  CHECK_FALSE(conv.weight.is_bias);
  CHECK(conv.bias.is_bias);
  CHECK(conv.parameter_count() == 2 * 1 * 3 * 3 + 2);
}

TEST_CASE("instance norm normalizes each plane and backs up exactly") {
  Rng rng(205);
  InstanceNorm2d norm;
  Tensor x = random_tensor({2, 3, 4, 3}, rng, -2.0, 2.0);
  const Tensor y = norm.forward(x, nullptr);
  REQUIRE(y.same_shape(x));

  // per-plane mean 0, population variance ~ 1 (shrunk slightly by eps)
  const int64_t plane = 12;
  for (int64_t s = 0; s < 6; ++s) {
    double mean = 0.0, var = 0.0;
    for (int64_t i = 0; i < plane; ++i) mean += y[s * plane + i];
    mean /= static_cast<double>(plane);
    for (int64_t i = 0; i < plane; ++i) {
      var += (y[s * plane + i] - mean) * (y[s * plane + i] - mean);
    }
    var /= static_cast<double>(plane);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));

    // matches the direct normalization of the input plane
    double xm = 0.0, xv = 0.0;
    for (int64_t i = 0; i < plane; ++i) xm += x[s * plane + i];
    xm /= static_cast<double>(plane);
    for (int64_t i = 0; i < plane; ++i) {
      xv += (x[s * plane + i] - xm) * (x[s * plane + i] - xm);
    }
    xv /= static_cast<double>(plane);
    for (int64_t i = 0; i < plane; ++i) {
      const double want =
          (x[s * plane + i] - xm) / std::sqrt(xv + InstanceNorm2d::kEps);
      CHECK(y[s * plane + i] == doctest::Approx(want).epsilon(1e-12));
    }
  }

  check_gradients(norm, x, rng, 1e-5, 1e-5);

  Tensor rank2({3, 3});
  CHECK_THROWS_AS(norm.forward(rank2, nullptr), Error);
}

TEST_CASE("activations follow their formulas and gradients") {
  Rng rng(206);
  ReLU relu;
  LeakyReLU leaky(0.2);
  Sigmoid sigmoid;

  Tensor x = random_tensor({2, 2, 3, 3}, rng, -2.0, 2.0);
  // keep every entry away from the activation kink
  for (int64_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 0.1) x[i] = x[i] < 0.0 ? -0.1 : 0.1;
  }

  const Tensor yr = relu.forward(x, nullptr);
  const Tensor yl = leaky.forward(x, nullptr);
  const Tensor ys = sigmoid.forward(x, nullptr);
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(yr[i] == (x[i] > 0.0 ? x[i] : 0.0));
    CHECK(yl[i] == (x[i] > 0.0 ? x[i] : 0.2 * x[i]));
    const double expect =
        x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                    : std::exp(x[i]) / (1.0 + std::exp(x[i]));
    CHECK(ys[i] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(ys[i] > 0.0);
    CHECK(ys[i] < 1.0);
  }

  check_gradients(relu, x, rng, 1e-6, 1e-6);
  check_gradients(leaky, x, rng, 1e-6, 1e-6);
  check_gradients(sigmoid, x, rng, 1e-5, 1e-6);

  // saturating inputs clamp strictly inside (0,1)
  Tensor extreme({2});
  extreme[0] = 800.0;
  extreme[1] = -800.0;
  const Tensor clamped = sigmoid.forward(extreme, nullptr);
  CHECK(clamped[0] == 1.0 - Sigmoid::kClamp);
  CHECK(clamped[1] == Sigmoid::kClamp);
}

TEST_CASE("zero padding and cropping are exact inverses") {
  Rng rng(207);
  const Tensor x = random_tensor({2, 3, 4, 5}, rng);
  ZeroPad2d pad(1, 2, 3, 0);
  Crop2d crop(1, 2, 3, 0);

  const Tensor padded = pad.forward(x, nullptr);
  REQUIRE(padded.dim(2) == 4 + 1 + 2);
  REQUIRE(padded.dim(3) == 5 + 3 + 0);
  // interior cells carry the source, margins are zero
  for (int64_t s = 0; s < 2 * 3; ++s) {
    for (int64_t r = 0; r < 7; ++r) {
      for (int64_t c = 0; c < 8; ++c) {
        const double v = padded[(s * 7 + r) * 8 + c];
        const int64_t sr = r - 1, sc = c - 3;
        if (sr >= 0 && sr < 4 && sc >= 0 && sc < 5) {
          CHECK(v == x[(s * 4 + sr) * 5 + sc]);
        } else {
          CHECK(v == 0.0);
        }
      }
    }
  }

  const Tensor back = crop.forward(padded, nullptr);
  REQUIRE(back.same_shape(x));
  for (int64_t i = 0; i < x.size(); ++i) CHECK(back[i] == x[i]);

  // backward passes are the mirrored data movements
  const Tensor g = random_tensor(padded.shape(), rng);
  Context ctx;
  const Tensor gx = pad.backward(g, ctx);
  const Tensor same = crop.forward(g, nullptr);
  REQUIRE(gx.same_shape(same));
  for (int64_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == same[i]);

  const Tensor gc = random_tensor(x.shape(), rng);
  const Tensor gpad = crop.backward(gc, ctx);
  const Tensor repad = pad.forward(gc, nullptr);
  REQUIRE(gpad.same_shape(repad));
  for (int64_t i = 0; i < gpad.size(); ++i) CHECK(gpad[i] == repad[i]);

  check_gradients(pad, x, rng, 1e-6, 1e-9);
  Tensor small({1, 1, 2, 2});
  CHECK_THROWS_AS(Crop2d(1, 1, 1, 1).forward(small, nullptr), Error);
}

TEST_CASE("sequential composes forward, reverses backward, keeps order") {
  Rng rng(208);
  Sequential seq;
  seq.emplace<Conv2d>(1, 2, 3, 1, 1);
  seq.emplace<InstanceNorm2d>();
  seq.emplace<LeakyReLU>(0.2);
  seq.emplace<Conv2d>(2, 1, 3, 2, 1);
  CHECK(seq.size() == 4);
  randomize_params(seq, rng);

  // parameter order is insertion order: conv1 w, conv1 b, conv2 w, conv2 b
  const auto params = seq.params();
  REQUIRE(params.size() == 4);
  CHECK(params[0]->value.size() == 2 * 1 * 9);
  CHECK(params[1]->value.size() == 2);
  CHECK(params[2]->value.size() == 1 * 2 * 9);
  CHECK(params[3]->value.size() == 1);
  CHECK(seq.parameter_count() == 18 + 2 + 18 + 1);

  const Tensor x = random_tensor({1, 1, 6, 6}, rng);
  const Tensor direct = seq.forward(x, nullptr);
  CHECK(direct.dim(1) == 1);
  CHECK(direct.dim(2) == 3);

  check_gradients(seq, x, rng, 1e-5, 1e-5);
}

TEST_CASE("a fresh residual block is the identity map") {
  // all parameters initialize to zero, so the body contributes nothing
  ResidualBlock block(3);
  Rng rng(209);
  const Tensor x = random_tensor({2, 3, 5, 4}, rng);
  const Tensor y = block.forward(x, nullptr);
  REQUIRE(y.same_shape(x));
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

  // parameters: two 3x3 convs with biases at 3 channels
  CHECK(block.parameter_count() == 2 * (3 * 3 * 9 + 3));

  // and the skip path passes gradients straight through
  Context ctx;
  block.forward(x, &ctx);
  const Tensor g = random_tensor(x.shape(), rng);
  const Tensor gx = block.backward(g, ctx);
  // with zero conv weights the body gradient dies at the first conv, so
  // the input gradient is exactly the skip gradient
  for (int64_t i = 0; i < g.size(); ++i) CHECK(gx[i] == g[i]);
}

TEST_CASE("residual block gradients match finite differences") {
  Rng rng(210);
  ResidualBlock block(2);
  randomize_params(block, rng);
  check_gradients(block, random_tensor({1, 2, 4, 4}, rng), rng, 1e-5, 1e-5);
}

TEST_CASE("u-net level concatenates its input onto the up path") {
  Rng rng(211);
  // inner level: 2 -> 4 -> 2, then concat with its 2-channel input
  Sequential inner_down;
  inner_down.emplace<LeakyReLU>(0.2);
  inner_down.emplace<Conv2d>(2, 4, 4, 2, 1);
  Sequential inner_up;
  inner_up.emplace<ReLU>();
  inner_up.emplace<ConvTranspose2d>(4, 2, 4, 2, 1, 0);
  auto inner = std::make_unique<UnetBlock>(
      std::move(inner_down), nullptr, std::move(inner_up), false, 2);

  // outer level: 1 -> 2 -> (inner: 4) -> 1
  Sequential outer_down;
  outer_down.emplace<Conv2d>(1, 2, 4, 2, 1);
  Sequential outer_up;
  outer_up.emplace<ReLU>();
  outer_up.emplace<ConvTranspose2d>(4, 1, 4, 2, 1, 0);
  UnetBlock net(std::move(outer_down), std::move(inner), std::move(outer_up),
                true, 1);

  randomize_params(net, rng);
  CHECK(net.parameter_count() ==
        (2 * 1 * 16 + 2) + (4 * 2 * 16 + 4) + (4 * 2 * 16 + 2) +
            (4 * 1 * 16 + 1));

  Tensor x = random_tensor({1, 1, 8, 8}, rng);
  const Tensor y = net.forward(x, nullptr);
  REQUIRE(y.rank() == 4);
  CHECK(y.dim(0) == 1);
  CHECK(y.dim(1) == 1);
  CHECK(y.dim(2) == 8);
  CHECK(y.dim(3) == 8);

  check_gradients(net, x, rng, 1e-6, 1e-5);
}

TEST_CASE("non-outermost u-net levels put the skip channels first") {
  Rng rng(212);
  Sequential down;
  down.emplace<Conv2d>(2, 3, 4, 2, 1);
  Sequential up;
  up.emplace<ConvTranspose2d>(3, 2, 4, 2, 1, 0);
  UnetBlock level(std::move(down), nullptr, std::move(up), false, 2);
  randomize_params(level, rng);

  const Tensor x = random_tensor({2, 2, 4, 4}, rng);
  const Tensor y = level.forward(x, nullptr);
  REQUIRE(y.dim(1) == 4);  // 2 skip channels + 2 processed
  const int64_t plane = 16;
  for (int64_t s = 0; s < 2; ++s) {
    for (int64_t c = 0; c < 2; ++c) {
      for (int64_t i = 0; i < plane; ++i) {
        CHECK(y[((s * 4 + c) * plane) + i] == x[((s * 2 + c) * plane) + i]);
      }
    }
  }

  check_gradients(level, x, rng, 1e-6, 1e-5);
}
