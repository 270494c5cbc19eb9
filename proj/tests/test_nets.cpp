// Generator / discriminator assemblies: closed-form parameter counts,
// initialization replay through the public RNG, shape and range
// guarantees, spot finite-difference checks, and archive round trips.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "midistyle/archive.hpp"
#include "midistyle/nets.hpp"
#include "midistyle/rng.hpp"

using namespace midistyle;

namespace {

PianoRoll random_roll(Rng& rng, double density = 0.3) {
  PianoRoll roll;
  for (double& v : roll.values) v = rng.uniform() < density ? 1.0 : 0.0;
  roll.binary = true;
  return roll;
}

Tensor random_batch(int64_t n, Rng& rng) {
  std::vector<PianoRoll> rolls;
  for (int64_t i = 0; i < n; ++i) rolls.push_back(random_roll(rng));
  return to_tensor(rolls);
}

// Continuous-valued batch for derivative probes. Binary inputs put empty
// receptive-field windows exactly on the rectifier kink (pre-activation
// == zero bias == 0), where the loss is not differentiable and a central
// difference measures a slope average instead of the gradient.
Tensor soft_batch(int64_t n, Rng& rng) {
  Tensor t({n, 1, PianoRoll::kSteps, PianoRoll::kPitches});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.05, 0.95);
  return t;
}

// Shake every parameter (biases included) off its initial value so the
// probe point is generic.
template <typename Net>
void jitter_params(Net& net, Rng& rng) {
  for (Param* p : net.params()) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      p->value[i] += rng.uniform(-0.05, 0.05);
    }
  }
}

// Independent closed forms for the three architectures (b = base width,
// r = residual blocks), derived layer by layer from the published graphs.
int64_t resnet_params(int64_t b, int64_t r) {
  return 180 * b * b + 288 * r * b * b + 108 * b + 8 * r * b + 1;
}
int64_t unet_params(int64_t b) { return 10208 * b * b + 118 * b + 1; }
int64_t patch_params(int64_t b) { return 672 * b * b + 159 * b + 1; }

double weighted_sum(const Tensor& out, const Tensor& r) {
  double acc = 0.0;
  for (int64_t i = 0; i < out.size(); ++i) acc += out[i] * r[i];
  return acc;
}

// Spot finite-difference check: a handful of input coordinates and a
// handful of parameter coordinates instead of the full Jacobian. Deep
// nets have rectifier kinks and (near the u-net bottleneck) tiny
// normalization planes with huge curvature, where a central difference
// is itself unreliable; a probe therefore only counts when fd(h) and
// fd(h/2) agree, which certifies the loss is locally smooth enough for
// the comparison to mean anything. At least half the probes must
// survive the filter.
template <typename Net>
void spot_check_gradients(Net& net, Tensor x, Rng& rng, int probes) {
  const Tensor probe = net.forward(x, nullptr);
  const Tensor r = [&] {
    Tensor t(probe.shape());
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
  }();
  const auto eval = [&] { return weighted_sum(net.forward(x, nullptr), r); };
  const auto central = [&](double* slot, double h) {
    const double keep = *slot;
    *slot = keep + h;
    const double up = eval();
    *slot = keep - h;
    const double down = eval();
    *slot = keep;
    return (up - down) / (2.0 * h);
  };
  // h is tiny so the two-sided window almost never straddles one of the
  // tens of thousands of downstream rectifier kinks; double precision
  // still leaves the quotient ~1e-5 accurate at these loss magnitudes.
  int accepted = 0;
  const auto probe_slot = [&](double* slot, double analytic) {
    const double f1 = central(slot, 2e-7);
    const double f2 = central(slot, 1e-7);
    if (std::abs(f1 - f2) > 1e-4 + 1e-3 * std::abs(f2)) return;
    ++accepted;
    CHECK_MESSAGE(std::abs(analytic - f2) <= 2e-4 + 2e-3 * std::abs(f2),
                  "analytic " << analytic << " vs finite difference " << f2);
  };

  for (Param* p : net.params()) p->zero_grad();
  Context ctx;
  net.forward(x, &ctx);
  const Tensor gx = net.backward(r, ctx);
  CHECK(ctx.empty());
  REQUIRE(gx.same_shape(x));

  for (int i = 0; i < probes; ++i) {
    const int64_t j = static_cast<int64_t>(
        rng.uniform_int(static_cast<std::uint64_t>(x.size())));
    probe_slot(&x[j], gx[j]);
  }
  auto params = net.params();
  for (int i = 0; i < probes; ++i) {
    Param* p = params[rng.uniform_int(params.size())];
    const int64_t j = static_cast<int64_t>(
        rng.uniform_int(static_cast<std::uint64_t>(p->value.size())));
    probe_slot(&p->value[j], p->grad[j]);
  }
  CHECK(accepted >= probes);
}

}  // namespace

TEST_CASE("generator kind names round trip") {
  CHECK(generator_kind_name(GeneratorKind::ResNet9) ==
        std::string("resnet9"));
  CHECK(generator_kind_name(GeneratorKind::UNet128) ==
        std::string("unet128"));
  CHECK(generator_kind_from_name("resnet9") == GeneratorKind::ResNet9);
  CHECK(generator_kind_from_name("unet128") == GeneratorKind::UNet128);
  CHECK_THROWS_AS(generator_kind_from_name("mlp"), Error);

  GeneratorConfig bad;
  bad.base_channels = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  GeneratorConfig bad_res;
  bad_res.res_blocks = 0;
  CHECK_THROWS_AS(bad_res.validate(), Error);
  DiscriminatorConfig bad_d;
  bad_d.base_channels = -1;
  CHECK_THROWS_AS(bad_d.validate(), Error);

  // defaults are the full-size model
  GeneratorConfig g;
  CHECK(g.kind == GeneratorKind::ResNet9);
  CHECK(g.base_channels == 64);
  CHECK(g.res_blocks == 9);
  CHECK(DiscriminatorConfig{}.base_channels == 64);
}

TEST_CASE("roll/tensor conversions preserve layout") {
  Rng rng(301);
  const PianoRoll roll = random_roll(rng);
  const Tensor one = to_tensor(roll);
  REQUIRE(one.rank() == 4);
  CHECK(one.dim(0) == 1);
  CHECK(one.dim(1) == 1);
  CHECK(one.dim(2) == PianoRoll::kSteps);
  CHECK(one.dim(3) == PianoRoll::kPitches);
  for (int64_t i = 0; i < PianoRoll::kCells; ++i) CHECK(one[i] == roll.values[i]);

  std::vector<PianoRoll> rolls = {random_roll(rng), random_roll(rng),
                                  random_roll(rng)};
  const Tensor batch = to_tensor(rolls);
  CHECK(batch.dim(0) == 3);
  for (int64_t s = 0; s < 3; ++s) {
    const PianoRoll back = to_roll(batch, s);
    CHECK(back.binary);
    for (int64_t i = 0; i < PianoRoll::kCells; ++i) {
      CHECK(back.values[i] == rolls[s].values[i]);
    }
  }

  // a fractional cell clears the binary flag on the way back
  Tensor soft = batch;
  soft[5] = 0.25;
  CHECK_FALSE(to_roll(soft, 0).binary);
  CHECK(to_roll(soft, 1).binary);

  CHECK_THROWS_AS(to_tensor(std::vector<PianoRoll>{}), Error);
  CHECK_THROWS_AS(to_roll(batch, 3), Error);
  CHECK_THROWS_AS(to_roll(batch, -1), Error);
  Tensor rank3({1, 64, 84});
  CHECK_THROWS_AS(to_roll(rank3, 0), Error);
}

TEST_CASE("parameter counts match the closed forms") {
  for (int64_t b : {1, 2, 4}) {
    for (int64_t r : {1, 3}) {
      GeneratorConfig cfg;
      cfg.kind = GeneratorKind::ResNet9;
      cfg.base_channels = b;
      cfg.res_blocks = r;
      Generator g(cfg, 0);
      CHECK(g.parameter_count() == resnet_params(b, r));
    }
  }
  for (int64_t b : {1, 2}) {
    GeneratorConfig cfg;
    cfg.kind = GeneratorKind::UNet128;
    cfg.base_channels = b;
    Generator g(cfg, 0);
    CHECK(g.parameter_count() == unet_params(b));
  }
  for (int64_t b : {1, 2, 64}) {
    DiscriminatorConfig cfg;
    cfg.base_channels = b;
    Discriminator d(cfg, 0);
    CHECK(d.parameter_count() == patch_params(b));
  }
  // full-size defaults, cross-checked by a layer-by-layer hand sum
  CHECK(resnet_params(64, 9) == 11365633);
  CHECK(patch_params(64) == 2762689);
}

TEST_CASE("initialization draws weights in collection order, zeroes biases") {
  GeneratorConfig cfg;
  cfg.base_channels = 2;
  cfg.res_blocks = 2;
  Generator g(cfg, 777);

  Rng replay(777);
  for (Param* p : g.params()) {
    if (p->is_bias) {
      for (int64_t i = 0; i < p->value.size(); ++i) CHECK(p->value[i] == 0.0);
    } else {
      for (int64_t i = 0; i < p->value.size(); ++i) {
        CHECK(p->value[i] == 0.02 * replay.normal());
      }
    }
  }

  // same seed reproduces, different seed does not
  Generator again(cfg, 777);
  auto a = g.params();
  auto b = again.params();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i]->value.same_shape(b[i]->value));
    for (int64_t j = 0; j < a[i]->value.size(); ++j) {
      CHECK(a[i]->value[j] == b[i]->value[j]);
    }
  }
  Generator other(cfg, 778);
  bool any_diff = false;
  auto c = other.params();
  for (size_t i = 0; i < a.size(); ++i) {
    for (int64_t j = 0; j < a[i]->value.size(); ++j) {
      if (a[i]->value[j] != c[i]->value[j]) any_diff = true;
    }
  }
  CHECK(any_diff);
}

TEST_CASE("generators keep the input shape and map into (0,1)") {
  Rng rng(302);
  for (GeneratorKind kind : {GeneratorKind::ResNet9, GeneratorKind::UNet128}) {
    GeneratorConfig cfg;
    cfg.kind = kind;
    cfg.base_channels = kind == GeneratorKind::ResNet9 ? 2 : 1;
    cfg.res_blocks = 1;
    Generator g(cfg, 42);
    const Tensor x = random_batch(2, rng);
    const Tensor y = g.forward(x, nullptr);
    REQUIRE(y.same_shape(x));
    for (int64_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] > 0.0);
      CHECK(y[i] < 1.0);
    }

    // single-roll helper agrees with the batched path
    const PianoRoll roll = random_roll(rng);
    const PianoRoll moved = g.transfer_roll(roll);
    const Tensor direct = g.forward(to_tensor(roll), nullptr);
    CHECK_FALSE(moved.binary);
    for (int64_t i = 0; i < PianoRoll::kCells; ++i) {
      CHECK(moved.values[i] == direct[i]);
    }

    Tensor bad({1, 2, 64, 84});
    CHECK_THROWS_AS(g.forward(bad, nullptr), Error);
    Tensor wrong({1, 1, 32, 84});
    CHECK_THROWS_AS(g.forward(wrong, nullptr), Error);
  }
}

TEST_CASE("patch discriminator geometry: 70-cell receptive field, 6x8 map") {
  // receptive-field walk from the head back to the input:
  // 1 -> 4 -> 7 -> 16 -> 34 -> 70 through k4 strides {1,1,2,2,2}
  CHECK(discriminator_receptive_field() == 70);

  // map shape for the 64x84 roll: three stride-2 halvings then two
  // stride-1 k4p1 stages: (64,84)->(32,42)->(16,21)->(8,10)->(7,9)->(6,8)
  const auto [mh, mw] = discriminator_map_shape(64, 84);
  CHECK(mh == 6);
  CHECK(mw == 8);
  // the classic 128x128 canvas scores a 14x14 patch map
  CHECK(discriminator_map_shape(128, 128) ==
        std::pair<int64_t, int64_t>{14, 14});

  Rng rng(303);
  DiscriminatorConfig cfg;
  cfg.base_channels = 2;
  Discriminator d(cfg, 9);
  const Tensor x = random_batch(3, rng);
  const Tensor score = d.forward(x, nullptr);
  REQUIRE(score.rank() == 4);
  CHECK(score.dim(0) == 3);
  CHECK(score.dim(1) == 1);
  CHECK(score.dim(2) == 6);
  CHECK(score.dim(3) == 8);

  Tensor bad({1, 1, 64, 80});
  CHECK_THROWS_AS(d.forward(bad, nullptr), Error);
}

TEST_CASE("network gradients agree with finite differences at spot checks") {
  Rng rng(304);
  GeneratorConfig gcfg;
  gcfg.base_channels = 1;
  gcfg.res_blocks = 1;
  Generator resnet(gcfg, 11);
  jitter_params(resnet, rng);
  spot_check_gradients(resnet, soft_batch(1, rng), rng, 8);

  GeneratorConfig ucfg;
  ucfg.kind = GeneratorKind::UNet128;
  ucfg.base_channels = 1;
  Generator unet(ucfg, 12);
  jitter_params(unet, rng);
  spot_check_gradients(unet, soft_batch(1, rng), rng, 8);

  DiscriminatorConfig dcfg;
  dcfg.base_channels = 1;
  Discriminator patch(dcfg, 13);
  jitter_params(patch, rng);
  spot_check_gradients(patch, soft_batch(1, rng), rng, 8);

  // backward without a matching forward trips the bookkeeping guard
  Context empty;
  Tensor g({1, 1, 64, 84});
  CHECK_THROWS_AS(resnet.backward(g, empty), Error);
}

TEST_CASE("transfer model assembles per-role networks from one seed") {
  TransferModelConfig cfg;
  cfg.generator.base_channels = 2;
  cfg.generator.res_blocks = 1;
  cfg.discriminator.base_channels = 2;
  cfg.seed = 5;

  TransferModel model(cfg);
  REQUIRE(model.d_a_aux != nullptr);
  REQUIRE(model.d_b_aux != nullptr);

  const int64_t g_count = resnet_params(2, 1);
  const int64_t d_count = patch_params(2);
  CHECK(model.g_a2b.parameter_count() == g_count);
  CHECK(model.parameter_count() == 2 * g_count + 4 * d_count);

  // the two generators (and the four discriminators) start differently
  auto pa = model.g_a2b.params();
  auto pb = model.g_b2a.params();
  bool differ = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    for (int64_t j = 0; j < pa[i]->value.size(); ++j) {
      if (pa[i]->value[j] != pb[i]->value[j]) differ = true;
    }
  }
  CHECK(differ);

  // parameter lists: generators first a2b then b2a; discriminators
  // d_a, d_b, then the auxiliaries
  auto gp = model.generator_params();
  CHECK(gp.size() == pa.size() + pb.size());
  CHECK(gp.front() == pa.front());
  auto dp = model.discriminator_params();
  CHECK(dp.size() == 4 * model.d_a.params().size());
  CHECK(dp.front() == model.d_a.params().front());

  TransferModelConfig lean = cfg;
  lean.use_aux = false;
  TransferModel no_aux(lean);
  CHECK(no_aux.d_a_aux == nullptr);
  CHECK(no_aux.d_b_aux == nullptr);
  CHECK(no_aux.parameter_count() == 2 * g_count + 2 * d_count);
  CHECK(no_aux.discriminator_params().size() == 2 * model.d_a.params().size());

  // same config, same seed => byte-identical parameter archives
  TransferModel twin(cfg);
  Archive arch_a, arch_b;
  model.save_params(arch_a);
  twin.save_params(arch_b);
  CHECK(serialize_archive(arch_a) == serialize_archive(arch_b));

  TransferModelConfig reseeded = cfg;
  reseeded.seed = 6;
  TransferModel other(reseeded);
  Archive arch_c;
  other.save_params(arch_c);
  CHECK(serialize_archive(arch_a) != serialize_archive(arch_c));
}

TEST_CASE("model parameters survive an archive round trip") {
  TransferModelConfig cfg;
  cfg.generator.base_channels = 2;
  cfg.generator.res_blocks = 1;
  cfg.discriminator.base_channels = 2;
  cfg.seed = 21;

  TransferModel source(cfg);
  Archive archive;
  source.save_params(archive);

  TransferModelConfig other = cfg;
  other.seed = 22;
  TransferModel target(other);
  target.load_params(archive);

  Archive after;
  target.save_params(after);
  CHECK(serialize_archive(archive) == serialize_archive(after));

  // a mismatched architecture is rejected with the checkpoint error
  TransferModelConfig wide = cfg;
  wide.generator.base_channels = 4;
  TransferModel mismatched(wide);
  try {
    mismatched.load_params(archive);
    FAIL("architecture mismatch was accepted");
  } catch (const Error& e) {
    CHECK(e.code() == errc::corrupt_checkpoint);
  }

  // an archive without auxiliary entries cannot feed an aux-enabled model
  TransferModelConfig lean = cfg;
  lean.use_aux = false;
  TransferModel no_aux(lean);
  Archive lean_archive;
  no_aux.save_params(lean_archive);
  CHECK_THROWS_AS(source.load_params(lean_archive), Error);
  // ...but the reverse direction simply ignores the extra entries
  TransferModel fresh(lean);
  fresh.load_params(archive);
  auto want = source.d_a.params();
  auto got = fresh.d_a.params();
  for (size_t i = 0; i < want.size(); ++i) {
    for (int64_t j = 0; j < want[i]->value.size(); ++j) {
      CHECK(got[i]->value[j] == want[i]->value[j]);
    }
  }
}

TEST_CASE("archive entry names are zero-padded and prefixed") {
  CHECK(param_entry_name("g_a2b", 0) == "g_a2b/p0000");
  CHECK(param_entry_name("d_b_aux", 37) == "d_b_aux/p0037");
  CHECK(param_entry_name("adam_g", 1234) == "adam_g/p1234");
}
