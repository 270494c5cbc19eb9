#include "midistyle/nets.hpp"

#include <algorithm>
#include <cstdio>

namespace midistyle {

namespace {

// Network identities within one model; they pin per-network seeds and the
// archive prefixes, so changing them breaks old checkpoints.
constexpr std::uint64_t kRoleGA2B = 1;
constexpr std::uint64_t kRoleGB2A = 2;
constexpr std::uint64_t kRoleDA = 3;
constexpr std::uint64_t kRoleDB = 4;
constexpr std::uint64_t kRoleDAAux = 5;
constexpr std::uint64_t kRoleDBAux = 6;

// Internal padding that makes the 64x84 grid friendly to the generator
// strides: the ResNet path widens 84 -> 88; the U-Net path embeds the
// phrase in a 128x128 canvas.
constexpr int64_t kResnetPadLeft = 2;
constexpr int64_t kResnetPadRight = 2;
constexpr int64_t kUnetPadTop = 32;
constexpr int64_t kUnetPadBottom = 32;
constexpr int64_t kUnetPadLeft = 22;
constexpr int64_t kUnetPadRight = 22;

void check_roll_batch(const Tensor& x, const char* what) {
  require(x.rank() == 4 && x.dim(1) == 1 && x.dim(2) == PianoRoll::kSteps &&
              x.dim(3) == PianoRoll::kPitches && x.dim(0) >= 1,
          errc::shape_mismatch, what);
}

void build_resnet(Sequential& net, int64_t b, int64_t res_blocks) {
  net.emplace<ZeroPad2d>(0, 0, kResnetPadLeft, kResnetPadRight);
  net.emplace<Conv2d>(1, b, 7, 1, 3);
  net.emplace<InstanceNorm2d>();
  net.emplace<ReLU>();
  net.emplace<Conv2d>(b, 2 * b, 3, 2, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<ReLU>();
  net.emplace<Conv2d>(2 * b, 4 * b, 3, 2, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<ReLU>();
  for (int64_t i = 0; i < res_blocks; ++i) {
    net.emplace<ResidualBlock>(4 * b);
  }
  net.emplace<ConvTranspose2d>(4 * b, 2 * b, 3, 2, 1, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<ReLU>();
  net.emplace<ConvTranspose2d>(2 * b, b, 3, 2, 1, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<ReLU>();
  net.emplace<Conv2d>(b, 1, 7, 1, 3);
  net.emplace<Sigmoid>();
  net.emplace<Crop2d>(0, 0, kResnetPadLeft, kResnetPadRight);
}

// One U-Net level. `outer` and `inner` are the channel widths on the way
// in and out of this level's convolutions; `input` is the channel count
// actually entering the level (differs from `outer` only at the outermost
// level, whose input is the 1-channel roll).
std::unique_ptr<Module> unet_level(int64_t outer, int64_t inner, int64_t input,
                                   std::unique_ptr<Module> submodule,
                                   bool outermost, bool innermost) {
  Sequential down;
  Sequential up;
  if (outermost) {
    down.emplace<Conv2d>(input, inner, 4, 2, 1);
    up.emplace<ReLU>();
    up.emplace<ConvTranspose2d>(2 * inner, outer, 4, 2, 1, 0);
    up.emplace<Sigmoid>();
  } else if (innermost) {
    down.emplace<LeakyReLU>(0.2);
    down.emplace<Conv2d>(input, inner, 4, 2, 1);
    up.emplace<ReLU>();
    up.emplace<ConvTranspose2d>(inner, outer, 4, 2, 1, 0);
    up.emplace<InstanceNorm2d>();
  } else {
    down.emplace<LeakyReLU>(0.2);
    down.emplace<Conv2d>(input, inner, 4, 2, 1);
    down.emplace<InstanceNorm2d>();
    up.emplace<ReLU>();
    up.emplace<ConvTranspose2d>(2 * inner, outer, 4, 2, 1, 0);
    up.emplace<InstanceNorm2d>();
  }
  return std::make_unique<UnetBlock>(std::move(down), std::move(submodule),
                                     std::move(up), outermost, input);
}

// Seven-level U-Net for a 128x128 canvas (innermost plane is 1x1).
void build_unet(Sequential& net, int64_t b) {
  net.emplace<ZeroPad2d>(kUnetPadTop, kUnetPadBottom, kUnetPadLeft,
                         kUnetPadRight);
  auto block = unet_level(8 * b, 8 * b, 8 * b, nullptr, false, true);
  block = unet_level(8 * b, 8 * b, 8 * b, std::move(block), false, false);
  block = unet_level(8 * b, 8 * b, 8 * b, std::move(block), false, false);
  block = unet_level(4 * b, 8 * b, 4 * b, std::move(block), false, false);
  block = unet_level(2 * b, 4 * b, 2 * b, std::move(block), false, false);
  block = unet_level(b, 2 * b, b, std::move(block), false, false);
  block = unet_level(1, b, 1, std::move(block), true, false);
  net.add(std::move(block));
  net.emplace<Crop2d>(kUnetPadTop, kUnetPadBottom, kUnetPadLeft,
                      kUnetPadRight);
}

void build_patch_discriminator(Sequential& net, int64_t b) {
  net.emplace<Conv2d>(1, b, 4, 2, 1);
  net.emplace<LeakyReLU>(0.2);
  net.emplace<Conv2d>(b, 2 * b, 4, 2, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<LeakyReLU>(0.2);
  net.emplace<Conv2d>(2 * b, 4 * b, 4, 2, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<LeakyReLU>(0.2);
  net.emplace<Conv2d>(4 * b, 8 * b, 4, 1, 1);
  net.emplace<InstanceNorm2d>();
  net.emplace<LeakyReLU>(0.2);
  net.emplace<Conv2d>(8 * b, 1, 4, 1, 1);
}

}  // namespace

const char* generator_kind_name(GeneratorKind kind) {
  return kind == GeneratorKind::ResNet9 ? "resnet9" : "unet128";
}

GeneratorKind generator_kind_from_name(const std::string& name) {
  if (name == "resnet9") return GeneratorKind::ResNet9;
  if (name == "unet128") return GeneratorKind::UNet128;
  raise(errc::bad_config,
        "unknown generator kind '" + name + "', expected resnet9 or unet128");
}

void GeneratorConfig::validate() const {
  require(base_channels >= 1, errc::bad_config,
          "generator base_channels must be >= 1");
  require(res_blocks >= 1, errc::bad_config,
          "generator res_blocks must be >= 1");
}

void DiscriminatorConfig::validate() const {
  require(base_channels >= 1, errc::bad_config,
          "discriminator base_channels must be >= 1");
}

void TransferModelConfig::validate() const {
  generator.validate();
  discriminator.validate();
}

Tensor to_tensor(const PianoRoll& roll) {
  Tensor t({1, 1, PianoRoll::kSteps, PianoRoll::kPitches});
  std::copy(roll.values.begin(), roll.values.end(), t.data());
  return t;
}

Tensor to_tensor(const std::vector<PianoRoll>& rolls) {
  require(!rolls.empty(), errc::empty_batch, "cannot batch zero rolls");
  Tensor t({static_cast<int64_t>(rolls.size()), 1, PianoRoll::kSteps,
            PianoRoll::kPitches});
  for (size_t i = 0; i < rolls.size(); ++i) {
    std::copy(rolls[i].values.begin(), rolls[i].values.end(),
              t.data() + static_cast<int64_t>(i) * PianoRoll::kCells);
  }
  return t;
}

PianoRoll to_roll(const Tensor& batch, int64_t index) {
  check_roll_batch(batch, "tensor is not a batch of 64x84 rolls");
  require(index >= 0 && index < batch.dim(0), errc::shape_mismatch,
          "roll index out of range");
  PianoRoll roll;
  const double* src = batch.data() + index * PianoRoll::kCells;
  std::copy(src, src + PianoRoll::kCells, roll.values.begin());
  roll.binary = roll.check_binary();
  return roll;
}

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed)
    : cfg_(config) {
  cfg_.validate();
  if (cfg_.kind == GeneratorKind::ResNet9) {
    build_resnet(net_, cfg_.base_channels, cfg_.res_blocks);
  } else {
    build_unet(net_, cfg_.base_channels);
  }
  Rng rng(seed);
  init_params(net_.params(), rng);
}

Tensor Generator::forward(const Tensor& x, Context* ctx) const {
  check_roll_batch(x, "generator input must be (N,1,64,84)");
  return net_.forward(x, ctx);
}

Tensor Generator::backward(const Tensor& grad, Context& ctx) {
  check_roll_batch(grad, "generator gradient must be (N,1,64,84)");
  return net_.backward(grad, ctx);
}

PianoRoll Generator::transfer_roll(const PianoRoll& roll) const {
  return to_roll(forward(to_tensor(roll), nullptr), 0);
}

Discriminator::Discriminator(const DiscriminatorConfig& config,
                             std::uint64_t seed)
    : cfg_(config) {
  cfg_.validate();
  build_patch_discriminator(net_, cfg_.base_channels);
  Rng rng(seed);
  init_params(net_.params(), rng);
}

Tensor Discriminator::forward(const Tensor& x, Context* ctx) const {
  check_roll_batch(x, "discriminator input must be (N,1,64,84)");
  return net_.forward(x, ctx);
}

Tensor Discriminator::backward(const Tensor& grad, Context& ctx) {
  return net_.backward(grad, ctx);
}

int64_t discriminator_receptive_field() {
  // Walk the layer list head-to-input: rf_in = (rf_out - 1) * stride + k.
  int64_t rf = 1;
  const int64_t kernels[] = {4, 4, 4, 4, 4};
  const int64_t strides[] = {1, 1, 2, 2, 2};  // head first
  for (int i = 0; i < 5; ++i) rf = (rf - 1) * strides[i] + kernels[i];
  return rf;
}

std::pair<int64_t, int64_t> discriminator_map_shape(int64_t h, int64_t w) {
  const int64_t strides[] = {2, 2, 2, 1, 1};
  for (int64_t s : strides) {
    h = conv_out_dim(h, 4, s, 1);
    w = conv_out_dim(w, 4, s, 1);
  }
  return {h, w};
}

TransferModel::TransferModel(const TransferModelConfig& cfg)
    : config(cfg),
      g_a2b(cfg.generator, combine_seeds(cfg.seed, kRoleGA2B)),
      g_b2a(cfg.generator, combine_seeds(cfg.seed, kRoleGB2A)),
      d_a(cfg.discriminator, combine_seeds(cfg.seed, kRoleDA)),
      d_b(cfg.discriminator, combine_seeds(cfg.seed, kRoleDB)) {
  config.validate();
  if (config.use_aux) {
    d_a_aux = std::make_unique<Discriminator>(
        cfg.discriminator, combine_seeds(cfg.seed, kRoleDAAux));
    d_b_aux = std::make_unique<Discriminator>(
        cfg.discriminator, combine_seeds(cfg.seed, kRoleDBAux));
  }
}

std::vector<Param*> TransferModel::generator_params() {
  std::vector<Param*> out = g_a2b.params();
  for (Param* p : g_b2a.params()) out.push_back(p);
  return out;
}

std::vector<Param*> TransferModel::discriminator_params() {
  std::vector<Param*> out = d_a.params();
  for (Param* p : d_b.params()) out.push_back(p);
  if (d_a_aux != nullptr) {
    for (Param* p : d_a_aux->params()) out.push_back(p);
  }
  if (d_b_aux != nullptr) {
    for (Param* p : d_b_aux->params()) out.push_back(p);
  }
  return out;
}

int64_t TransferModel::parameter_count() {
  int64_t total = 0;
  for (Param* p : generator_params()) total += p->value.size();
  for (Param* p : discriminator_params()) total += p->value.size();
  return total;
}

std::string param_entry_name(const std::string& prefix, size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "/p%04zu", index);
  return prefix + buf;
}

void init_params(const std::vector<Param*>& params, Rng& rng) {
  for (Param* p : params) {
    if (p->is_bias) {
      p->value.fill(0.0);
      continue;
    }
    for (int64_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = 0.02 * rng.normal();
    }
  }
}

namespace {

void save_network(Archive& archive, const std::string& prefix,
                  const std::vector<Param*>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    archive.add(param_entry_name(prefix, i), params[i]->value);
  }
}

void load_network(const Archive& archive, const std::string& prefix,
                  const std::vector<Param*>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& stored = archive.get(param_entry_name(prefix, i));
    require(stored.same_shape(params[i]->value), errc::corrupt_checkpoint,
            "stored parameter shape disagrees with the model architecture");
    params[i]->value = stored;
  }
}

}  // namespace

void TransferModel::save_params(Archive& archive) {
  save_network(archive, "g_a2b", g_a2b.params());
  save_network(archive, "g_b2a", g_b2a.params());
  save_network(archive, "d_a", d_a.params());
  save_network(archive, "d_b", d_b.params());
  if (d_a_aux != nullptr) save_network(archive, "d_a_aux", d_a_aux->params());
  if (d_b_aux != nullptr) save_network(archive, "d_b_aux", d_b_aux->params());
}

void TransferModel::load_params(const Archive& archive) {
  load_network(archive, "g_a2b", g_a2b.params());
  load_network(archive, "g_b2a", g_b2a.params());
  load_network(archive, "d_a", d_a.params());
  load_network(archive, "d_b", d_b.params());
  if (d_a_aux != nullptr) load_network(archive, "d_a_aux", d_a_aux->params());
  if (d_b_aux != nullptr) load_network(archive, "d_b_aux", d_b_aux->params());
}

}  // namespace midistyle
