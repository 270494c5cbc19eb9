#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "midistyle/archive.hpp"
#include "midistyle/layers.hpp"
#include "midistyle/pianoroll.hpp"
#include "midistyle/rng.hpp"
#include "midistyle/tensor.hpp"

namespace midistyle {

enum class GeneratorKind { ResNet9, UNet128 };

const char* generator_kind_name(GeneratorKind kind);
GeneratorKind generator_kind_from_name(const std::string& name);

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::ResNet9;
  int64_t base_channels = 64;
  // Residual-body depth for the ResNet generator; ignored by the U-Net.
  int64_t res_blocks = 9;

  void validate() const;
};

struct DiscriminatorConfig {
  int64_t base_channels = 64;

  void validate() const;
};

// Roll <-> activation conversions. Batches stack along the leading
// dimension of a (N, 1, 64, 84) tensor.
Tensor to_tensor(const PianoRoll& roll);
Tensor to_tensor(const std::vector<PianoRoll>& rolls);
PianoRoll to_roll(const Tensor& batch, int64_t index);

// Image-to-image generator with a sigmoid head; every output entry lies
// strictly inside (0,1) and the output shape equals the input shape.
class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t seed);

  // Input must be (N, 1, 64, 84).
  Tensor forward(const Tensor& x, Context* ctx) const;
  Tensor backward(const Tensor& grad, Context& ctx);

  PianoRoll transfer_roll(const PianoRoll& roll) const;

  std::vector<Param*> params() { return net_.params(); }
  int64_t parameter_count() { return net_.parameter_count(); }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  Sequential net_;
};

// 70x70-receptive-field patch discriminator; emits a raw score per
// overlapping patch (no sigmoid — targets live in the loss module).
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

  // Input must be (N, 1, 64, 84); output is (N, 1, 6, 8).
  Tensor forward(const Tensor& x, Context* ctx) const;
  Tensor backward(const Tensor& grad, Context& ctx);

  std::vector<Param*> params() { return net_.params(); }
  int64_t parameter_count() { return net_.parameter_count(); }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  Sequential net_;
};

// Receptive field of one output score of the patch discriminator.
int64_t discriminator_receptive_field();
// Score-map spatial dims for a (steps x pitches) input.
std::pair<int64_t, int64_t> discriminator_map_shape(int64_t h, int64_t w);

struct TransferModelConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  bool use_aux = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// The full two-domain translation model: A->B and B->A generators, one
// standard discriminator per domain, and (optionally) one auxiliary
// discriminator per domain trained on the mixed real set.
class TransferModel {
 public:
  explicit TransferModel(const TransferModelConfig& config);

  TransferModelConfig config;
  Generator g_a2b;
  Generator g_b2a;
  Discriminator d_a;
  Discriminator d_b;
  std::unique_ptr<Discriminator> d_a_aux;  // present iff config.use_aux
  std::unique_ptr<Discriminator> d_b_aux;

  std::vector<Param*> generator_params();
  std::vector<Param*> discriminator_params();  // standard + auxiliary
  int64_t parameter_count();

  void save_params(Archive& archive);
  void load_params(const Archive& archive);
};

// Archive entry naming shared by model parameters and optimizer state.
std::string param_entry_name(const std::string& prefix, size_t index);

// Draws weights from N(0, 0.02) in collection order and zeroes biases.
void init_params(const std::vector<Param*>& params, Rng& rng);

}  // namespace midistyle
