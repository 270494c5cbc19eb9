#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "midistyle/archive.hpp"
#include "midistyle/dataset.hpp"
#include "midistyle/losses.hpp"
#include "midistyle/nets.hpp"
#include "midistyle/pianoroll.hpp"
#include "midistyle/rng.hpp"

namespace midistyle {

struct OptimizerConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Adam over a fixed parameter list. step() consumes and applies the
// gradients accumulated since the last zero_grad().
class Adam {
 public:
  Adam(std::vector<Param*> params, const OptimizerConfig& config);

  void zero_grad();
  void step();

  int64_t step_count() const { return t_; }

  void save(Archive& archive, const std::string& prefix) const;
  void load(const Archive& archive, const std::string& prefix, int64_t t);

 private:
  std::vector<Param*> params_;
  OptimizerConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int64_t t_ = 0;
};

// History buffer of generated samples for discriminator updates. A full
// pool swaps each incoming sample against a stored one with probability
// 1/2; an unfilled pool stores the sample and passes it through without
// consuming randomness. Capacity 0 disables the pool entirely.
class FakePool {
 public:
  explicit FakePool(int64_t capacity);

  Tensor query(const Tensor& batch, Rng& rng);

  int64_t capacity() const { return capacity_; }
  const std::vector<Tensor>& items() const { return items_; }
  void set_items(std::vector<Tensor> items);

 private:
  int64_t capacity_;
  std::vector<Tensor> items_;  // each (1, 1, 64, 84)
};

struct TrainConfig {
  TransferModelConfig model;
  LossWeights weights;
  OptimizerConfig optimizer;
  int64_t batch_size = 16;
  int64_t steps = 1;
  std::uint64_t seed = 0;
  int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  int64_t fake_pool_size = 50;

  void validate() const;
};

// One alternating optimization step on pre-assembled batches.
//
// Phase 1 updates the discriminators: D_A and D_B each judge their
// domain's real batch against a pool-mixed batch of fakes; when enabled,
// the auxiliary discriminators judge a freshly drawn mixed-domain batch
// against the fresh (un-pooled) fakes, with gradients scaled by gamma.
// Phase 2 updates both generators on the full composed objective
// (adversarial + cycle + identity + optional triplet).
//
// Randomness is drawn in a fixed order — fake-pool A, fake-pool B, mixed
// batch for each auxiliary discriminator, then the triplet reference
// batches — and draws belonging to disabled features are skipped. That
// order is part of the determinism contract.
LossRecord train_step(TransferModel& model, Adam& opt_d, Adam& opt_g,
                      FakePool& pool_a, FakePool& pool_b,
                      const Tensor& batch_a, const Tensor& batch_b,
                      const std::vector<PianoRoll>& train_a,
                      const std::vector<PianoRoll>& train_b, Rng& rng,
                      const LossWeights& weights);

// Owns the full training state: model, optimizers, pools, rng, epoch
// orders, and running loss sums. Constructing it performs all
// initialization draws; step() advances one optimization step.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::vector<PianoRoll> train_a,
          std::vector<PianoRoll> train_b);

  LossRecord step();

  // Runs from the current step to config.steps, appending one CSV row per
  // step to <out_dir>/train_log.csv (header only when the file is new or
  // empty), writing periodic checkpoints when checkpoint_every > 0, and
  // always writing <out_dir>/checkpoint.msar at the end. Returns the last
  // step's record.
  LossRecord run(const std::string& out_dir);

  void save_checkpoint(const std::string& path);
  static Trainer load_checkpoint(const std::string& path,
                                 std::vector<PianoRoll> train_a,
                                 std::vector<PianoRoll> train_b);

  int64_t step_count() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  TransferModel& model() { return model_; }
  // Mean of each loss column over all steps taken so far.
  std::array<double, 14> loss_means() const;

  // Overrides the target step count (used when resuming past the original
  // schedule).
  void set_total_steps(int64_t steps);

 private:
  Tensor next_batch(std::vector<int64_t>& order, size_t& cursor,
                    const std::vector<PianoRoll>& rolls);

  TrainConfig cfg_;
  std::vector<PianoRoll> train_a_;
  std::vector<PianoRoll> train_b_;
  TransferModel model_;
  Adam opt_d_;
  Adam opt_g_;
  FakePool pool_a_;
  FakePool pool_b_;
  Rng rng_;
  std::vector<int64_t> order_a_;
  std::vector<int64_t> order_b_;
  size_t cursor_a_ = 0;
  size_t cursor_b_ = 0;
  int64_t step_ = 0;
  std::array<double, 14> loss_sums_{};
};

// Convenience wrappers around Trainer for whole-run invocations.
LossRecord train(const TrainConfig& config, const DomainSplit& split,
                 const std::string& out_dir);
LossRecord train(const TrainConfig& config, std::vector<PianoRoll> train_a,
                 std::vector<PianoRoll> train_b, const std::string& out_dir);

// Rebuilds just the translation model from a checkpoint, without any
// training state; inference paths use this when no training data is at
// hand. Optionally reports the step the checkpoint was written at.
TransferModel load_checkpoint_model(const std::string& path,
                                    int64_t* step = nullptr);

}  // namespace midistyle
