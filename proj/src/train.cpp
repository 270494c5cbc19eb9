#include "midistyle/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace midistyle {

namespace {

using nlohmann::json;

constexpr int64_t kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "midistyle-checkpoint";

std::string state_entry_name(const std::string& prefix, char kind,
                             size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "/%c%04zu", kind, index);
  return prefix + buf;
}

const TrainConfig& validated(const TrainConfig& config) {
  config.validate();
  return config;
}

// Stacks `n` uniform-with-replacement draws from `rolls` into a batch.
Tensor draw_batch(const std::vector<PianoRoll>& rolls, int64_t n, Rng& rng) {
  require(!rolls.empty(), errc::empty_domain,
          "cannot sample from an empty training set");
  std::vector<PianoRoll> picked;
  picked.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    picked.push_back(rolls[rng.uniform_int(rolls.size())]);
  }
  return to_tensor(picked);
}

// Uniform draws from the union of both training sets (the mixed set the
// auxiliary discriminators treat as real).
Tensor draw_mixed_batch(const std::vector<PianoRoll>& train_a,
                        const std::vector<PianoRoll>& train_b, int64_t n,
                        Rng& rng) {
  const size_t total = train_a.size() + train_b.size();
  require(total > 0, errc::empty_domain, "mixed set is empty");
  std::vector<PianoRoll> picked;
  picked.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const size_t idx = static_cast<size_t>(rng.uniform_int(total));
    picked.push_back(idx < train_a.size() ? train_a[idx]
                                          : train_b[idx - train_a.size()]);
  }
  return to_tensor(picked);
}

json train_config_to_json(const TrainConfig& c) {
  json j;
  j["model"]["generator"]["kind"] = generator_kind_name(c.model.generator.kind);
  j["model"]["generator"]["base_channels"] = c.model.generator.base_channels;
  j["model"]["generator"]["res_blocks"] = c.model.generator.res_blocks;
  j["model"]["discriminator"]["base_channels"] =
      c.model.discriminator.base_channels;
  j["model"]["use_aux"] = c.model.use_aux;
  j["model"]["seed"] = c.model.seed;
  j["weights"]["gamma"] = c.weights.gamma;
  j["weights"]["lambda_cycle"] = c.weights.lambda_cycle;
  j["weights"]["lambda_identity"] = c.weights.lambda_identity;
  j["weights"]["triplet_margin"] = c.weights.triplet_margin;
  j["weights"]["use_aux"] = c.weights.use_aux;
  j["weights"]["use_triplet"] = c.weights.use_triplet;
  j["optimizer"]["lr"] = c.optimizer.lr;
  j["optimizer"]["beta1"] = c.optimizer.beta1;
  j["optimizer"]["beta2"] = c.optimizer.beta2;
  j["optimizer"]["eps"] = c.optimizer.eps;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["fake_pool_size"] = c.fake_pool_size;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.model.generator.kind =
      generator_kind_from_name(j.at("model").at("generator").at("kind"));
  c.model.generator.base_channels =
      j.at("model").at("generator").at("base_channels");
  c.model.generator.res_blocks = j.at("model").at("generator").at("res_blocks");
  c.model.discriminator.base_channels =
      j.at("model").at("discriminator").at("base_channels");
  c.model.use_aux = j.at("model").at("use_aux");
  c.model.seed = j.at("model").at("seed");
  c.weights.gamma = j.at("weights").at("gamma");
  c.weights.lambda_cycle = j.at("weights").at("lambda_cycle");
  c.weights.lambda_identity = j.at("weights").at("lambda_identity");
  c.weights.triplet_margin = j.at("weights").at("triplet_margin");
  c.weights.use_aux = j.at("weights").at("use_aux");
  c.weights.use_triplet = j.at("weights").at("use_triplet");
  c.optimizer.lr = j.at("optimizer").at("lr");
  c.optimizer.beta1 = j.at("optimizer").at("beta1");
  c.optimizer.beta2 = j.at("optimizer").at("beta2");
  c.optimizer.eps = j.at("optimizer").at("eps");
  c.batch_size = j.at("batch_size");
  c.steps = j.at("steps");
  c.seed = j.at("seed");
  c.checkpoint_every = j.at("checkpoint_every");
  c.fake_pool_size = j.at("fake_pool_size");
  return c;
}

void accumulate(std::array<double, 14>& sums, const LossRecord& r) {
  const double terms[14] = {r.d_a,      r.d_b,      r.d_a_aux, r.d_b_aux,
                            r.g_adv_a2b, r.g_adv_b2a, r.cycle_a, r.cycle_b,
                            r.idt_a,    r.idt_b,    r.triplet_a, r.triplet_b,
                            r.d_total,  r.g_total};
  for (size_t i = 0; i < 14; ++i) sums[i] += terms[i];
}

}  // namespace

void OptimizerConfig::validate() const {
  require(std::isfinite(lr) && lr > 0.0, errc::bad_config,
          "learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          errc::bad_config, "Adam betas must lie in [0, 1)");
  require(std::isfinite(eps) && eps > 0.0, errc::bad_config,
          "Adam eps must be positive");
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  optimizer.validate();
  require(batch_size >= 1, errc::bad_config, "batch_size must be >= 1");
  require(steps >= 1, errc::bad_config, "steps must be >= 1");
  require(checkpoint_every >= 0, errc::bad_config,
          "checkpoint_every must be >= 0");
  require(fake_pool_size >= 0, errc::bad_config,
          "fake_pool_size must be >= 0");
  require(weights.use_aux == model.use_aux, errc::bad_config,
          "loss weights and model disagree about auxiliary discriminators");
}

// ---------------------------------------------------------------- Adam

Adam::Adam(std::vector<Param*> params, const OptimizerConfig& config)
    : params_(std::move(params)), cfg_(config) {
  cfg_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      p.value[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

void Adam::save(Archive& archive, const std::string& prefix) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    archive.add(state_entry_name(prefix, 'm', i), m_[i]);
    archive.add(state_entry_name(prefix, 'v', i), v_[i]);
  }
}

void Adam::load(const Archive& archive, const std::string& prefix, int64_t t) {
  require(t >= 0, errc::corrupt_checkpoint, "negative optimizer step count");
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor& m = archive.get(state_entry_name(prefix, 'm', i));
    const Tensor& v = archive.get(state_entry_name(prefix, 'v', i));
    require(m.same_shape(params_[i]->value) && v.same_shape(params_[i]->value),
            errc::corrupt_checkpoint,
            "optimizer state shape disagrees with the model");
    m_[i] = m;
    v_[i] = v;
  }
  t_ = t;
}

// ------------------------------------------------------------- FakePool

FakePool::FakePool(int64_t capacity) : capacity_(capacity) {
  require(capacity >= 0, errc::bad_config, "pool capacity must be >= 0");
}

Tensor FakePool::query(const Tensor& batch, Rng& rng) {
  if (capacity_ == 0) return batch;
  require(batch.rank() == 4 && batch.dim(0) >= 1, errc::empty_batch,
          "pool query needs a non-empty batch");
  Tensor out = batch;
  const int64_t n = batch.dim(0);
  const int64_t sample_size = batch.size() / n;
  const std::vector<int64_t> item_shape = {1, batch.dim(1), batch.dim(2),
                                           batch.dim(3)};
  for (int64_t s = 0; s < n; ++s) {
    const double* src = batch.data() + s * sample_size;
    if (static_cast<int64_t>(items_.size()) < capacity_) {
      Tensor item(item_shape);
      std::copy(src, src + sample_size, item.data());
      items_.push_back(std::move(item));
    } else if (rng.uniform() > 0.5) {
      const size_t idx = static_cast<size_t>(
          rng.uniform_int(static_cast<uint64_t>(capacity_)));
      std::copy(items_[idx].data(), items_[idx].data() + sample_size,
                out.data() + s * sample_size);
      std::copy(src, src + sample_size, items_[idx].data());
    }
  }
  return out;
}

void FakePool::set_items(std::vector<Tensor> items) {
  require(static_cast<int64_t>(items.size()) <= capacity_,
          errc::corrupt_checkpoint, "pool contents exceed the pool capacity");
  items_ = std::move(items);
}

// ------------------------------------------------------------ train_step

LossRecord train_step(TransferModel& model, Adam& opt_d, Adam& opt_g,
                      FakePool& pool_a, FakePool& pool_b,
                      const Tensor& batch_a, const Tensor& batch_b,
                      const std::vector<PianoRoll>& train_a,
                      const std::vector<PianoRoll>& train_b, Rng& rng,
                      const LossWeights& weights) {
  weights.validate();
  require(batch_a.rank() == 4 && batch_a.dim(0) >= 1 && batch_b.rank() == 4 &&
              batch_b.dim(0) == batch_a.dim(0),
          errc::empty_batch, "both domain batches must be non-empty and of "
                             "equal size");
  require(weights.use_aux == (model.d_a_aux != nullptr), errc::bad_config,
          "loss weights and model disagree about auxiliary discriminators");

  const int64_t n = batch_a.dim(0);
  LossRecord rec;
  rec.has_aux = weights.use_aux;
  rec.has_triplet = weights.use_triplet;

  // Fresh fakes: x̂_B = G_A2B(x_A), x̂_A = G_B2A(x_B).
  Tensor xb_hat = model.g_a2b.forward(batch_a, nullptr);
  Tensor xa_hat = model.g_b2a.forward(batch_b, nullptr);

  // Fixed draw order: pool A, pool B, aux mixed batches, triplet refs.
  Tensor pooled_a = pool_a.query(xa_hat, rng);
  Tensor pooled_b = pool_b.query(xb_hat, rng);
  Tensor mixed_a, mixed_b;
  if (weights.use_aux) {
    mixed_a = draw_mixed_batch(train_a, train_b, n, rng);
    mixed_b = draw_mixed_batch(train_a, train_b, n, rng);
  }
  Tensor ref_a, ref_b;
  if (weights.use_triplet) {
    ref_a = draw_batch(train_a, n, rng);
    ref_b = draw_batch(train_b, n, rng);
  }

  // --- Discriminator phase.
  opt_d.zero_grad();
  {
    Context cr, cf;
    const Tensor sr = model.d_a.forward(batch_a, &cr);
    const Tensor sf = model.d_a.forward(pooled_a, &cf);
    rec.d_a = lsgan_d_loss(sr, sf);
    model.d_a.backward(lsgan_d_grad_real(sr), cr);
    model.d_a.backward(lsgan_d_grad_fake(sf), cf);
  }
  {
    Context cr, cf;
    const Tensor sr = model.d_b.forward(batch_b, &cr);
    const Tensor sf = model.d_b.forward(pooled_b, &cf);
    rec.d_b = lsgan_d_loss(sr, sf);
    model.d_b.backward(lsgan_d_grad_real(sr), cr);
    model.d_b.backward(lsgan_d_grad_fake(sf), cf);
  }
  if (weights.use_aux) {
    // The auxiliary discriminators see the mixed set as real and the fresh
    // (un-pooled) fakes as fake; their gradients are scaled by gamma. They
    // never feed back into the generators.
    {
      Context cr, cf;
      const Tensor sr = model.d_a_aux->forward(mixed_a, &cr);
      const Tensor sf = model.d_a_aux->forward(xb_hat, &cf);
      rec.d_a_aux = aux_d_loss(sr, sf);
      Tensor gr = lsgan_d_grad_real(sr);
      Tensor gf = lsgan_d_grad_fake(sf);
      gr.scale(weights.gamma);
      gf.scale(weights.gamma);
      model.d_a_aux->backward(gr, cr);
      model.d_a_aux->backward(gf, cf);
    }
    {
      Context cr, cf;
      const Tensor sr = model.d_b_aux->forward(mixed_b, &cr);
      const Tensor sf = model.d_b_aux->forward(xa_hat, &cf);
      rec.d_b_aux = aux_d_loss(sr, sf);
      Tensor gr = lsgan_d_grad_real(sr);
      Tensor gf = lsgan_d_grad_fake(sf);
      gr.scale(weights.gamma);
      gf.scale(weights.gamma);
      model.d_b_aux->backward(gr, cr);
      model.d_b_aux->backward(gf, cf);
    }
  }
  rec.d_total = total_d_loss(rec, weights);
  require(std::isfinite(rec.d_total), errc::non_finite_loss,
          "discriminator loss diverged (d_total is not finite)");
  opt_d.step();

  // --- Generator phase. Each sub-objective runs forward, loss, and
  // backward before the next starts so only one tall context is alive at a
  // time; the shared contexts c1/c2 close last with the accumulated fake
  // gradients.
  opt_g.zero_grad();
  if (weights.lambda_identity > 0.0) {
    {
      Context c;
      const Tensor y = model.g_b2a.forward(batch_a, &c);
      rec.idt_a = identity_loss(batch_a, y);
      Tensor g = l1_grad(batch_a, y);
      g.scale(weights.lambda_identity);
      model.g_b2a.backward(g, c);
    }
    {
      Context c;
      const Tensor y = model.g_a2b.forward(batch_b, &c);
      rec.idt_b = identity_loss(batch_b, y);
      Tensor g = l1_grad(batch_b, y);
      g.scale(weights.lambda_identity);
      model.g_a2b.backward(g, c);
    }
  }
  Context c1, c2;
  const Tensor xb_hat_g = model.g_a2b.forward(batch_a, &c1);
  const Tensor xa_hat_g = model.g_b2a.forward(batch_b, &c2);
  Tensor g_xbhat = Tensor::zeros(xb_hat_g.shape());
  Tensor g_xahat = Tensor::zeros(xa_hat_g.shape());
  {
    Context c3;
    const Tensor cyc_a = model.g_b2a.forward(xb_hat_g, &c3);
    rec.cycle_a = cycle_loss(batch_a, cyc_a);
    Tensor g = l1_grad(batch_a, cyc_a);
    g.scale(weights.lambda_cycle);
    g_xbhat.add(model.g_b2a.backward(g, c3));
  }
  {
    Context c4;
    const Tensor cyc_b = model.g_a2b.forward(xa_hat_g, &c4);
    rec.cycle_b = cycle_loss(batch_b, cyc_b);
    Tensor g = l1_grad(batch_b, cyc_b);
    g.scale(weights.lambda_cycle);
    g_xahat.add(model.g_a2b.backward(g, c4));
  }
  {
    Context cd;
    const Tensor s = model.d_b.forward(xb_hat_g, &cd);
    rec.g_adv_a2b = lsgan_g_loss(s);
    g_xbhat.add(model.d_b.backward(lsgan_g_grad(s), cd));
  }
  {
    Context cd;
    const Tensor s = model.d_a.forward(xa_hat_g, &cd);
    rec.g_adv_b2a = lsgan_g_loss(s);
    g_xahat.add(model.d_a.backward(lsgan_g_grad(s), cd));
  }
  if (weights.use_triplet) {
    rec.triplet_a =
        triplet_loss(xb_hat_g, ref_b, ref_a, weights.triplet_margin);
    g_xbhat.add(
        triplet_grad_anchor(xb_hat_g, ref_b, ref_a, weights.triplet_margin));
    rec.triplet_b =
        triplet_loss(xa_hat_g, ref_a, ref_b, weights.triplet_margin);
    g_xahat.add(
        triplet_grad_anchor(xa_hat_g, ref_a, ref_b, weights.triplet_margin));
  }
  model.g_a2b.backward(g_xbhat, c1);
  model.g_b2a.backward(g_xahat, c2);
  rec.g_total = total_g_loss(rec, weights);
  require(rec.all_finite(), errc::non_finite_loss,
          "generator loss diverged (a loss term is not finite)");
  opt_g.step();
  return rec;
}

// --------------------------------------------------------------- Trainer

Trainer::Trainer(const TrainConfig& config, std::vector<PianoRoll> train_a,
                 std::vector<PianoRoll> train_b)
    : cfg_(validated(config)),
      train_a_(std::move(train_a)),
      train_b_(std::move(train_b)),
      model_(cfg_.model),
      opt_d_(model_.discriminator_params(), cfg_.optimizer),
      opt_g_(model_.generator_params(), cfg_.optimizer),
      pool_a_(cfg_.fake_pool_size),
      pool_b_(cfg_.fake_pool_size),
      rng_(cfg_.seed) {
  require(!train_a_.empty() && !train_b_.empty(), errc::empty_domain,
          "both training sets must be non-empty");
  require(cfg_.batch_size <= static_cast<int64_t>(train_a_.size()) &&
              cfg_.batch_size <= static_cast<int64_t>(train_b_.size()),
          errc::bad_config,
          "batch_size exceeds the smaller training set");
  order_a_.resize(train_a_.size());
  order_b_.resize(train_b_.size());
  std::iota(order_a_.begin(), order_a_.end(), int64_t{0});
  std::iota(order_b_.begin(), order_b_.end(), int64_t{0});
  rng_.shuffle(order_a_);
  rng_.shuffle(order_b_);
}

Tensor Trainer::next_batch(std::vector<int64_t>& order, size_t& cursor,
                           const std::vector<PianoRoll>& rolls) {
  const size_t bs = static_cast<size_t>(cfg_.batch_size);
  if (order.size() - cursor < bs) {
    rng_.shuffle(order);
    cursor = 0;
  }
  std::vector<PianoRoll> batch;
  batch.reserve(bs);
  for (size_t i = 0; i < bs; ++i) {
    batch.push_back(rolls[static_cast<size_t>(order[cursor++])]);
  }
  return to_tensor(batch);
}

LossRecord Trainer::step() {
  const Tensor batch_a = next_batch(order_a_, cursor_a_, train_a_);
  const Tensor batch_b = next_batch(order_b_, cursor_b_, train_b_);
  const LossRecord rec =
      train_step(model_, opt_d_, opt_g_, pool_a_, pool_b_, batch_a, batch_b,
                 train_a_, train_b_, rng_, cfg_.weights);
  ++step_;
  accumulate(loss_sums_, rec);
  return rec;
}

std::array<double, 14> Trainer::loss_means() const {
  std::array<double, 14> means{};
  if (step_ == 0) return means;
  for (size_t i = 0; i < means.size(); ++i) {
    means[i] = loss_sums_[i] / static_cast<double>(step_);
  }
  return means;
}

void Trainer::set_total_steps(int64_t steps) {
  require(steps >= 1, errc::bad_config, "steps must be >= 1");
  cfg_.steps = steps;
}

LossRecord Trainer::run(const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, errc::io_error, "cannot create output directory " + out_dir);

  const std::string log_path = out_dir + "/train_log.csv";
  bool need_header = true;
  {
    std::ifstream probe(log_path, std::ios::binary);
    if (probe.good() && probe.peek() != std::ifstream::traits_type::eof()) {
      need_header = false;
    }
  }
  std::ofstream log(log_path, std::ios::binary | std::ios::app);
  require(log.good(), errc::io_error, "cannot open log file " + log_path);
  if (need_header) log << LossRecord::csv_header() << '\n';

  LossRecord last{};
  while (step_ < cfg_.steps) {
    last = step();
    log << last.csv_row(step_) << '\n';
    log.flush();
    if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 &&
        step_ < cfg_.steps) {
      char name[40];
      std::snprintf(name, sizeof name, "/checkpoint-%06lld.msar",
                    static_cast<long long>(step_));
      save_checkpoint(out_dir + name);
    }
  }
  save_checkpoint(out_dir + "/checkpoint.msar");
  return last;
}

void Trainer::save_checkpoint(const std::string& path) {
  Archive archive;
  json meta;
  meta["format"] = kCheckpointFormat;
  meta["version"] = kCheckpointVersion;
  meta["step"] = step_;
  meta["config"] = train_config_to_json(cfg_);
  meta["rng"] = rng_.state();
  meta["cursor_a"] = cursor_a_;
  meta["cursor_b"] = cursor_b_;
  meta["order_a"] = order_a_;
  meta["order_b"] = order_b_;
  meta["adam_d_steps"] = opt_d_.step_count();
  meta["adam_g_steps"] = opt_g_.step_count();
  meta["pool_a_size"] = pool_a_.items().size();
  meta["pool_b_size"] = pool_b_.items().size();
  archive.meta = meta.dump();

  model_.save_params(archive);
  opt_d_.save(archive, "adam_d");
  opt_g_.save(archive, "adam_g");
  for (size_t i = 0; i < pool_a_.items().size(); ++i) {
    archive.add(param_entry_name("pool_a", i), pool_a_.items()[i]);
  }
  for (size_t i = 0; i < pool_b_.items().size(); ++i) {
    archive.add(param_entry_name("pool_b", i), pool_b_.items()[i]);
  }
  Tensor sums({14});
  for (size_t i = 0; i < loss_sums_.size(); ++i) sums[i] = loss_sums_[i];
  archive.add("loss_sums", sums);

  write_archive(path, archive);
}

Trainer Trainer::load_checkpoint(const std::string& path,
                                 std::vector<PianoRoll> train_a,
                                 std::vector<PianoRoll> train_b) {
  const Archive archive = read_archive(path);
  json meta;
  try {
    meta = json::parse(archive.meta);
  } catch (const json::exception&) {
    raise(errc::corrupt_checkpoint, "checkpoint metadata is not valid JSON");
  }
  try {
    require(meta.at("format") == kCheckpointFormat, errc::corrupt_checkpoint,
            "file is not a training checkpoint");
    const int64_t version = meta.at("version");
    require(version == kCheckpointVersion, errc::corrupt_checkpoint,
            "checkpoint version " + std::to_string(version) +
                " is unsupported; this build reads version " +
                std::to_string(kCheckpointVersion));

    const TrainConfig cfg = train_config_from_json(meta.at("config"));
    Trainer trainer(cfg, std::move(train_a), std::move(train_b));
    trainer.model_.load_params(archive);
    trainer.opt_d_.load(archive, "adam_d", meta.at("adam_d_steps"));
    trainer.opt_g_.load(archive, "adam_g", meta.at("adam_g_steps"));

    const size_t pool_a_size = meta.at("pool_a_size");
    const size_t pool_b_size = meta.at("pool_b_size");
    std::vector<Tensor> items_a, items_b;
    for (size_t i = 0; i < pool_a_size; ++i) {
      items_a.push_back(archive.get(param_entry_name("pool_a", i)));
    }
    for (size_t i = 0; i < pool_b_size; ++i) {
      items_b.push_back(archive.get(param_entry_name("pool_b", i)));
    }
    trainer.pool_a_.set_items(std::move(items_a));
    trainer.pool_b_.set_items(std::move(items_b));

    trainer.rng_.set_state(meta.at("rng"));
    trainer.order_a_ = meta.at("order_a").get<std::vector<int64_t>>();
    trainer.order_b_ = meta.at("order_b").get<std::vector<int64_t>>();
    require(trainer.order_a_.size() == trainer.train_a_.size() &&
                trainer.order_b_.size() == trainer.train_b_.size(),
            errc::corrupt_checkpoint,
            "checkpoint was written for a different training set");
    for (int64_t idx : trainer.order_a_) {
      require(idx >= 0 && idx < static_cast<int64_t>(trainer.train_a_.size()),
              errc::corrupt_checkpoint, "epoch order index out of range");
    }
    for (int64_t idx : trainer.order_b_) {
      require(idx >= 0 && idx < static_cast<int64_t>(trainer.train_b_.size()),
              errc::corrupt_checkpoint, "epoch order index out of range");
    }
    trainer.cursor_a_ = meta.at("cursor_a");
    trainer.cursor_b_ = meta.at("cursor_b");
    require(trainer.cursor_a_ <= trainer.train_a_.size() &&
                trainer.cursor_b_ <= trainer.train_b_.size(),
            errc::corrupt_checkpoint, "epoch cursor out of range");
    trainer.step_ = meta.at("step");
    require(trainer.step_ >= 0, errc::corrupt_checkpoint,
            "negative step counter");

    const Tensor& sums = archive.get("loss_sums");
    require(sums.size() == 14, errc::corrupt_checkpoint,
            "unexpected loss summary size");
    for (size_t i = 0; i < trainer.loss_sums_.size(); ++i) {
      trainer.loss_sums_[i] = sums[static_cast<int64_t>(i)];
    }
    return trainer;
  } catch (const json::exception& e) {
    raise(errc::corrupt_checkpoint,
          std::string("malformed checkpoint metadata: ") + e.what());
  }
}

LossRecord train(const TrainConfig& config, const DomainSplit& split,
                 const std::string& out_dir) {
  std::vector<PianoRoll> train_a, train_b;
  train_a.reserve(split.train_a.size());
  train_b.reserve(split.train_b.size());
  for (const LabeledSample& s : split.train_a) train_a.push_back(s.roll);
  for (const LabeledSample& s : split.train_b) train_b.push_back(s.roll);
  return train(config, std::move(train_a), std::move(train_b), out_dir);
}

LossRecord train(const TrainConfig& config, std::vector<PianoRoll> train_a,
                 std::vector<PianoRoll> train_b, const std::string& out_dir) {
  Trainer trainer(config, std::move(train_a), std::move(train_b));
  return trainer.run(out_dir);
}

TransferModel load_checkpoint_model(const std::string& path, int64_t* step) {
  const Archive archive = read_archive(path);
  json meta;
  try {
    meta = json::parse(archive.meta);
  } catch (const json::exception&) {
    raise(errc::corrupt_checkpoint, "checkpoint metadata is not valid JSON");
  }
  try {
    require(meta.at("format") == kCheckpointFormat, errc::corrupt_checkpoint,
            "file is not a training checkpoint");
    const int64_t version = meta.at("version");
    require(version == kCheckpointVersion, errc::corrupt_checkpoint,
            "checkpoint version " + std::to_string(version) +
                " is unsupported; this build reads version " +
                std::to_string(kCheckpointVersion));
    const TrainConfig cfg = train_config_from_json(meta.at("config"));
    TransferModel model(cfg.model);
    model.load_params(archive);
    if (step != nullptr) *step = meta.at("step");
    return model;
  } catch (const json::exception& e) {
    raise(errc::corrupt_checkpoint,
          std::string("malformed checkpoint metadata: ") + e.what());
  }
}

}  // namespace midistyle
