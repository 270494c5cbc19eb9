#pragma once

#include <cmath>
#include <string>

#include "midistyle/tensor.hpp"

namespace midistyle {

struct LossWeights {
  double gamma = 1.0;            // auxiliary discriminator weight
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;
  double triplet_margin = 1.0;
  bool use_aux = true;
  bool use_triplet = true;

  void validate() const {
    require(std::isfinite(triplet_margin) && triplet_margin > 0.0,
            errc::invalid_margin, "triplet margin must be positive");
    for (double w : {gamma, lambda_cycle, lambda_identity}) {
      require(std::isfinite(w) && w >= 0.0, errc::invalid_weight,
              "loss weights must be finite and non-negative");
    }
  }
};

// Every per-step scalar, plus the two composed totals. Aux and triplet
// terms carry presence flags so a disabled feature reports "absent" rather
// than a numeric zero that happened to be computed.
struct LossRecord {
  double d_a = 0.0, d_b = 0.0;
  double d_a_aux = 0.0, d_b_aux = 0.0;
  double g_adv_a2b = 0.0, g_adv_b2a = 0.0;
  double cycle_a = 0.0, cycle_b = 0.0;
  double idt_a = 0.0, idt_b = 0.0;
  double triplet_a = 0.0, triplet_b = 0.0;
  double d_total = 0.0, g_total = 0.0;
  bool has_aux = false;
  bool has_triplet = false;

  bool all_finite() const;

  static const char* csv_header();  // includes the step column
  std::string csv_row(int64_t step) const;
};

// Least-squares adversarial losses; targets are 1 for real, 0 for fake.
double lsgan_d_loss(const Tensor& real_scores, const Tensor& fake_scores);
double lsgan_g_loss(const Tensor& fake_scores);

// Same functional form as lsgan_d_loss; the "real" side is drawn from the
// mixed set of both domains.
double aux_d_loss(const Tensor& mixed_scores, const Tensor& fake_scores);

// Mean absolute difference.
double cycle_loss(const Tensor& x, const Tensor& x_cyc);
double identity_loss(const Tensor& x, const Tensor& g_of_x);

// Hinge on squared Euclidean distances over flattened samples:
//   max(|a - p|^2 - |a - n|^2 + margin, 0)
// Rank-4 inputs are treated as batches (leading dimension) and the
// per-sample hinges are averaged; lower-rank inputs are one sample.
double triplet_loss(const Tensor& anchor, const Tensor& positive,
                    const Tensor& negative, double margin);

// d_A + d_B + gamma * (d_A_aux + d_B_aux); aux terms must be present
// exactly when use_aux is set.
double total_d_loss(const LossRecord& record, const LossWeights& weights);

// g_adv_A2B + g_adv_B2A + lambda_cycle * (cycle_A + cycle_B)
//   + lambda_identity * (idt_A + idt_B) + triplet_A + triplet_B
double total_g_loss(const LossRecord& record, const LossWeights& weights);

// Analytic gradients used by the training loop (finite-difference checked).
// lsgan_d: dL/dreal_i = (real_i - 1) / n_real, dL/dfake_i = fake_i / n_fake
Tensor lsgan_d_grad_real(const Tensor& real_scores);
Tensor lsgan_d_grad_fake(const Tensor& fake_scores);
// lsgan_g: dL/dfake_i = (fake_i - 1) / n
Tensor lsgan_g_grad(const Tensor& fake_scores);
// L1 means: dL/dy_i = sign(y_i - x_i) / n  (0 at equality)
Tensor l1_grad(const Tensor& x, const Tensor& y);
// triplet: dL/danchor, zero for samples with an inactive hinge
Tensor triplet_grad_anchor(const Tensor& anchor, const Tensor& positive,
                           const Tensor& negative, double margin);

}  // namespace midistyle
