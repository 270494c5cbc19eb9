#include "midistyle/losses.hpp"

#include <cmath>
#include <cstdio>

namespace midistyle {

namespace {

void check_scores(const Tensor& t, const char* what) {
  require(t.size() > 0, errc::empty_scores, what);
}

// batch view: rank-4 tensors are (N, ...), everything else is one sample
int64_t batch_count(const Tensor& t) {
  return t.rank() == 4 ? t.dim(0) : 1;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool LossRecord::all_finite() const {
  for (double v : {d_a, d_b, d_a_aux, d_b_aux, g_adv_a2b, g_adv_b2a, cycle_a,
                   cycle_b, idt_a, idt_b, triplet_a, triplet_b, d_total,
                   g_total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

const char* LossRecord::csv_header() {
  return "step,d_a,d_b,d_a_aux,d_b_aux,g_adv_a2b,g_adv_b2a,cycle_a,cycle_b,"
         "idt_a,idt_b,triplet_a,triplet_b,d_total,g_total";
}

std::string LossRecord::csv_row(int64_t step) const {
  std::string row = std::to_string(step);
  for (double v : {d_a, d_b, d_a_aux, d_b_aux, g_adv_a2b, g_adv_b2a, cycle_a,
                   cycle_b, idt_a, idt_b, triplet_a, triplet_b, d_total,
                   g_total}) {
    row += ",";
    row += fmt(v);
  }
  return row;
}

double lsgan_d_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  check_scores(real_scores, "real score map is empty");
  check_scores(fake_scores, "fake score map is empty");
  double real_term = 0.0;
  for (int64_t i = 0; i < real_scores.size(); ++i) {
    const double d = real_scores[i] - 1.0;
    real_term += d * d;
  }
  double fake_term = 0.0;
  for (int64_t i = 0; i < fake_scores.size(); ++i) {
    fake_term += fake_scores[i] * fake_scores[i];
  }
  return 0.5 * (real_term / static_cast<double>(real_scores.size()) +
                fake_term / static_cast<double>(fake_scores.size()));
}

double lsgan_g_loss(const Tensor& fake_scores) {
  check_scores(fake_scores, "fake score map is empty");
  double term = 0.0;
  for (int64_t i = 0; i < fake_scores.size(); ++i) {
    const double d = fake_scores[i] - 1.0;
    term += d * d;
  }
  return 0.5 * term / static_cast<double>(fake_scores.size());
}

double aux_d_loss(const Tensor& mixed_scores, const Tensor& fake_scores) {
  return lsgan_d_loss(mixed_scores, fake_scores);
}

double cycle_loss(const Tensor& x, const Tensor& x_cyc) {
  check_same_shape(x, x_cyc, "cycle loss inputs differ in shape");
  require(x.size() > 0, errc::empty_scores, "cycle loss inputs are empty");
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    acc += std::abs(x[i] - x_cyc[i]);
  }
  return acc / static_cast<double>(x.size());
}

double identity_loss(const Tensor& x, const Tensor& g_of_x) {
  check_same_shape(x, g_of_x, "identity loss inputs differ in shape");
  require(x.size() > 0, errc::empty_scores, "identity loss inputs are empty");
  return cycle_loss(x, g_of_x);
}

double triplet_loss(const Tensor& anchor, const Tensor& positive,
                    const Tensor& negative, double margin) {
  require(std::isfinite(margin) && margin > 0.0, errc::invalid_margin,
          "triplet margin must be positive");
  check_same_shape(anchor, positive, "anchor/positive shapes differ");
  check_same_shape(anchor, negative, "anchor/negative shapes differ");
  require(anchor.size() > 0, errc::empty_scores, "triplet inputs are empty");

  const int64_t n = batch_count(anchor);
  const int64_t stride = anchor.size() / n;
  double total = 0.0;
  for (int64_t b = 0; b < n; ++b) {
    double d_ap = 0.0, d_an = 0.0;
    for (int64_t i = b * stride; i < (b + 1) * stride; ++i) {
      const double dp = anchor[i] - positive[i];
      const double dn = anchor[i] - negative[i];
      d_ap += dp * dp;
      d_an += dn * dn;
    }
    total += std::max(d_ap - d_an + margin, 0.0);
  }
  return total / static_cast<double>(n);
}

double total_d_loss(const LossRecord& record, const LossWeights& weights) {
  weights.validate();
  if (weights.use_aux) {
    require(record.has_aux, errc::missing_term,
            "aux discriminator terms missing from the record");
    return record.d_a + record.d_b +
           weights.gamma * (record.d_a_aux + record.d_b_aux);
  }
  require(!record.has_aux, errc::missing_term,
          "aux terms present but aux discriminators are disabled");
  return record.d_a + record.d_b;
}

double total_g_loss(const LossRecord& record, const LossWeights& weights) {
  weights.validate();
  double total = record.g_adv_a2b + record.g_adv_b2a +
                 weights.lambda_cycle * (record.cycle_a + record.cycle_b) +
                 weights.lambda_identity * (record.idt_a + record.idt_b);
  if (weights.use_triplet) {
    require(record.has_triplet, errc::missing_term,
            "triplet terms missing from the record");
    total += record.triplet_a + record.triplet_b;
  } else {
    require(!record.has_triplet, errc::missing_term,
            "triplet terms present but the triplet loss is disabled");
  }
  return total;
}

Tensor lsgan_d_grad_real(const Tensor& real_scores) {
  check_scores(real_scores, "real score map is empty");
  Tensor g(real_scores.shape());
  const double n = static_cast<double>(real_scores.size());
  for (int64_t i = 0; i < g.size(); ++i) {
    g[i] = (real_scores[i] - 1.0) / n;
  }
  return g;
}

Tensor lsgan_d_grad_fake(const Tensor& fake_scores) {
  check_scores(fake_scores, "fake score map is empty");
  Tensor g(fake_scores.shape());
  const double n = static_cast<double>(fake_scores.size());
  for (int64_t i = 0; i < g.size(); ++i) {
    g[i] = fake_scores[i] / n;
  }
  return g;
}

Tensor lsgan_g_grad(const Tensor& fake_scores) {
  check_scores(fake_scores, "fake score map is empty");
  Tensor g(fake_scores.shape());
  const double n = static_cast<double>(fake_scores.size());
  for (int64_t i = 0; i < g.size(); ++i) {
    g[i] = (fake_scores[i] - 1.0) / n;
  }
  return g;
}

Tensor l1_grad(const Tensor& x, const Tensor& y) {
  check_same_shape(x, y, "L1 gradient inputs differ in shape");
  Tensor g(x.shape());
  const double n = static_cast<double>(x.size());
  for (int64_t i = 0; i < g.size(); ++i) {
    const double d = y[i] - x[i];
    g[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
  }
  return g;
}

Tensor triplet_grad_anchor(const Tensor& anchor, const Tensor& positive,
                           const Tensor& negative, double margin) {
  require(std::isfinite(margin) && margin > 0.0, errc::invalid_margin,
          "triplet margin must be positive");
  check_same_shape(anchor, positive, "anchor/positive shapes differ");
  check_same_shape(anchor, negative, "anchor/negative shapes differ");

  const int64_t n = batch_count(anchor);
  const int64_t stride = anchor.size() / n;
  Tensor g(anchor.shape());
  for (int64_t b = 0; b < n; ++b) {
    double d_ap = 0.0, d_an = 0.0;
    for (int64_t i = b * stride; i < (b + 1) * stride; ++i) {
      const double dp = anchor[i] - positive[i];
      const double dn = anchor[i] - negative[i];
      d_ap += dp * dp;
      d_an += dn * dn;
    }
    if (d_ap - d_an + margin <= 0.0) continue;  // inactive hinge
    for (int64_t i = b * stride; i < (b + 1) * stride; ++i) {
      g[i] = 2.0 * (negative[i] - positive[i]) / static_cast<double>(n);
    }
  }
  return g;
}

}  // namespace midistyle
