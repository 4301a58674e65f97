#pragma once

// Training objectives: conditional adversarial loss over patch score
// maps, L1 / reconstruction losses, the equilibrium controller for the
// auto-encoder discriminator, and the combined generator objective.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rubbinggan/tensor.hpp"

namespace rubbinggan {

constexpr double kLogEps = 1e-7;  // guard inside logs

struct EquilibriumState {
  double k = 0.0;        // proportional control variable, clamped to [0,1]
  double gamma = 0.5;    // diversity ratio
  double lambda_k = 0.001;  // controller gain
};

struct LossWeights {
  double lambda_l1 = 100.0;
};

struct LossBundle {
  double d1_loss = 0.0;
  double g_adv_loss = 0.0;
  double l1_loss = 0.0;
  double d2_loss = 0.0;
  double g_recon_loss = 0.0;
  double convergence_measure = 0.0;
};

namespace detail {
inline double clamp_score(double s) {
  return std::clamp(s, kLogEps, 1.0 - kLogEps);
}
}  // namespace detail

// Discriminator side of the conditional adversarial loss: mean over
// patches of -[log(real) + log(1-fake)].
inline double cgan_d1_loss(const Tensor& real_scores,
                           const Tensor& fake_scores) {
  if (!real_scores.same_shape(fake_scores))
    throw std::invalid_argument("cgan_d1_loss: score map shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < real_scores.size(); ++i) {
    acc -= std::log(detail::clamp_score(real_scores.data[i]));
    acc -= std::log(1.0 - detail::clamp_score(fake_scores.data[i]));
  }
  return acc / real_scores.size();
}

// Non-saturating generator term: mean of -log(fake).
inline double cgan_g_loss(const Tensor& fake_scores) {
  double acc = 0.0;
  for (double s : fake_scores.data)
    acc -= std::log(detail::clamp_score(s));
  return acc / fake_scores.size();
}

// Gradient of cgan_d1_loss w.r.t. the two score maps.
inline void cgan_d1_loss_grad(const Tensor& real_scores,
                              const Tensor& fake_scores, Tensor& d_real,
                              Tensor& d_fake) {
  d_real = Tensor(real_scores.n, real_scores.c, real_scores.h, real_scores.w);
  d_fake = d_real;
  const double m = static_cast<double>(real_scores.size());
  for (size_t i = 0; i < real_scores.size(); ++i) {
    d_real.data[i] = -1.0 / (detail::clamp_score(real_scores.data[i]) * m);
    d_fake.data[i] =
        1.0 / ((1.0 - detail::clamp_score(fake_scores.data[i])) * m);
  }
}

// Gradient of cgan_g_loss w.r.t. the fake score map.
inline Tensor cgan_g_loss_grad(const Tensor& fake_scores) {
  Tensor d(fake_scores.n, fake_scores.c, fake_scores.h, fake_scores.w);
  const double m = static_cast<double>(fake_scores.size());
  for (size_t i = 0; i < fake_scores.size(); ++i)
    d.data[i] = -1.0 / (detail::clamp_score(fake_scores.data[i]) * m);
  return d;
}

// Mean absolute per-element difference.
inline double l1_loss(const Tensor& y, const Tensor& y_hat) {
  if (!y.same_shape(y_hat))
    throw std::invalid_argument("l1_loss: shape mismatch " + y.shape_str() +
                                " vs " + y_hat.shape_str());
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i)
    acc += std::abs(y.data[i] - y_hat.data[i]);
  return acc / y.size();
}

// d(l1_loss)/d(y_hat); ties (y == y_hat) get subgradient 0.
inline Tensor l1_loss_grad(const Tensor& y, const Tensor& y_hat) {
  Tensor d(y.n, y.c, y.h, y.w);
  const double m = static_cast<double>(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    const double diff = y_hat.data[i] - y.data[i];
    d.data[i] = diff > 0 ? 1.0 / m : (diff < 0 ? -1.0 / m : 0.0);
  }
  return d;
}

// Auto-encoder reconstruction loss, L1 norm.
inline double recon_loss(const Tensor& v, const Tensor& v_rec) {
  return l1_loss(v, v_rec);
}

inline Tensor recon_loss_grad(const Tensor& v, const Tensor& v_rec) {
  return l1_loss_grad(v, v_rec);
}

// d2 trains on L_real - k * L_fake; the generator's reconstruction term
// is L_fake itself.
inline std::pair<double, double> began_losses(double l_real, double l_fake,
                                              const EquilibriumState& state) {
  return {l_real - state.k * l_fake, l_fake};
}

// Proportional controller step, k clamped to [0,1].
inline EquilibriumState update_k(EquilibriumState state, double l_real,
                                 double l_fake) {
  state.k = std::clamp(
      state.k + state.lambda_k * (state.gamma * l_real - l_fake), 0.0, 1.0);
  return state;
}

// Global convergence measure M = L_real + |gamma * L_real - L_fake|.
inline double convergence_measure(double l_real, double l_fake,
                                  double gamma) {
  return l_real + std::abs(gamma * l_real - l_fake);
}

// Combined generator objective: adversarial + weighted L1 + reconstruction.
inline double generator_objective(double g_adv, double l1, double g_recon,
                                  const LossWeights& w) {
  return g_adv + w.lambda_l1 * l1 + g_recon;
}

}  // namespace rubbinggan
