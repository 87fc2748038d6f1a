#pragma once

// Volterra readouts on a HiPPO state, online training on the Wray-Green
// system and lag-domain kernel reconstruction.

#include "hippozoo/hippo.hpp"
#include "hippozoo/nnkit.hpp"
#include "hippozoo/signals.hpp"

namespace hippozoo {

enum class ReadoutKind { Linear, Quadratic, Mlp };

const char* readout_name(ReadoutKind kind);

/// y = beta0 + s.beta1 + s' beta2 s, or an MLP on s.
struct VolterraReadout {
  ReadoutKind kind = ReadoutKind::Linear;
  Vec beta0 = Vec::Zero(1);
  Vec beta1;
  Mat beta2;  // unused (empty) for the linear and MLP variants
  nn::Mlp mlp;

  static VolterraReadout linear(int n);
  static VolterraReadout quadratic(int n);
  /// b0 + W_o tanh(W_h s + b_h).
  static VolterraReadout make_mlp(int n, int hidden, Rng& rng);

  double operator()(const Vec& s) const;
  VolterraReadout zeros_like() const;
  nn::ParamList params();
};

/// Accumulates d (y_hat - y)^2 / d params into `grads`, with
/// residual = y_hat - y.
void readout_grad(const VolterraReadout& r, const Vec& s, double residual, VolterraReadout& grads);

/// h2(t1, t2) = p(t1) p(t2) sum_ij B_ij P_i(t1) P_j(t2) with B the symmetric part
/// of beta2, p(t) = (dt / alpha) exp(-t / alpha) and Leg-S basis functions.
/// `lags` are in the spec's time unit.
Mat infer_kernel(const Mat& beta2, const HippoSpec& spec, const Vec& lags, double dt);

/// alpha mu(t1) mu(t2) on a lag grid (kernel time units).
Mat wray_green_kernel(const WrayGreenParams& params, const Vec& lags);

/// Pearson correlation of the entries of two equally shaped matrices.
double matrix_correlation(const Mat& a, const Mat& b);

struct VolterraConfig {
  long steps = 200000;
  double dt = 1e-2;
  double cutoff = 10.0;
  int n = 64;
  double alpha = 0.375;
  double lr_linear = 3e-2;
  double lr_quad = 3e-2;
  double lr_mlp = 1e-2;
  int mlp_hidden = 128;
  long log_every = 100;
  long trailing = 10000;
  int kernel_size = 50;
  std::uint64_t seed = 0;
  WrayGreenParams wg;
  double wg_dt = 1.0;  // sample spacing in Wray-Green kernel units

  void validate() const;
};

struct VolterraResult {
  Mat cumulative;  // rows: step, cum_err_linear, cum_err_quadratic, cum_err_mlp
  Vec trailing_mse;  // linear, quadratic, mlp over the last `trailing` steps
  Mat inferred_kernel;
  Mat true_kernel;
  double kernel_correlation = 0.0;
  VolterraReadout quadratic;
};

VolterraResult run_volterra(const VolterraConfig& config);

}  // namespace hippozoo
