#pragma once

// Multiscale HiPPO: a Leg-T state carried across a continuum of timescales,
// dS/dt = A S K + b r^T f with K the scale-coupling matrix. Stepping is done
// in the eigenframe of K, where the system is a bank of single-scale HiPPOs.

#include "hippozoo/hippo.hpp"
#include "hippozoo/orthopoly.hpp"

#include <string>
#include <vector>

namespace hippozoo {

enum class MsVariant { Basic, Jeffreys, Log };

const char* variant_name(MsVariant v);
MsVariant parse_variant(const std::string& name);

struct MultiscaleSystem {
  MsVariant variant = MsVariant::Log;
  int n = 16;
  int m = 128;
  double tau0 = 10.0;
  double eps = 1e-3;
  ContinuousLTI hippo;      // Leg-T generator divided by tau0
  OrthoBasis scale_basis;   // in g (basic, jeffreys) or u = log g (log)
  Mat coupling;             // C = J, or G = exp(J) for the log variant
  Vec r;                    // scale-basis coefficients of g
  numkit::SymEig spectral;  // coupling = V diag(lambda) V^T
};

/// Scale basis and coupling for a variant. Basic: uniform on [0, 1];
/// Jeffreys: 1/g on [eps, 1]; log: uniform in u on [log eps, 0], G = exp(J).
MultiscaleSystem build_multiscale(MsVariant variant, int n, int m, double tau0, double eps);

/// Dense NM x NM generator of vec(S) and the injection vec(b r^T).
ContinuousLTI vectorized_system(const MultiscaleSystem& sys);

/// Per-column ZOH pairs in the eigenframe for a fixed dt.
struct MultiscaleStepper {
  double dt = 1.0;
  Mat v;                     // eigenvectors of the coupling
  std::vector<Mat> a_d;      // column m: exp(dt lambda_m A)
  Mat b_d;                   // N x M, column m: ZOH input for (lambda_m A, (V^T r)_m b)

  MultiscaleStepper() = default;
  MultiscaleStepper(const MultiscaleSystem& sys, double dt);

  /// Eigenframe state S~ = S V.
  Mat to_spectral(const Mat& s) const { return s * v; }
  Mat from_spectral(const Mat& st) const { return st * v.transpose(); }
  /// In-place step of an eigenframe state.
  void advance(Mat& st, double f) const;
};

/// Exact ZOH step of S (N x M) over dt.
Mat ms_step(const MultiscaleSystem& sys, const Mat& s, double f, double dt);

/// Scale coordinate the query evaluates the scale basis at.
double query_scale(const MultiscaleSystem& sys, double horizon);

/// c(L) = S psi(x(L)): Leg-T coefficients over [t - L, t].
Vec query(const MultiscaleSystem& sys, const Mat& s, double horizon);

struct MultiscaleConfig {
  int trials = 16;
  long length = 30000;
  int ou_components = 8;
  double ou_tau_lo = 2.0;
  double ou_tau_hi = 2000.0;
  int n = 16;
  int m = 128;
  double tau0 = 10.0;
  double eps = 1e-3;
  double dt = 1.0;
  std::vector<MsVariant> variants{MsVariant::Basic, MsVariant::Jeffreys, MsVariant::Log};
  std::vector<double> baselines{10.0, 100.0, 1000.0, 10000.0};
  double horizon_lo_exp = 1.0;  // horizons 10^(lo + k step), k = 0..count-1
  double horizon_step = 0.1;
  int horizon_count = 31;
  int grid_points = 128;
  std::vector<double> dump_horizons{10.0, 100.0, 1000.0, 10000.0};
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  std::vector<double> horizons() const;
};

struct MultiscaleRow {
  double horizon;
  std::string system;
  double mse_mean;
  double mse_sem;
};

struct MultiscaleDump {
  double horizon;
  std::vector<std::string> systems;
  Mat table;  // s, time, truth, one reconstruction column per system
};

struct MultiscaleResult {
  std::vector<MultiscaleRow> rows;
  std::vector<MultiscaleDump> dumps;  // first trial
};

/// x(t(s_i)) with t(s) = end - s L and s_i uniform on [0, 1], by linear
/// interpolation. Throws when the window starts before the first sample.
Vec history_on_grid(const Vec& x, double horizon, int points);

/// sum_k c_k L_k(s_i) on the same grid.
Vec legendre_on_grid(const Vec& c, int points);

MultiscaleResult run_multiscale(const MultiscaleConfig& cfg);

}  // namespace hippozoo
