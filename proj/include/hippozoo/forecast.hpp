#pragma once

// Forecasting HiPPO: a window system (1), a lagged system (2) fed by system
// 1's far-end reconstruction, and an aligned copy (3) fed by the signal.
// Streaming second moments give the least-squares and reduced-rank maps
// from system 2 to system 1, the predictive-memory projector and the induced
// history metric Q = T^T W T (W = I here).

#include "hippozoo/hippo.hpp"

#include <vector>

namespace hippozoo {

/// Running uncentered means of x x^T, y y^T, y x^T (plus first moments).
struct ForecastStats {
  Mat sxx, syy, syx;
  Vec mx, my;
  long count = 0;

  ForecastStats() = default;
  ForecastStats(int nx, int ny);

  /// Second moments about the running means.
  ForecastStats centered() const;
};

void update_stats(ForecastStats& stats, const Vec& x, const Vec& y);

struct RrrMap {
  Mat t;              // p x n
  int rank = 0;
  Mat px;             // n x n, idempotent, T px = T
  Vec singular;       // all singular values of the whitened cross-covariance
  double floor = 0.0; // eigenvalue floor applied to Sxx + ridge I
};

/// Whitening W = (Sxx + ridge I)^{-1/2} with eigenvalues floored at
/// floor_rel * lambda_max; SVD Syx W = U S V^T; T_d = U_d S_d V_d^T W and
/// P_x = W^{-1} V_d V_d^T W. Throws NumericError if ridge = 0 and Sxx has an
/// eigenvalue below the floor.
RrrMap fit_rrr(const ForecastStats& stats, int rank, double ridge = 1e-6, double floor_rel = 1e-8);

/// E|y - T x|^2 on the accumulated statistics.
double prediction_error(const ForecastStats& stats, const Mat& t);

struct HistoryMetric {
  Mat q;                // T^T T
  Mat lag_kernel;       // phi(lag_i)^T Q phi(lag_j)
  Vec eigenvalues;      // top k, descending
  Mat eigenfunctions;   // lags x k, sign fixed so the largest |value| is positive
};

/// Q and its top `k` eigenpairs decoded through the history system's basis.
HistoryMetric history_metric(const Mat& t, const HippoSpec& history_spec, const Vec& lags, int k);

/// Mean squared forward-difference derivative of f over a uniform grid.
double dirichlet_energy(const Vec& f, const Vec& grid);

struct ForecastConfig {
  long length = 20000;
  std::vector<double> horizons{4.0, 32.0};
  int n = 64;
  double history_timescale = 32.0;
  int rank = 8;
  std::vector<int> rank_sweep{1, 2, 4, 8, 16, 32, 64};
  double ridge = 1e-6;
  double floor_rel = 1e-8;
  bool center = false;
  long warmup = 0;
  double dt = 1.0;
  std::vector<double> lengthscales{0.1, 3.0, 16.0, 32.0, 64.0};
  std::vector<double> weights{0.5, 2.0, 5.0, 5.0, 5.0};
  int lag_points = 257;
  int eigen_count = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ForecastHorizonResult {
  double horizon = 0.0;
  RrrMap map;
  std::vector<std::pair<int, double>> rank_errors;  // (d, training error)
  double lag_rmse = 0.0;       // u(t) vs f(t - H)
  Mat forecast;                // tau, truth, forecast
  Mat memory;                  // lag, truth, system 3 reconstruction, predictive memory
  HistoryMetric metric;
  Vec lags;
  double top_dirichlet = 0.0;
};

struct ForecastResult {
  std::vector<ForecastHorizonResult> horizons;
  double signal_std = 0.0;
  double floored_mass = 0.0;
};

ForecastResult run_forecast(const ForecastConfig& cfg);

}  // namespace hippozoo
