#include "hippozoo/forecast.hpp"

#include "hippozoo/signals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hippozoo {

ForecastStats::ForecastStats(int nx, int ny)
    : sxx(Mat::Zero(nx, nx)), syy(Mat::Zero(ny, ny)), syx(Mat::Zero(ny, nx)), mx(Vec::Zero(nx)),
      my(Vec::Zero(ny)) {}

ForecastStats ForecastStats::centered() const {
  ForecastStats c = *this;
  c.sxx -= mx * mx.transpose();
  c.syy -= my * my.transpose();
  c.syx -= my * mx.transpose();
  c.mx.setZero();
  c.my.setZero();
  return c;
}

void update_stats(ForecastStats& stats, const Vec& x, const Vec& y) {
  if (x.size() != stats.sxx.rows() || y.size() != stats.syy.rows())
    throw std::invalid_argument("update_stats: dimension change");
  ++stats.count;
  const double w = 1.0 / static_cast<double>(stats.count);
  stats.sxx.noalias() += w * (x * x.transpose() - stats.sxx);
  stats.syy.noalias() += w * (y * y.transpose() - stats.syy);
  stats.syx.noalias() += w * (y * x.transpose() - stats.syx);
  stats.mx += w * (x - stats.mx);
  stats.my += w * (y - stats.my);
}

RrrMap fit_rrr(const ForecastStats& stats, int rank, double ridge, double floor_rel) {
  const Eigen::Index n = stats.sxx.rows(), p = stats.syy.rows();
  if (stats.count < n) throw std::invalid_argument("fit_rrr: fewer samples than state dimension");
  if (rank < 0 || rank > std::min(n, p)) throw std::invalid_argument("fit_rrr: rank out of range");
  if (ridge < 0) throw std::invalid_argument("fit_rrr: ridge must be >= 0");

  Mat s = 0.5 * (stats.sxx + stats.sxx.transpose());
  s.diagonal().array() += ridge;
  const numkit::SymEig eig = numkit::sym_eig(s);
  const double lmax = eig.values.cwiseAbs().maxCoeff();
  RrrMap out;
  out.floor = floor_rel * lmax;
  if (!(lmax > 0)) throw NumericError("fit_rrr: zero input covariance");
  if (ridge == 0 && eig.values.minCoeff() < out.floor)
    throw NumericError("fit_rrr: input covariance below the eigenvalue floor");
  const Vec lam = eig.values.cwiseMax(out.floor);
  const Mat w = eig.vectors * lam.cwiseSqrt().cwiseInverse().asDiagonal() * eig.vectors.transpose();
  const Mat w_inv = eig.vectors * lam.cwiseSqrt().asDiagonal() * eig.vectors.transpose();

  const numkit::Svd sv = numkit::svd(stats.syx * w);
  out.singular = sv.sigma;
  out.rank = rank;
  const Mat ud = sv.u.leftCols(rank), vd = sv.v.leftCols(rank);
  out.t = ud * sv.sigma.head(rank).asDiagonal() * vd.transpose() * w;
  out.px = w_inv * vd * vd.transpose() * w;
  return out;
}

double prediction_error(const ForecastStats& stats, const Mat& t) {
  return stats.syy.trace() - 2.0 * (t * stats.syx.transpose()).trace() +
         (t * stats.sxx * t.transpose()).trace();
}

HistoryMetric history_metric(const Mat& t, const HippoSpec& history_spec, const Vec& lags, int k) {
  numkit::require_finite(t, "history_metric");
  HistoryMetric out;
  out.q = t.transpose() * t;
  Mat phi(lags.size(), t.cols());
  for (Eigen::Index i = 0; i < lags.size(); ++i) phi.row(i) = basis_at_lag(history_spec, lags(i)).transpose();
  out.lag_kernel = phi * out.q * phi.transpose();

  const numkit::SymEig eig = numkit::sym_eig(out.q);
  k = std::clamp(k, 0, static_cast<int>(out.q.rows()));
  out.eigenvalues.resize(k);
  out.eigenfunctions.resize(lags.size(), k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index col = out.q.rows() - 1 - j;
    out.eigenvalues(j) = eig.values(col);
    Vec f = phi * eig.vectors.col(col);
    Eigen::Index imax = 0;
    f.cwiseAbs().maxCoeff(&imax);
    if (f(imax) < 0) f = -f;
    out.eigenfunctions.col(j) = f;
  }
  return out;
}

double dirichlet_energy(const Vec& f, const Vec& grid) {
  if (f.size() != grid.size() || f.size() < 2) throw std::invalid_argument("dirichlet_energy: need matching grids of size >= 2");
  double e = 0.0;
  for (Eigen::Index i = 0; i + 1 < f.size(); ++i) {
    const double d = (f(i + 1) - f(i)) / (grid(i + 1) - grid(i));
    e += d * d;
  }
  return e / static_cast<double>(f.size() - 1);
}

void ForecastConfig::validate() const {
  if (length < 2) throw std::invalid_argument("forecast: length must be >= 2");
  if (horizons.empty()) throw std::invalid_argument("forecast: need at least one horizon");
  for (double h : horizons)
    if (!(h > 0)) throw std::invalid_argument("forecast: horizons must be > 0");
  if (n < 1) throw std::invalid_argument("forecast: n must be >= 1");
  if (!(history_timescale > 0 && dt > 0)) throw std::invalid_argument("forecast: timescales must be > 0");
  if (rank < 0 || rank > n) throw std::invalid_argument("forecast: rank must be in [0, n]");
  for (int d : rank_sweep)
    if (d < 0 || d > n) throw std::invalid_argument("forecast: rank_sweep entries must be in [0, n]");
  if (ridge < 0 || !(floor_rel > 0)) throw std::invalid_argument("forecast: bad ridge or floor");
  if (warmup < 0 || warmup + n > length) throw std::invalid_argument("forecast: warmup leaves fewer than n samples");
  if (lengthscales.empty() || lengthscales.size() != weights.size())
    throw std::invalid_argument("forecast: lengthscales and weights must have equal nonzero length");
  if (lag_points < 2 || eigen_count < 1) throw std::invalid_argument("forecast: need lag_points >= 2, eigen_count >= 1");
}

namespace {

Vec uniform_grid(double lo, double hi, int points) {
  return Vec::LinSpaced(points, lo, hi);
}

}  // namespace

ForecastResult run_forecast(const ForecastConfig& cfg) {
  cfg.validate();
  const double h_max = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
  const long future = static_cast<long>(std::ceil(h_max / cfg.dt)) + 1;

  Rng rng(cfg.seed);
  const GpSample gp = gp_rbf_mixture(cfg.length + future,
                                     Eigen::Map<const Vec>(cfg.lengthscales.data(), cfg.lengthscales.size()),
                                     Eigen::Map<const Vec>(cfg.weights.data(), cfg.weights.size()), rng);
  const Vec& x = gp.x;
  ForecastResult result;
  result.floored_mass = gp.floored_mass;
  {
    const Vec head = x.head(cfg.length);
    const double mean = head.mean();
    result.signal_std = std::sqrt((head.array() - mean).square().mean());
  }

  const HippoSpec spec23{Family::LegT, cfg.n, cfg.history_timescale};
  const DiscreteLTI sys23 = discretize(make_hippo(spec23), cfg.dt);
  const Vec lags = uniform_grid(0.0, cfg.history_timescale, cfg.lag_points);

  for (double horizon : cfg.horizons) {
    const HippoSpec spec1{Family::LegT, cfg.n, horizon};
    const DiscreteLTI sys1 = discretize(make_hippo(spec1), cfg.dt);
    const Vec far_end = basis_at_lag(spec1, horizon);

    Vec s1 = Vec::Zero(cfg.n), s2 = Vec::Zero(cfg.n), s3 = Vec::Zero(cfg.n);
    ForecastStats stats(cfg.n, cfg.n);
    double lag_sq = 0.0;
    long lag_count = 0;
    const auto lag_steps = static_cast<long>(std::llround(horizon / cfg.dt));
    for (long t = 0; t < cfg.length; ++t) {
      const double f = x(t);
      s1 = sys1.a_d * s1 + sys1.b_d * f;
      const double u = far_end.dot(s1);
      s2 = sys23.a_d * s2 + sys23.b_d * u;
      s3 = sys23.a_d * s3 + sys23.b_d * f;
      if (t >= cfg.warmup) update_stats(stats, s2, s1);
      if (t >= 2 * lag_steps) {  // system 1 has seen a full window
        lag_sq += (u - x(t - lag_steps)) * (u - x(t - lag_steps));
        ++lag_count;
      }
    }
    numkit::require_finite(s1, "run_forecast");

    const ForecastStats fit_stats = cfg.center ? stats.centered() : stats;
    ForecastHorizonResult hr;
    hr.horizon = horizon;
    hr.map = fit_rrr(fit_stats, cfg.rank, cfg.ridge, cfg.floor_rel);
    for (int d : cfg.rank_sweep)
      hr.rank_errors.emplace_back(d, prediction_error(fit_stats, fit_rrr(fit_stats, d, cfg.ridge, cfg.floor_rel).t));
    hr.lag_rmse = lag_count > 0 ? std::sqrt(lag_sq / static_cast<double>(lag_count)) : 0.0;

    // Forecast at the last training step: system 1 coordinates, tau in [0, H] is lag H - tau.
    const long t_end = cfg.length - 1;
    const Vec y_hat = hr.map.t * s3;
    const int f_points = static_cast<int>(future);
    hr.forecast.resize(f_points, 3);
    for (int i = 0; i < f_points; ++i) {
      const double tau = std::min(i * cfg.dt, horizon);
      hr.forecast(i, 0) = tau;
      hr.forecast(i, 1) = x(t_end + i);
      hr.forecast(i, 2) = basis_at_lag(spec1, horizon - tau).dot(y_hat);
    }
    const Vec pm = hr.map.px * s3;
    hr.memory.resize(cfg.lag_points, 4);
    for (int i = 0; i < cfg.lag_points; ++i) {
      const double lag = lags(i);
      const double pos = static_cast<double>(t_end) - lag / cfg.dt;
      const auto k = static_cast<long>(std::floor(pos));
      const double w = pos - static_cast<double>(k);
      hr.memory(i, 0) = lag;
      hr.memory(i, 1) = k >= 0 ? (1.0 - w) * x(k) + w * x(std::min(k + 1, t_end)) : 0.0;
      const Vec phi = basis_at_lag(spec23, lag);
      hr.memory(i, 2) = phi.dot(s3);
      hr.memory(i, 3) = phi.dot(pm);
    }
    hr.lags = lags;
    hr.metric = history_metric(hr.map.t, spec23, lags, cfg.eigen_count);
    hr.top_dirichlet = dirichlet_energy(hr.metric.eigenfunctions.col(0), lags);
    result.horizons.push_back(std::move(hr));
  }
  return result;
}

}  // namespace hippozoo
