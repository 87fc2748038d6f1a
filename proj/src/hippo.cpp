#include "hippozoo/hippo.hpp"

#include <cmath>
#include <stdexcept>

namespace hippozoo {

const char* family_name(Family f) { return f == Family::LegT ? "legt" : "legs"; }

Family parse_family(const std::string& name) {
  if (name == "legt" || name == "LegT" || name == "leg-t") return Family::LegT;
  if (name == "legs" || name == "LegS" || name == "leg-s") return Family::LegS;
  throw std::invalid_argument("unknown HiPPO family '" + name + "'");
}

void HippoSpec::validate() const {
  if (n < 1) throw std::invalid_argument("HippoSpec: N must be >= 1");
  if (!(timescale > 0) || !std::isfinite(timescale))
    throw std::invalid_argument("HippoSpec: timescale must be finite and > 0");
}

ContinuousLTI make_hippo(const HippoSpec& spec) {
  spec.validate();
  const int n = spec.n;
  Vec bn(n);
  for (int i = 0; i < n; ++i) bn(i) = std::sqrt(2.0 * i + 1.0);
  Mat a(n, n);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const double prod = bn(row) * bn(col);
      if (spec.family == Family::LegT) {
        const double parity = ((row + col) % 2 == 0) ? 1.0 : -1.0;
        a(row, col) = (col <= row) ? -prod : -prod * parity;
      } else {
        if (row < col)
          a(row, col) = 0.0;
        else if (row == col)
          a(row, col) = -prod * (row + 1.0) / (2.0 * row + 1.0);
        else
          a(row, col) = -prod;
      }
    }
  }
  return {a / spec.timescale, bn / spec.timescale};
}

ContinuousLTI legt_table_transcription(int n, double timescale, int sign) {
  Vec bn(n);
  for (int i = 0; i < n; ++i) bn(i) = std::sqrt(2.0 * i + 1.0);
  Mat a = Mat::Zero(n, n);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col <= row; ++col) {
      const double prod = bn(row) * bn(col);
      a(row, col) = (row == col) ? prod : prod * (((row - col + 1) % 2 == 0) ? 1.0 : -1.0);
    }
  return {sign * a / timescale, bn / timescale};
}

DiscreteLTI discretize(const ContinuousLTI& sys, double dt) {
  auto zoh = numkit::zoh_discretize(sys.a, sys.b, dt);
  return {std::move(zoh.a_d), std::move(zoh.b_d), dt};
}

Vec step(const DiscreteLTI& sys, const Vec& s, double f) {
  if (s.size() != sys.a_d.rows()) throw std::invalid_argument("step: state dimension mismatch");
  Vec out = sys.a_d * s + sys.b_d * f;
  if (!out.allFinite()) throw NumericError("step: non-finite state");
  return out;
}

Mat step_batch(const DiscreteLTI& sys, const Mat& states, const Vec& inputs) {
  if (states.cols() != sys.a_d.rows() || inputs.size() != states.rows())
    throw std::invalid_argument("step_batch: shape mismatch");
  Mat out = states * sys.a_d.transpose();
  out.noalias() += inputs * sys.b_d.transpose();
  if (!out.allFinite()) throw NumericError("step_batch: non-finite state");
  return out;
}

Vec basis_at_lag(const HippoSpec& spec, const OrthoBasis& legendre, double lag) {
  const double x = (spec.family == Family::LegT) ? lag / spec.timescale
                                                 : -std::expm1(-lag / spec.timescale);
  return eval_basis(legendre, x);
}

Vec basis_at_lag(const HippoSpec& spec, double lag) {
  return basis_at_lag(spec, legendre_shifted(spec.n), lag);
}

double measure_density(const HippoSpec& spec, double lag) {
  if (lag < 0) return 0.0;
  if (spec.family == Family::LegT) return lag <= spec.timescale ? 1.0 / spec.timescale : 0.0;
  return std::exp(-lag / spec.timescale) / spec.timescale;
}

Reconstruction reconstruct(const HippoSpec& spec, const Vec& state, const Vec& lags) {
  spec.validate();
  if (state.size() != spec.n) throw std::invalid_argument("reconstruct: state dimension mismatch");
  const OrthoBasis legendre = legendre_shifted(spec.n);
  Reconstruction out{Vec(lags.size()), std::vector<bool>(lags.size(), false)};
  for (Eigen::Index i = 0; i < lags.size(); ++i) {
    out.values(i) = basis_at_lag(spec, legendre, lags(i)).dot(state);
    if (spec.family == Family::LegT)
      out.outside_window[i] = lags(i) < 0 || lags(i) > spec.timescale;
    else
      out.outside_window[i] = lags(i) < 0;
  }
  return out;
}

double SampledHistory::at(double t) const {
  const double pos = (t - t0) / dt;
  const auto last = values.size() - 1;
  if (pos <= 0) return values(0);
  if (pos >= static_cast<double>(last)) return values(last);
  const auto i = static_cast<Eigen::Index>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return (1.0 - frac) * values(i) + frac * values(i + 1);
}

Vec project_history_oracle(const SampledHistory& history, const HippoSpec& spec, double t,
                           double legs_cutoff) {
  spec.validate();
  if (history.values.size() < 2) throw std::invalid_argument("project_history_oracle: history too short");
  const double support =
      spec.family == Family::LegT ? spec.timescale : legs_cutoff * spec.timescale;
  const double eps = 1e-9 * history.dt;
  if (t - support < history.t0 - eps || t > history.end_time() + eps)
    throw std::invalid_argument("project_history_oracle: history does not cover the measure support");

  const OrthoBasis legendre = legendre_shifted(spec.n);
  const int nodes = spec.n / 2 + 3;
  const Quadrature unit = gauss_legendre(nodes, 0.0, 1.0);
  Vec coeffs = Vec::Zero(spec.n);
  // Panels follow the sample grid so the interpolant is smooth on each panel.
  double lag_lo = 0.0;
  while (lag_lo < support - eps) {
    const double time_hi = t - lag_lo;
    const double cell = std::floor((time_hi - history.t0) / history.dt - 1e-9);
    const double next_time = history.t0 + cell * history.dt;
    const double lag_hi = std::min(support, t - next_time);
    const double width = lag_hi - lag_lo;
    for (Eigen::Index q = 0; q < unit.nodes.size(); ++q) {
      const double lag = lag_lo + width * unit.nodes(q);
      const double w = width * unit.weights(q) * measure_density(spec, lag);
      coeffs += (w * history.at(t - lag)) * basis_at_lag(spec, legendre, lag);
    }
    lag_lo = lag_hi;
  }
  return coeffs;
}

}  // namespace hippozoo
