#pragma once

// Leg-T / Leg-S HiPPO generators, ZOH stepping, history reconstruction and a
// direct-quadrature projection oracle for the state.

#include "hippozoo/numkit.hpp"
#include "hippozoo/orthopoly.hpp"

#include <vector>

namespace hippozoo {

enum class Family { LegT, LegS };

const char* family_name(Family f);
Family parse_family(const std::string& name);

struct HippoSpec {
  Family family = Family::LegT;
  int n = 16;
  double timescale = 1.0;  // window length (Leg-T) or forgetting time (Leg-S)

  void validate() const;
};

/// ds/dt = A s + b f.
struct ContinuousLTI {
  Mat a;
  Vec b;
};

struct DiscreteLTI {
  Mat a_d;
  Vec b_d;
  double dt = 0.0;
};

/// Generator for the spec, already divided by the timescale.
///
/// Leg-T is the generator of the uniform-window projection in the oriented
/// basis L_n (s = 0 the present):
///   A_nk = -b_n b_k (k <= n),  -b_n b_k (-1)^{n+k} (k > n),  b_n = sqrt(2n+1).
/// Leg-S follows the lower-triangular table:
///   A_nk = -b_n b_k (n > k),  -(n+1) (n = k),  0 (n < k).
ContinuousLTI make_hippo(const HippoSpec& spec);

/// The lower-triangular Leg-T entry exactly as tabulated, times `sign`.
/// Kept to show it does not generate the window projection.
ContinuousLTI legt_table_transcription(int n, double timescale, int sign);

DiscreteLTI discretize(const ContinuousLTI& sys, double dt);

/// s' = A_d s + b_d f. Throws NumericError on a non-finite result.
Vec step(const DiscreteLTI& sys, const Vec& s, double f);

/// Row-per-channel batch: S' = S A_d^T + u b_d^T for S (channels x N).
Mat step_batch(const DiscreteLTI& sys, const Mat& states, const Vec& inputs);

/// Basis functions of the family at a lag (same time units as the timescale).
/// Leg-T: L_n(lag / tau); Leg-S: L_n(1 - exp(-lag / tau)).
Vec basis_at_lag(const HippoSpec& spec, const OrthoBasis& legendre, double lag);
Vec basis_at_lag(const HippoSpec& spec, double lag);

/// History measure density at a lag, normalized to unit mass.
double measure_density(const HippoSpec& spec, double lag);

struct Reconstruction {
  Vec values;
  std::vector<bool> outside_window;  // Leg-T lags beyond the window
};

/// f(t - lag) ~ sum_n s_n P_n(lag) on a lag grid.
Reconstruction reconstruct(const HippoSpec& spec, const Vec& state, const Vec& lags);

/// Uniformly sampled signal: value(i) = f(t0 + i * dt); linear interpolation in between.
struct SampledHistory {
  double t0 = 0.0;
  double dt = 1.0;
  Vec values;

  double end_time() const { return t0 + dt * static_cast<double>(values.size() - 1); }
  double at(double t) const;
};

/// c_n = int f(t - lag) P_n(lag) w(lag) dlag by panel-wise Gauss-Legendre over
/// the sample intervals. Leg-S is truncated at `legs_cutoff` timescales.
/// Throws std::invalid_argument when the history does not cover the support.
Vec project_history_oracle(const SampledHistory& history, const HippoSpec& spec, double t,
                           double legs_cutoff = 40.0);

}  // namespace hippozoo
