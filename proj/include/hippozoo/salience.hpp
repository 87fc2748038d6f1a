#pragma once

// Salience-modulated HiPPO: ds/dt = g(t) [A s + b f], the induced time warp,
// real-time history measures and readout functionals, and the selective-copy
// model trained with truncated BPTT.

#include "hippozoo/hippo.hpp"
#include "hippozoo/nnkit.hpp"
#include "hippozoo/signals.hpp"

#include <memory>

namespace hippozoo {

/// Exact ZOH step of (g A, g b) over dt.
Vec salience_step(const ContinuousLTI& cont, const Vec& s, double f, double g, double dt);

/// phi(t) = int_0^t g for a per-step constant trace; phi(k dt) = dt sum_{i<k} g_i.
struct WarpMap {
  double dt = 1.0;
  Vec g;
  Vec phi;  // length steps + 1

  double at(double t) const;
  /// Monotone search for t with phi(t) = u.
  double inverse(double u) const;
  /// g on the step containing t (right-continuous).
  double salience_at(double t) const;
  double end_time() const { return dt * static_cast<double>(g.size()); }
};

WarpMap warp(const Vec& g, double dt);

/// Real-time density of past time t0 seen from time t:
/// omega(phi(t) - phi(t0)) g(t0), for every t0 in `grid`.
Vec induced_measure(const HippoSpec& spec, const WarpMap& map, double t, const Vec& grid);

/// Per readout row w (rows x N), sum_n w_n P_n(phi(t) - phi(t0)) omega(...) g(t0)
/// on the grid; one column per row.
Mat output_functionals(const Mat& w, const HippoSpec& spec, const WarpMap& map, double t,
                       const Vec& grid);

/// ZOH pairs of (g A, g b). With bins > 0 g is snapped to the nearest of
/// `bins` log-spaced values in [g_lo, g_hi] and the pairs are memoized;
/// bins == 0 computes each step exactly.
class ZohBank {
 public:
  using Entry = std::shared_ptr<const numkit::Zoh<double>>;

  ZohBank(ContinuousLTI cont, double dt, int bins = 0, double g_lo = 1e-4, double g_hi = 2.0);

  /// Returns the pair and the value of g actually used.
  Entry get(double g, double& g_used);
  const ContinuousLTI& continuous() const { return cont_; }
  double dt() const { return dt_; }
  int bins() const { return bins_; }
  /// True when A is lower triangular (Leg-S); then so is every A_d.
  bool lower_triangular() const { return lower_; }

 private:
  ContinuousLTI cont_;
  double dt_;
  int bins_;
  bool lower_ = false;
  double log_lo_ = 0.0;
  double log_step_ = 0.0;
  std::vector<Entry> cache_;
};

struct SelectiveCopyConfig {
  int token_dim = 32;
  SelectiveCopyLayout layout;
  int d_model = 64;
  int n = 256;
  double timescale = 30.0;
  double dt = 1.0;
  double g_max = 2.0;
  int pool_dim = 16;
  int hidden = 128;
  double lr = 1e-3;
  double weight_decay = 0.01;
  long episodes = 20000;
  long eval_every = 1000;
  int eval_episodes = 64;
  int exp_cache_bins = 256;
  double g_lo = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Input projection, memory pooling, salience MLP and per-slot linear readouts.
struct SalienceCopyModel {
  Mat w_in;    // d_model x token_dim
  Mat w_pool;  // pool_dim x N
  Vec b_pool;
  nn::Mlp salience;      // (d_model + pool_dim) -> hidden -> 1
  std::vector<Mat> w_out;  // per slot: token_dim x (d_model N), column-major vec(S)
  std::vector<Vec> b_out;

  SalienceCopyModel() = default;
  SalienceCopyModel(const SelectiveCopyConfig& cfg, Rng& rng);

  SalienceCopyModel zeros_like() const;
  nn::ParamList params();
};

struct ChunkOutput {
  double loss = 0.0;       // mean squared error over write-phase entries
  Mat final_state;         // d_model x N, detached carry
  Vec g;                   // salience per step (value used by the dynamics)
  std::vector<Vec> writes; // readout per write step
  std::vector<Mat> states; // S_{t+1} per step when requested
};

/// One TBPTT chunk (an episode) from carry-in state `s0`. With `grads`
/// non-null the exact gradient of the chunk loss is accumulated into it.
ChunkOutput run_chunk(const SalienceCopyModel& model, const Episode& episode, const Mat& s0,
                      ZohBank& bank, SalienceCopyModel* grads, bool keep_states = false);

/// Index of the informative token (rows [0, count)) with the highest cosine
/// similarity to v.
int nearest_token(const Mat& tokens, int count, const Vec& v);

struct SalienceEval {
  double accuracy = 0.0;
  double mean_g_informative = 0.0;
  double mean_g_uninformative = 0.0;
  double mean_g_write = 0.0;
  double functional_argmax_hits = 0.0;  // mean over episodes of slots (out of per_episode) hit
};

SalienceEval evaluate_selective_copy(const SalienceCopyModel& model, const Mat& tokens,
                                     const SelectiveCopyConfig& cfg, ZohBank& bank,
                                     std::uint64_t eval_seed);

/// Per-step influence of one episode's inputs on each slot's readout:
/// rows = input steps, cols = slots, value = Frobenius norm of the readout
/// weight applied to the real-time functional integrated over that step's
/// hold interval (the ZOH response of a unit input at that step).
Mat slot_functional_norms(const SalienceCopyModel& model, const SelectiveCopyConfig& cfg, const Vec& g,
                          ZohBank& bank);

struct SelectiveCopyRow {
  long episode;
  double train_loss;
  double accuracy;
  double mean_g_informative;
  double mean_g_uninformative;
};

struct SelectiveCopyDump {
  long episode;
  Mat table;  // time, g, density, functional per slot
};

struct SelectiveCopyResult {
  std::vector<SelectiveCopyRow> rows;
  std::vector<SelectiveCopyDump> dumps;
  SalienceEval final_eval;
  SalienceCopyModel model;
  Mat tokens;
};

SelectiveCopyResult run_selective_copy(const SelectiveCopyConfig& cfg);

}  // namespace hippozoo
