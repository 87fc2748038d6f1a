#pragma once

// Dense networks with hand-written reverse mode, AdamW/SGD, finite-difference
// gradient checks and a flat binary checkpoint format.

#include "hippozoo/numkit.hpp"
#include "hippozoo/signals.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hippozoo::nn {

enum class Activation { Identity, Tanh, Sigmoid, Softplus, ScaledSigmoid };

Activation parse_activation(const std::string& name);

double softplus(double x);
double sigmoid(double x);

/// Elementwise activation. `g_max` only matters for ScaledSigmoid.
Vec activate(Activation act, const Vec& pre, double g_max = 2.0);
/// d post / d pre, from the pre- and post-activation values.
Vec activate_derivative(Activation act, const Vec& pre, const Vec& post, double g_max = 2.0);

/// A parameter tensor seen as a flat row-major-agnostic block of doubles.
struct Param {
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Map<Vec> flat() const { return {data, rows * cols}; }
};

using ParamList = std::vector<Param>;

inline Param param(Mat& m) { return {m.data(), m.rows(), m.cols()}; }
inline Param param(Vec& v) { return {v.data(), v.size(), 1}; }

void zero(const ParamList& list);
Eigen::Index count(const ParamList& list);

/// Uniform in +-sqrt(1 / fan_in).
Mat init_uniform(Eigen::Index rows, Eigen::Index fan_in, Rng& rng);

struct Dense {
  Mat w;  // out x in
  Vec b;
  Activation act = Activation::Identity;
};

/// Activations recorded by one forward pass.
struct MlpTape {
  Vec x;
  std::vector<Vec> pre;
  std::vector<Vec> post;
  bool live = false;
};

class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; one activation per layer. With `residual`
  /// a linear skip from the input is added to the last pre-activation.
  Mlp(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng,
      bool residual = false, double g_max = 2.0);

  Eigen::Index input_dim() const { return layers_.front().w.cols(); }
  Eigen::Index output_dim() const { return layers_.back().w.rows(); }
  bool residual() const { return residual_; }
  double g_max() const { return g_max_; }

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  Mat& skip() { return skip_; }

  Vec forward(const Vec& x, MlpTape* tape = nullptr) const;
  /// Accumulates parameter gradients into `grads` (same shape) and returns
  /// dL/dx. Consumes the tape.
  Vec backward(MlpTape& tape, const Vec& dy, Mlp& grads) const;

  Mlp zeros_like() const;
  ParamList params();

 private:
  std::vector<Dense> layers_;
  Mat skip_;  // out x in, empty without residual
  bool residual_ = false;
  double g_max_ = 2.0;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWConfig config;
  std::vector<Vec> m;
  std::vector<Vec> v;
  long step = 0;
};

/// Decoupled weight decay, bias-corrected moments.
void adamw_step(const ParamList& params, const ParamList& grads, AdamWState& state);

void sgd_step(const ParamList& params, const ParamList& grads, double lr);

/// Stop-gradient. Reverse passes here never cross a value returned by
/// detach: tapes end at chunk boundaries, so this is a value copy.
template <typename T>
T detach(const T& value) {
  return value;
}

struct GradCheck {
  double max_rel_error = 0.0;
  Eigen::Index checked = 0;
};

/// Central differences of `loss` against the analytic `grads`, entry by
/// entry: |a - n| / max(|a|, |n|, floor). With `per_tensor > 0` only that
/// many randomly chosen entries of each tensor are probed.
GradCheck check_gradients(const ParamList& params, const ParamList& grads,
                          const std::function<double()>& loss, double h = 1e-5,
                          Eigen::Index per_tensor = 0, std::uint64_t seed = 0, double floor = 1e-6);

/// "HZCK" magic, uint32 version, uint32 tensor count, then per tensor
/// uint64 rows, uint64 cols and rows*cols little-endian float64 values in
/// column-major order.
void save_checkpoint(const std::string& path, const ParamList& params);
/// Loads into existing tensors; shapes must match.
void load_checkpoint(const std::string& path, const ParamList& params);

}  // namespace hippozoo::nn
