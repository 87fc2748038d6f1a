#pragma once

// Synthetic data: a counter-based RNG, band-limited noise, the Wray-Green
// quadratic system, OU mixtures, an RBF-mixture Gaussian process and the two
// token-task episode samplers.

#include "hippozoo/numkit.hpp"

#include <cstdint>
#include <vector>

namespace hippozoo {

/// Counter-based generator: output i of stream (seed, stream) is a fixed
/// mix of (seed, stream, i), so forked streams never overlap and results do
/// not depend on which thread draws them.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  Vec normal_vector(Eigen::Index n);
  /// Independent child stream.
  Rng fork(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static std::uint64_t mix(std::uint64_t z);
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// White Gaussian noise low-passed in the frequency domain (bins above
/// `cutoff` Hz zeroed), rescaled to unit sample variance.
Vec bandlimited_noise(Eigen::Index length, double dt, double cutoff, Rng& rng);

struct WrayGreenParams {
  double a = 2.0;
  double m = 0.3;
  double k = 0.08;
  double tau_max = 50.0;
  double alpha = 0.004;

  double mu(double tau) const;
};

/// y = alpha z^2 with z(t) = int_0^tau_max mu(tau) f(t - tau) dtau, trapezoid
/// rule on the sample grid. `dt` is the sample spacing in the kernel's time
/// unit. Samples before the start count as zero.
Vec wray_green(const Vec& f, double dt, const WrayGreenParams& params);

struct OuMixture {
  Vec x;
  Vec timescales;
};

/// x_t = K^{-1/2} sum_k z^k_t with exact AR(1) recursions, log-uniform
/// timescales in [tau_lo, tau_hi] and stationary initialization.
OuMixture ou_mixture(Eigen::Index length, int components, double tau_lo, double tau_hi, Rng& rng,
                     double dt = 1.0);

struct GpSample {
  Vec x;
  double floored_mass = 0.0;  // fraction of circulant spectrum mass clipped at zero
};

/// Weights normalized so sum w_m^2 = 1.
Vec normalize_rbf_weights(const Vec& raw);

/// kappa(d) = sum w_m^2 exp(-d^2 / (2 l_m^2)) with normalized weights.
double rbf_mixture_kernel(double lag, const Vec& lengthscales, const Vec& weights);

/// Stationary zero-mean sample on the integer grid by circulant embedding;
/// negative circulant eigenvalues are floored at zero.
GpSample gp_rbf_mixture(Eigen::Index length, const Vec& lengthscales, const Vec& raw_weights,
                        Rng& rng);

/// `count` pairwise distinct unit vectors in R^dim, one per row.
Mat make_token_table(int count, int dim, Rng& rng);

enum class Phase { Informative, Uninformative, Write, Key, Value };

struct Episode {
  Mat inputs;                   // steps x dim
  Mat targets;                  // steps x dim, zero where unsupervised
  std::vector<Phase> phases;
  std::vector<int> input_ids;   // token-table row per step
  std::vector<int> target_ids;  // -1 where unsupervised

  Eigen::Index length() const { return inputs.rows(); }
};

/// Selective copy. Token rows 0..15 informative, 16 uninformative, 17 write.
struct SelectiveCopyLayout {
  int informative = 16;
  int per_episode = 10;  // informative tokens per episode (= write steps)
  int distractors = 10;
  int uninformative_id() const { return informative; }
  int write_id() const { return informative + 1; }
  int table_size() const { return informative + 2; }
  int length() const { return per_episode + distractors + per_episode; }
};

Episode selective_copy_episode(const Mat& tokens, Rng& rng, const SelectiveCopyLayout& layout = {});

/// Associative recall. Token rows [0, set) are A, [set, 2 set) are B and
/// row 2 set is the write token.
struct AssocRecallLayout {
  int set_size = 12;
  int length = 12;  // even
  int max_retries = 1000;
  int write_id() const { return 2 * set_size; }
  int table_size() const { return 2 * set_size + 1; }
};

Episode assoc_recall_episode(const Mat& tokens, Rng& rng, const AssocRecallLayout& layout = {});

}  // namespace hippozoo
