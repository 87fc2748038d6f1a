#include "hippozoo/signals.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace hippozoo {

std::uint64_t Rng::mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next() { return mix(key_ ^ mix(counter_++)); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t r = next();
  while (r >= limit) r = next();
  return r % n;
}

Vec Rng::normal_vector(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Rng Rng::fork(std::uint64_t stream) const {
  Rng child;
  child.key_ = mix(key_ ^ mix(stream * 0xd1b54a32d192ed03ULL + 1));
  return child;
}

Vec bandlimited_noise(Eigen::Index length, double dt, double cutoff, Rng& rng) {
  if (length < 2) throw std::invalid_argument("bandlimited_noise: length must be >= 2");
  const double nyquist = 0.5 / dt;
  if (!(cutoff > 0) || cutoff >= nyquist)
    throw std::invalid_argument("bandlimited_noise: cutoff must be in (0, Nyquist)");
  std::vector<double> white(length);
  for (auto& w : white) w = rng.normal();
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  const double df = 1.0 / (dt * static_cast<double>(length));
  for (Eigen::Index k = 0; k < length; ++k) {
    const Eigen::Index kk = std::min(k, length - k);
    if (static_cast<double>(kk) * df > cutoff) spec[k] = 0.0;
  }
  std::vector<double> out;
  fft.inv(out, spec);
  Vec x = Eigen::Map<Vec>(out.data(), length);
  x.array() -= x.mean();
  const double sd = std::sqrt(x.squaredNorm() / static_cast<double>(length));
  if (!(sd > 0)) throw NumericError("bandlimited_noise: filtered signal vanished");
  return x / sd;
}

double WrayGreenParams::mu(double tau) const { return a / m * std::exp(-k * tau) * std::sin(m * tau); }

Vec wray_green(const Vec& f, double dt, const WrayGreenParams& p) {
  if (!(dt > 0)) throw std::invalid_argument("wray_green: dt must be > 0");
  if (!(p.a > 0 && p.m > 0 && p.k > 0 && p.tau_max > 0 && p.alpha > 0))
    throw std::invalid_argument("wray_green: parameters must be positive");
  const auto taps = static_cast<Eigen::Index>(std::llround(p.tau_max / dt));
  Vec kernel(taps + 1);
  for (Eigen::Index j = 0; j <= taps; ++j) {
    const double w = (j == 0 || j == taps) ? 0.5 : 1.0;
    kernel(j) = w * dt * p.mu(static_cast<double>(j) * dt);
  }
  Vec y(f.size());
  for (Eigen::Index t = 0; t < f.size(); ++t) {
    const Eigen::Index n = std::min<Eigen::Index>(taps, t) + 1;
    // z_t = sum_j kernel_j f_{t-j}
    const double z = kernel.head(n).dot(f.segment(t - n + 1, n).reverse());
    y(t) = p.alpha * z * z;
  }
  return y;
}

OuMixture ou_mixture(Eigen::Index length, int components, double tau_lo, double tau_hi, Rng& rng,
                     double dt) {
  if (!(tau_lo > 0 && tau_hi >= tau_lo)) throw std::invalid_argument("ou_mixture: bad timescale range");
  if (components < 1) throw std::invalid_argument("ou_mixture: need at least one component");
  OuMixture out{Vec::Zero(length), Vec(components)};
  Vec a(components), b(components), z(components);
  for (int k = 0; k < components; ++k) {
    out.timescales(k) = std::exp(rng.uniform(std::log(tau_lo), std::log(tau_hi)));
    a(k) = std::exp(-dt / out.timescales(k));
    b(k) = std::sqrt(1.0 - a(k) * a(k));
    z(k) = rng.normal();
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(components));
  for (Eigen::Index t = 0; t < length; ++t) {
    if (t > 0)
      for (int k = 0; k < components; ++k) z(k) = a(k) * z(k) + b(k) * rng.normal();
    out.x(t) = scale * z.sum();
  }
  return out;
}

Vec normalize_rbf_weights(const Vec& raw) {
  const double n = raw.norm();
  if (!(n > 0)) throw std::invalid_argument("normalize_rbf_weights: all-zero weights");
  return raw / n;
}

double rbf_mixture_kernel(double lag, const Vec& lengthscales, const Vec& weights) {
  double k = 0.0;
  for (Eigen::Index m = 0; m < lengthscales.size(); ++m)
    k += weights(m) * weights(m) * std::exp(-lag * lag / (2.0 * lengthscales(m) * lengthscales(m)));
  return k;
}

GpSample gp_rbf_mixture(Eigen::Index length, const Vec& lengthscales, const Vec& raw_weights,
                        Rng& rng) {
  if (lengthscales.size() != raw_weights.size() || lengthscales.size() == 0)
    throw std::invalid_argument("gp_rbf_mixture: lengthscales/weights mismatch");
  if ((lengthscales.array() <= 0).any()) throw std::invalid_argument("gp_rbf_mixture: lengthscales must be > 0");
  const Vec w = normalize_rbf_weights(raw_weights);
  // Embedding size: power of two covering 2 * (length - 1) plus kernel decay.
  const double reach = 10.0 * lengthscales.maxCoeff();
  Eigen::Index m = 1;
  while (m < 2 * (length + static_cast<Eigen::Index>(reach))) m <<= 1;
  std::vector<double> row(m);
  for (Eigen::Index j = 0; j < m; ++j)
    row[j] = rbf_mixture_kernel(static_cast<double>(std::min(j, m - j)), lengthscales, w);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> lam;
  fft.fwd(lam, row);
  double total = 0.0, clipped = 0.0;
  std::vector<std::complex<double>> coef(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double l = lam[j].real();
    total += std::abs(l);
    if (l < 0) {
      clipped += -l;
      l = 0.0;
    }
    const double amp = std::sqrt(l / static_cast<double>(m));
    coef[j] = {amp * rng.normal(), amp * rng.normal()};
  }
  std::vector<std::complex<double>> field;
  fft.fwd(field, coef);
  GpSample out{Vec(length), total > 0 ? clipped / total : 0.0};
  for (Eigen::Index t = 0; t < length; ++t) out.x(t) = field[t].real();
  return out;
}

Mat make_token_table(int count, int dim, Rng& rng) {
  if (count < 1 || dim < 1) throw std::invalid_argument("make_token_table: empty table");
  Mat table(count, dim);
  for (int i = 0; i < count; ++i) {
    for (;;) {
      Vec v = rng.normal_vector(dim);
      const double n = v.norm();
      if (!(n > 1e-8)) continue;
      v /= n;
      bool distinct = true;
      for (int j = 0; j < i && distinct; ++j)
        distinct = (table.row(j).transpose() - v).norm() > 1e-6;
      if (!distinct) continue;
      table.row(i) = v.transpose();
      break;
    }
  }
  return table;
}

Episode selective_copy_episode(const Mat& tokens, Rng& rng, const SelectiveCopyLayout& layout) {
  if (tokens.rows() != layout.table_size())
    throw std::invalid_argument("selective_copy_episode: token table has wrong size");
  const int steps = layout.length();
  const int input_phase = layout.per_episode + layout.distractors;
  Episode ep{Mat::Zero(steps, tokens.cols()), Mat::Zero(steps, tokens.cols()),
             std::vector<Phase>(steps), std::vector<int>(steps), std::vector<int>(steps, -1)};
  std::vector<int> slots(input_phase);
  for (int i = 0; i < input_phase; ++i) slots[i] = i < layout.per_episode ? 1 : 0;
  rng.shuffle(slots);
  std::vector<int> informative;
  for (int t = 0; t < input_phase; ++t) {
    int id;
    if (slots[t]) {
      id = static_cast<int>(rng.below(layout.informative));
      informative.push_back(id);
      ep.phases[t] = Phase::Informative;
    } else {
      id = layout.uninformative_id();
      ep.phases[t] = Phase::Uninformative;
    }
    ep.input_ids[t] = id;
    ep.inputs.row(t) = tokens.row(id);
  }
  for (int k = 0; k < layout.per_episode; ++k) {
    const int t = input_phase + k;
    ep.input_ids[t] = layout.write_id();
    ep.inputs.row(t) = tokens.row(layout.write_id());
    ep.phases[t] = Phase::Write;
    ep.target_ids[t] = informative[k];
    ep.targets.row(t) = tokens.row(informative[k]);
  }
  return ep;
}

Episode assoc_recall_episode(const Mat& tokens, Rng& rng, const AssocRecallLayout& layout) {
  if (tokens.rows() != layout.table_size())
    throw std::invalid_argument("assoc_recall_episode: token table has wrong size");
  if (layout.length < 4 || layout.length % 2 != 0)
    throw std::invalid_argument("assoc_recall_episode: length must be even and >= 4");
  const int steps = layout.length;
  const int set = layout.set_size;
  Episode ep{Mat::Zero(steps, tokens.cols()), Mat::Zero(steps, tokens.cols()),
             std::vector<Phase>(steps), std::vector<int>(steps), std::vector<int>(steps, -1)};
  for (int t = 0; t < steps - 2; ++t) {
    const bool key = t % 2 == 0;
    const int id = static_cast<int>(rng.below(set)) + (key ? 0 : set);
    ep.input_ids[t] = id;
    ep.phases[t] = key ? Phase::Key : Phase::Value;
  }
  // Query token: an A token that already appeared; rejection sampling.
  int query = -1;
  for (int attempt = 0; attempt < layout.max_retries && query < 0; ++attempt) {
    const int cand = static_cast<int>(rng.below(set));
    for (int t = 0; t < steps - 2; t += 2)
      if (ep.input_ids[t] == cand) query = cand;
  }
  if (query < 0) throw std::runtime_error("assoc_recall_episode: query rejection sampling exhausted");
  ep.input_ids[steps - 2] = query;
  ep.phases[steps - 2] = Phase::Key;
  ep.input_ids[steps - 1] = layout.write_id();
  ep.phases[steps - 1] = Phase::Write;
  int answer = -1;
  for (int t = steps - 4; t >= 0 && answer < 0; t -= 2)
    if (ep.input_ids[t] == query) answer = ep.input_ids[t + 1];
  ep.target_ids[steps - 1] = answer;
  for (int t = 0; t < steps; ++t) ep.inputs.row(t) = tokens.row(ep.input_ids[t]);
  ep.targets.row(steps - 1) = tokens.row(answer);
  return ep;
}

}  // namespace hippozoo
