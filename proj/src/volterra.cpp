#include "hippozoo/volterra.hpp"

#include <cmath>
#include <stdexcept>

namespace hippozoo {

const char* readout_name(ReadoutKind kind) {
  switch (kind) {
    case ReadoutKind::Linear: return "linear";
    case ReadoutKind::Quadratic: return "quadratic";
    case ReadoutKind::Mlp: return "mlp";
  }
  return "?";
}

VolterraReadout VolterraReadout::linear(int n) {
  VolterraReadout r;
  r.kind = ReadoutKind::Linear;
  r.beta1 = Vec::Zero(n);
  return r;
}

VolterraReadout VolterraReadout::quadratic(int n) {
  VolterraReadout r = linear(n);
  r.kind = ReadoutKind::Quadratic;
  r.beta2 = Mat::Zero(n, n);
  return r;
}

VolterraReadout VolterraReadout::make_mlp(int n, int hidden, Rng& rng) {
  VolterraReadout r;
  r.kind = ReadoutKind::Mlp;
  r.mlp = nn::Mlp({n, hidden, 1}, {nn::Activation::Tanh, nn::Activation::Identity}, rng);
  return r;
}

double VolterraReadout::operator()(const Vec& s) const {
  switch (kind) {
    case ReadoutKind::Linear: return beta0(0) + s.dot(beta1);
    case ReadoutKind::Quadratic: return beta0(0) + s.dot(beta1) + s.dot(beta2 * s);
    case ReadoutKind::Mlp: return mlp.forward(s)(0);
  }
  return 0.0;
}

VolterraReadout VolterraReadout::zeros_like() const {
  VolterraReadout z = *this;
  nn::zero(z.params());
  return z;
}

nn::ParamList VolterraReadout::params() {
  if (kind == ReadoutKind::Mlp) return mlp.params();
  nn::ParamList out{nn::param(beta0), nn::param(beta1)};
  if (kind == ReadoutKind::Quadratic) out.push_back(nn::param(beta2));
  return out;
}

void readout_grad(const VolterraReadout& r, const Vec& s, double residual, VolterraReadout& g) {
  const double d = 2.0 * residual;
  if (r.kind == ReadoutKind::Mlp) {
    nn::MlpTape tape;
    r.mlp.forward(s, &tape);
    r.mlp.backward(tape, Vec::Constant(1, d), g.mlp);
    return;
  }
  g.beta0(0) += d;
  g.beta1 += d * s;
  if (r.kind == ReadoutKind::Quadratic) g.beta2.noalias() += d * s * s.transpose();
}

Mat infer_kernel(const Mat& beta2, const HippoSpec& spec, const Vec& lags, double dt) {
  if (beta2.rows() != spec.n || beta2.cols() != spec.n)
    throw std::invalid_argument("infer_kernel: beta2 must be N x N");
  const OrthoBasis legendre = legendre_shifted(spec.n);
  Mat phi(lags.size(), spec.n);
  for (Eigen::Index i = 0; i < lags.size(); ++i) {
    const double p = dt / spec.timescale * std::exp(-lags(i) / spec.timescale);
    phi.row(i) = p * basis_at_lag(spec, legendre, lags(i)).transpose();
  }
  const Mat sym = 0.5 * (beta2 + beta2.transpose());
  return phi * sym * phi.transpose();
}

Mat wray_green_kernel(const WrayGreenParams& params, const Vec& lags) {
  Vec mu(lags.size());
  for (Eigen::Index i = 0; i < lags.size(); ++i) mu(i) = params.mu(lags(i));
  return params.alpha * mu * mu.transpose();
}

double matrix_correlation(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix_correlation: shape mismatch");
  const Eigen::ArrayXd x = a.reshaped().array() - a.mean();
  const Eigen::ArrayXd y = b.reshaped().array() - b.mean();
  const double den = std::sqrt((x * x).sum() * (y * y).sum());
  if (!(den > 0)) return 0.0;
  return (x * y).sum() / den;
}

void VolterraConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("volterra: T must be >= 1");
  if (!(dt > 0)) throw std::invalid_argument("volterra: dt must be > 0");
  if (!(cutoff > 0) || cutoff >= 0.5 / dt) throw std::invalid_argument("volterra: cutoff must be in (0, Nyquist)");
  if (n < 1) throw std::invalid_argument("volterra: N must be >= 1");
  if (!(alpha > 0)) throw std::invalid_argument("volterra: alpha must be > 0");
  if (!(lr_linear >= 0 && lr_quad >= 0 && lr_mlp >= 0)) throw std::invalid_argument("volterra: learning rates must be >= 0");
  if (mlp_hidden < 1) throw std::invalid_argument("volterra: mlp_hidden must be >= 1");
  if (log_every < 1) throw std::invalid_argument("volterra: log_every must be >= 1");
  if (trailing < 1) throw std::invalid_argument("volterra: trailing must be >= 1");
  if (kernel_size < 2) throw std::invalid_argument("volterra: kernel_size must be >= 2");
  if (!(wg_dt > 0)) throw std::invalid_argument("volterra: wg_dt must be > 0");
}

VolterraResult run_volterra(const VolterraConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng signal_rng = root.fork(1);
  Rng init_rng = root.fork(2);
  const Vec f = bandlimited_noise(cfg.steps < 2 ? 2 : cfg.steps, cfg.dt, cfg.cutoff, signal_rng);
  const Vec y = wray_green(f, cfg.wg_dt, cfg.wg);

  const HippoSpec spec{Family::LegS, cfg.n, cfg.alpha};
  const DiscreteLTI sys = discretize(make_hippo(spec), cfg.dt);

  VolterraReadout models[3] = {VolterraReadout::linear(cfg.n), VolterraReadout::quadratic(cfg.n),
                               VolterraReadout::make_mlp(cfg.n, cfg.mlp_hidden, init_rng)};
  VolterraReadout grads[3] = {models[0].zeros_like(), models[1].zeros_like(), models[2].zeros_like()};
  nn::ParamList model_params[3] = {models[0].params(), models[1].params(), models[2].params()};
  nn::ParamList grad_params[3] = {grads[0].params(), grads[1].params(), grads[2].params()};
  const double lrs[3] = {cfg.lr_linear, cfg.lr_quad, cfg.lr_mlp};

  VolterraResult out;
  const long rows = (cfg.steps + cfg.log_every - 1) / cfg.log_every;
  out.cumulative.resize(rows, 4);
  out.trailing_mse = Vec::Zero(3);
  const long trailing_from = std::max(0L, cfg.steps - cfg.trailing);
  double cum[3] = {0, 0, 0};
  Vec s = Vec::Zero(cfg.n);
  long row = 0;
  for (long t = 0; t < cfg.steps; ++t) {
    s = step(sys, s, f(t));
    for (int k = 0; k < 3; ++k) {
      const double residual = models[k](s) - y(t);
      const double err = residual * residual;
      if (!std::isfinite(err)) throw NumericError(std::string("volterra: ") + readout_name(models[k].kind) + " readout diverged");
      cum[k] += err;
      if (t >= trailing_from) out.trailing_mse(k) += err;
      nn::zero(grad_params[k]);
      readout_grad(models[k], s, residual, grads[k]);
      nn::sgd_step(model_params[k], grad_params[k], lrs[k]);
    }
    if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.steps) {
      out.cumulative.row(row++) << static_cast<double>(t + 1), cum[0], cum[1], cum[2];
    }
  }
  out.trailing_mse /= static_cast<double>(cfg.steps - trailing_from);

  Vec lags(cfg.kernel_size), sample_lags(cfg.kernel_size);
  for (int i = 0; i < cfg.kernel_size; ++i) {
    lags(i) = i * cfg.dt;
    sample_lags(i) = i * cfg.wg_dt;
  }
  out.inferred_kernel = infer_kernel(models[1].beta2, spec, lags, cfg.dt);
  out.true_kernel = wray_green_kernel(cfg.wg, sample_lags);
  out.kernel_correlation = matrix_correlation(out.inferred_kernel, out.true_kernel);
  out.quadratic = models[1];
  return out;
}

}  // namespace hippozoo
