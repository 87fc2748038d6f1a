#include "hippozoo/cli.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>

namespace hippozoo::cli {

namespace {

struct Check {
  std::string name;
  std::function<double()> measure;  // returns the observed error
  double tolerance;
};

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

double legt_oracle_error() {
  const HippoSpec spec{Family::LegT, 16, 1.0};
  const double dt = 1e-3;
  const DiscreteLTI sys = discretize(make_hippo(spec), dt);
  SampledHistory h{0.0, dt, Vec(5001)};
  Vec s = Vec::Zero(spec.n);
  for (Eigen::Index i = 0; i < h.values.size(); ++i) {
    h.values(i) = std::sin(5.0 * i * dt);
    if (i + 1 < h.values.size()) s = step(sys, s, h.values(i));
  }
  // ZOH input on [t, t + dt) against linear interpolation: O(dt) agreement.
  return (s - project_history_oracle(h, spec, h.end_time())).cwiseAbs().maxCoeff();
}

double legendre_gram_error() {
  const OrthoBasis b = legendre_shifted(32);
  return (gram_matrix(b, gauss_legendre(64, 0.0, 1.0)) - Mat::Identity(32, 32)).cwiseAbs().maxCoeff();
}

double exp_inverse_error() {
  const Mat a = make_hippo({Family::LegS, 12, 1.0}).a;
  return (numkit::mat_exp(a, 0.7) * numkit::mat_exp(a, -0.7) - Mat::Identity(12, 12)).cwiseAbs().maxCoeff();
}

double zoh_closed_form_error() {
  const ContinuousLTI c = make_hippo({Family::LegS, 10, 2.0});
  const auto z = numkit::zoh_discretize(c.a, c.b, 0.3);
  const Vec expect = c.a.partialPivLu().solve((z.a_d - Mat::Identity(10, 10)) * c.b);
  return (z.b_d - expect).cwiseAbs().maxCoeff();
}

double arcsine_distance() {
  const OrthoBasis b = legendre_shifted(256);
  return arcsine_kolmogorov_distance(numkit::sym_eig(jacobi_matrix(b)).values, 0.0, 1.0);
}

double warp_equivalence_error() {
  // Constant salience g is the same system at timescale tau / g.
  const HippoSpec spec{Family::LegS, 16, 4.0};
  const double g = 0.6;
  const ContinuousLTI cont = make_hippo(spec);
  const DiscreteLTI plain = discretize(make_hippo({Family::LegS, 16, spec.timescale / g}), 1.0);
  Rng rng(11);
  Vec a = Vec::Zero(16), b = Vec::Zero(16);
  for (int t = 0; t < 50; ++t) {
    const double f = rng.normal();
    a = salience_step(cont, a, f, g, 1.0);
    b = step(plain, b, f);
  }
  return (a - b).cwiseAbs().maxCoeff();
}

double assoc_write_error() {
  AssocMemoryBank mem(6, legendre_shifted(16));
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Vec y(6);
    for (Eigen::Index i = 0; i < 6; ++i) y(i) = rng.normal();
    const double x = rng.uniform(0.0, 1.0);
    write(mem, x, y, 1.0, 0.0);
    worst = std::max(worst, (read(mem, x) - y).cwiseAbs().maxCoeff());
  }
  return worst;
}

double multiscale_vectorized_error() {
  double worst = 0.0;
  for (MsVariant v : {MsVariant::Basic, MsVariant::Jeffreys, MsVariant::Log}) {
    const MultiscaleSystem sys = build_multiscale(v, 4, 4, 10.0, 1e-3);
    const DiscreteLTI vz = discretize(vectorized_system(sys), 1.0);
    Mat s = Mat::Zero(4, 4);
    Vec vs = Vec::Zero(16);
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      const double f = rng.normal();
      s = ms_step(sys, s, f, 1.0);
      vs = vz.a_d * vs + vz.b_d * f;
      worst = std::max(worst, (Eigen::Map<const Vec>(s.data(), 16) - vs).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double rrr_full_rank_error() {
  Rng rng(9);
  ForecastStats st(5, 3);
  Mat mix(3, 5);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix(i) = rng.normal();
  for (int k = 0; k < 400; ++k) {
    Vec x(5), e(3);
    for (Eigen::Index i = 0; i < 5; ++i) x(i) = rng.normal();
    for (Eigen::Index i = 0; i < 3; ++i) e(i) = 0.1 * rng.normal();
    update_stats(st, x, mix * x + e);
  }
  const Mat ls = st.sxx.transpose().partialPivLu().solve(st.syx.transpose()).transpose();
  const RrrMap m = fit_rrr(st, 3, 0.0);
  const double tp = (m.t * m.px - m.t).cwiseAbs().maxCoeff();
  return std::max((m.t - ls).cwiseAbs().maxCoeff(), tp);
}

double q_min_eigenvalue() {
  Rng rng(2);
  Mat t(4, 7);
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = rng.normal();
  const HistoryMetric hm = history_metric(t, {Family::LegT, 7, 1.0}, Vec::LinSpaced(11, 0.0, 1.0), 2);
  return std::max(0.0, -numkit::sym_eig(hm.q).values.minCoeff());
}

double mlp_gradient_error() {
  Rng rng(4);
  nn::Mlp net({3, 5, 2}, {nn::Activation::Tanh, nn::Activation::Sigmoid}, rng, true);
  Vec x(3);
  x << 0.3, -0.7, 1.1;
  const Vec target = Vec::Constant(2, 0.25);
  nn::Mlp grads = net.zeros_like();
  nn::MlpTape tape;
  const Vec y = net.forward(x, &tape);
  net.backward(tape, y - target, grads);
  auto loss = [&] { return 0.5 * (net.forward(x) - target).squaredNorm(); };
  return nn::check_gradients(net.params(), grads.params(), loss).max_rel_error;
}

double checkpoint_roundtrip_error() {
  Rng rng(8);
  nn::Mlp a({4, 6, 1}, {nn::Activation::Softplus, nn::Activation::Identity}, rng);
  nn::Mlp b = a.zeros_like();
  const auto path = std::filesystem::temp_directory_path() / "hippozoo_verify.ckpt";
  nn::save_checkpoint(path.string(), a.params());
  nn::load_checkpoint(path.string(), b.params());
  std::filesystem::remove(path);
  double worst = 0.0;
  const nn::ParamList pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (Eigen::Index k = 0; k < pa[i].rows * pa[i].cols; ++k)
      worst = std::max(worst, std::abs(pa[i].data[k] - pb[i].data[k]));
  return worst;
}

}  // namespace

std::vector<PropertyResult> property_suite() {
  const std::vector<Check> checks{
      {"legendre_orthonormal", legendre_gram_error, 1e-10},
      {"legt_state_matches_projection_oracle", legt_oracle_error, 1e-2},
      {"mat_exp_inverse", exp_inverse_error, 1e-10},
      {"zoh_closed_form", zoh_closed_form_error, 1e-10},
      {"jacobi_arcsine_ks_M256", arcsine_distance, 0.05},
      {"salience_constant_g_is_rescaled_hippo", warp_equivalence_error, 1e-9},
      {"assoc_write_exact_eps0", assoc_write_error, 1e-12},
      {"multiscale_spectral_equals_vectorized", multiscale_vectorized_error, 1e-8},
      {"rrr_full_rank_equals_ls_and_preserves_T", rrr_full_rank_error, 1e-8},
      {"history_metric_psd", q_min_eigenvalue, 1e-10},
      {"mlp_gradient_check", mlp_gradient_error, 1e-4},
      {"checkpoint_roundtrip", checkpoint_roundtrip_error, 0.0},
  };
  std::vector<PropertyResult> out;
  for (const auto& c : checks) {
    try {
      const double e = c.measure();
      out.push_back({c.name, std::isfinite(e) && e <= c.tolerance, "error " + sci(e) + ", tol " + sci(c.tolerance)});
    } catch (const std::exception& ex) {
      out.push_back({c.name, false, ex.what()});
    }
  }
  return out;
}

}  // namespace hippozoo::cli
