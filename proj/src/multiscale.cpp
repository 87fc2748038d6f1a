#include "hippozoo/multiscale.hpp"

#include "hippozoo/signals.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace hippozoo {

const char* variant_name(MsVariant v) {
  switch (v) {
    case MsVariant::Basic: return "basic";
    case MsVariant::Jeffreys: return "jeffreys";
    case MsVariant::Log: return "log";
  }
  return "?";
}

MsVariant parse_variant(const std::string& name) {
  if (name == "basic") return MsVariant::Basic;
  if (name == "jeffreys") return MsVariant::Jeffreys;
  if (name == "log") return MsVariant::Log;
  throw std::invalid_argument("unknown multiscale variant: " + name);
}

namespace {

OrthoBasis scale_basis_for(MsVariant variant, int m, double eps) {
  switch (variant) {
    case MsVariant::Basic: return stieltjes_basis(Weight::uniform(), 0.0, 1.0, m);
    case MsVariant::Jeffreys: return stieltjes_basis(Weight::jeffreys(), eps, 1.0, m);
    case MsVariant::Log: return stieltjes_basis(Weight::uniform(), std::log(eps), 0.0, m);
  }
  throw std::invalid_argument("scale_basis_for: bad variant");
}

}  // namespace

MultiscaleSystem build_multiscale(MsVariant variant, int n, int m, double tau0, double eps) {
  if (n < 1 || m < 1) throw std::invalid_argument("build_multiscale: N and M must be >= 1");
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("build_multiscale: eps must be in (0, 1)");
  if (!(tau0 > 0)) throw std::invalid_argument("build_multiscale: tau0 must be > 0");

  MultiscaleSystem sys{variant, n, m, tau0, eps, make_hippo({Family::LegT, n, tau0}),
                       scale_basis_for(variant, m, eps), {}, {}, {}};
  const Mat jac = jacobi_matrix(sys.scale_basis);
  if (variant == MsVariant::Log) {
    const numkit::SymEig je = numkit::sym_eig(jac);
    sys.coupling = numkit::sym_apply(je, [](double x) { return std::exp(x); });
    sys.coupling = 0.5 * (sys.coupling + sys.coupling.transpose()).eval();
  } else {
    sys.coupling = jac;
  }
  // psi_0 is the constant 1/sqrt(mass) (times its orientation sign).
  const double psi0 = eval_basis(sys.scale_basis, 0.5 * (sys.scale_basis.lo() + sys.scale_basis.hi()))(0);
  sys.r = sys.coupling.col(0) / psi0;
  sys.spectral = numkit::sym_eig(sys.coupling);
  return sys;
}

ContinuousLTI vectorized_system(const MultiscaleSystem& sys) {
  const int n = sys.n, m = sys.m;
  ContinuousLTI out{Mat::Zero(n * m, n * m), Vec::Zero(n * m)};
  // vec(A S K) = (K^T kron A) vec(S); vec(b r^T) = r kron b.
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i)
      out.a.block(j * n, i * n, n, n) = sys.coupling(i, j) * sys.hippo.a;
    out.b.segment(j * n, n) = sys.r(j) * sys.hippo.b;
  }
  return out;
}

MultiscaleStepper::MultiscaleStepper(const MultiscaleSystem& sys, double step)
    : dt(step), v(sys.spectral.vectors), b_d(sys.n, sys.m) {
  const Vec rt = v.transpose() * sys.r;
  a_d.reserve(sys.m);
  for (int j = 0; j < sys.m; ++j) {
    const double lam = sys.spectral.values(j);
    auto z = numkit::zoh_discretize(Mat(lam * sys.hippo.a), Vec(rt(j) * sys.hippo.b), dt);
    a_d.push_back(std::move(z.a_d));
    b_d.col(j) = z.b_d;
  }
}

void MultiscaleStepper::advance(Mat& st, double f) const {
  for (Eigen::Index j = 0; j < st.cols(); ++j)
    st.col(j) = (a_d[j] * st.col(j) + b_d.col(j) * f).eval();
}

Mat ms_step(const MultiscaleSystem& sys, const Mat& s, double f, double dt) {
  if (s.rows() != sys.n || s.cols() != sys.m) throw std::invalid_argument("ms_step: state shape mismatch");
  const MultiscaleStepper stepper(sys, dt);
  Mat st = stepper.to_spectral(s);
  stepper.advance(st, f);
  Mat out = stepper.from_spectral(st);
  numkit::require_finite(out, "ms_step");
  return out;
}

double query_scale(const MultiscaleSystem& sys, double horizon) {
  if (!(horizon > 0)) throw std::invalid_argument("query: horizon must be > 0");
  const double g = sys.tau0 / horizon;
  if (sys.variant == MsVariant::Basic) return std::clamp(g, 0.0, 1.0);
  const double gc = std::clamp(g, sys.eps, 1.0);
  return sys.variant == MsVariant::Log ? std::log(gc) : gc;
}

Vec query(const MultiscaleSystem& sys, const Mat& s, double horizon) {
  return s * eval_basis(sys.scale_basis, query_scale(sys, horizon));
}

void MultiscaleConfig::validate() const {
  if (threads < 0) throw std::invalid_argument("multiscale: threads must be >= 0");
  if (trials < 1) throw std::invalid_argument("multiscale: trials must be >= 1");
  if (length < 2) throw std::invalid_argument("multiscale: length must be >= 2");
  if (ou_components < 1) throw std::invalid_argument("multiscale: ou_components must be >= 1");
  if (!(ou_tau_lo > 0 && ou_tau_hi >= ou_tau_lo)) throw std::invalid_argument("multiscale: bad OU timescale range");
  if (n < 1 || m < 1) throw std::invalid_argument("multiscale: n and m must be >= 1");
  if (!(tau0 > 0 && dt > 0)) throw std::invalid_argument("multiscale: tau0 and dt must be > 0");
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("multiscale: eps must be in (0, 1)");
  if (horizon_count < 1 || grid_points < 2) throw std::invalid_argument("multiscale: need horizons and >= 2 grid points");
  for (double b : baselines)
    if (!(b > 0)) throw std::invalid_argument("multiscale: baseline timescales must be > 0");
  for (double h : horizons())
    if (h > dt * static_cast<double>(length - 1))
      throw std::invalid_argument("multiscale: horizon exceeds the trajectory");
}

std::vector<double> MultiscaleConfig::horizons() const {
  std::vector<double> out;
  for (int k = 0; k < horizon_count; ++k) out.push_back(std::pow(10.0, horizon_lo_exp + horizon_step * k));
  return out;
}

Vec history_on_grid(const Vec& x, double horizon, int points) {
  const double end = static_cast<double>(x.size() - 1);
  Vec out(points);
  for (int i = 0; i < points; ++i) {
    const double s = static_cast<double>(i) / (points - 1);
    const double t = end - s * horizon;
    if (t < 0) throw std::invalid_argument("history_on_grid: horizon reaches before the start");
    const auto k = std::min(static_cast<Eigen::Index>(std::floor(t)), x.size() - 2);
    const double w = t - static_cast<double>(k);
    out(i) = (1.0 - w) * x(k) + w * x(k + 1);
  }
  return out;
}

Vec legendre_on_grid(const Vec& c, int points) {
  const OrthoBasis leg = legendre_shifted(static_cast<int>(c.size()));
  Vec out(points);
  for (int i = 0; i < points; ++i) out(i) = eval_basis(leg, static_cast<double>(i) / (points - 1)).dot(c);
  return out;
}

namespace {

/// Reconstruction of a fixed-window Leg-T state over the last L: zero beyond its window.
Vec baseline_on_grid(const OrthoBasis& leg, const Vec& c, double tau, double horizon, int points) {
  Vec out(points);
  for (int i = 0; i < points; ++i) {
    const double s = static_cast<double>(i) / (points - 1) * horizon / tau;
    out(i) = s <= 1.0 ? eval_basis(leg, s).dot(c) : 0.0;
  }
  return out;
}

std::string baseline_name(double tau) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "legt_%.0f", tau);
  return buf;
}

}  // namespace

MultiscaleResult run_multiscale(const MultiscaleConfig& cfg) {
  cfg.validate();
  const std::vector<double> horizons = cfg.horizons();
  const int points = cfg.grid_points;
  const OrthoBasis leg = legendre_shifted(cfg.n);

  std::vector<MultiscaleSystem> systems;
  std::vector<MultiscaleStepper> steppers;
  for (MsVariant v : cfg.variants) {
    systems.push_back(build_multiscale(v, cfg.n, cfg.m, cfg.tau0, cfg.eps));
    steppers.emplace_back(systems.back(), cfg.dt);
  }
  std::vector<DiscreteLTI> singles;
  for (double tau : cfg.baselines) singles.push_back(discretize(make_hippo({Family::LegT, cfg.n, tau}), cfg.dt));

  std::vector<std::string> names;
  for (MsVariant v : cfg.variants) names.push_back(std::string("ms_") + variant_name(v));
  for (double tau : cfg.baselines) names.push_back(baseline_name(tau));
  const std::size_t n_sys = names.size();

  // mse[h][system][trial]
  std::vector<std::vector<std::vector<double>>> mse(
      horizons.size(), std::vector<std::vector<double>>(n_sys, std::vector<double>(cfg.trials)));
  MultiscaleResult result;
  const Rng root(cfg.seed);

  auto run_trial = [&](int trial) {
    Rng rng = root.fork(static_cast<std::uint64_t>(trial));
    const Vec x = ou_mixture(cfg.length, cfg.ou_components, cfg.ou_tau_lo, cfg.ou_tau_hi, rng).x;

    std::vector<Mat> ms_states;
    for (const auto& st : steppers) {
      Mat s = Mat::Zero(cfg.n, cfg.m);
      for (Eigen::Index t = 0; t < x.size(); ++t) st.advance(s, x(t));
      numkit::require_finite(s, "run_multiscale");
      ms_states.push_back(st.from_spectral(s));
    }
    std::vector<Vec> single_states;
    for (const auto& d : singles) {
      Vec s = Vec::Zero(cfg.n);
      for (Eigen::Index t = 0; t < x.size(); ++t) s = d.a_d * s + d.b_d * x(t);
      single_states.push_back(std::move(s));
    }

    auto reconstructions = [&](double L) {
      std::vector<Vec> rec;
      for (std::size_t k = 0; k < systems.size(); ++k)
        rec.push_back(legendre_on_grid(query(systems[k], ms_states[k], L), points));
      for (std::size_t k = 0; k < singles.size(); ++k)
        rec.push_back(baseline_on_grid(leg, single_states[k], cfg.baselines[k], L, points));
      return rec;
    };

    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const Vec truth = history_on_grid(x, horizons[h], points);
      const auto rec = reconstructions(horizons[h]);
      for (std::size_t k = 0; k < n_sys; ++k) mse[h][k][trial] = (rec[k] - truth).squaredNorm() / points;
    }

    if (trial == 0) {
      for (double L : cfg.dump_horizons) {
        if (L > static_cast<double>(x.size() - 1)) continue;
        MultiscaleDump dump{L, names, Mat(points, 3 + n_sys)};
        const Vec truth = history_on_grid(x, L, points);
        const auto rec = reconstructions(L);
        for (int i = 0; i < points; ++i) {
          const double s = static_cast<double>(i) / (points - 1);
          dump.table(i, 0) = s;
          dump.table(i, 1) = static_cast<double>(x.size() - 1) - s * L;
          dump.table(i, 2) = truth(i);
          for (std::size_t k = 0; k < n_sys; ++k) dump.table(i, 3 + k) = rec[k](i);
        }
        result.dumps.push_back(std::move(dump));
      }
    }
  };

  // Trials are independent streams; results land in per-trial slots.
  const int workers = std::clamp(cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency()),
                                 1, cfg.trials);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int trial = next++; trial < cfg.trials; trial = next++) {
      try {
        run_trial(trial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t h = 0; h < horizons.size(); ++h) {
    for (std::size_t k = 0; k < n_sys; ++k) {
      const auto& v = mse[h][k];
      double mean = 0.0;
      for (double e : v) mean += e;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double e : v) var += (e - mean) * (e - mean);
      const double sem = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
      result.rows.push_back({horizons[h], names[k], mean, sem});
    }
  }
  return result;
}

}  // namespace hippozoo
