#include "doctest.h"
#include "oracles.hpp"

#include "hippozoo/signals.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <set>

using namespace hippozoo;

TEST_CASE("Rng is deterministic and forks are independent") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  const Rng root(7);
  Rng f1 = root.fork(1), f1b = root.fork(1), f2 = root.fork(2);
  CHECK(f1.next() == f1b.next());
  CHECK(f1.next() != f2.next());
  // Forking does not advance the parent.
  Rng p(7), q(7);
  (void)p.fork(3);
  CHECK(p.next() == q.next());
  CHECK_THROWS_AS(p.below(0), std::invalid_argument);
}

TEST_CASE("Rng moments") {
  Rng rng(1);
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0, sn4 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    su += u;
    su2 += u * u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(su2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(sn4 / n == doctest::Approx(3.0).epsilon(0.05));

  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
}

TEST_CASE("band-limited noise has no energy above the cutoff") {
  Rng rng(3);
  const Eigen::Index n = 512;
  const double dt = 0.01, cutoff = 5.0;
  const Vec x = bandlimited_noise(n, dt, cutoff, rng);
  CHECK(std::abs(x.mean()) < 1e-12);
  CHECK(x.squaredNorm() / n == doctest::Approx(1.0).epsilon(1e-12));
  // Direct DFT, independent of the FFT path.
  double above = 0.0, below = 0.0;
  for (Eigen::Index k = 1; k <= n / 2; ++k) {
    std::complex<double> s = 0.0;
    for (Eigen::Index t = 0; t < n; ++t)
      s += x(t) * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
    const double freq = double(k) / (dt * double(n));
    (freq > cutoff ? above : below) += std::norm(s);
  }
  CHECK(above < 1e-18 * below);
  CHECK(below > 0.0);
  CHECK_THROWS_AS(bandlimited_noise(n, dt, 60.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(bandlimited_noise(1, dt, 1.0, rng), std::invalid_argument);
}

TEST_CASE("Wray-Green output equals a direct trapezoid convolution") {
  Rng rng(5);
  const WrayGreenParams p;
  const double dt = 0.5;
  const Vec f = rng.normal_vector(400);
  const Vec y = wray_green(f, dt, p);
  const int taps = static_cast<int>(std::lround(p.tau_max / dt));
  for (int t : {0, 1, 50, 99, 100, 101, 250, 399}) {
    // z(t) = int_0^tau_max mu(tau) f(t - tau) dtau, zero before the start.
    double z = 0.0;
    for (int j = 0; j <= taps; ++j) {
      const double fj = t - j >= 0 ? f(t - j) : 0.0;
      const double w = (j == 0 || j == taps) ? 0.5 : 1.0;
      z += w * dt * p.a / p.m * std::exp(-p.k * j * dt) * std::sin(p.m * j * dt) * fj;
    }
    CHECK(y(t) == doctest::Approx(p.alpha * z * z).epsilon(1e-12).scale(1e-300));
  }
  CHECK(p.mu(0.0) == 0.0);
  WrayGreenParams bad;
  bad.k = -1.0;
  CHECK_THROWS_AS(wray_green(f, dt, bad), std::invalid_argument);
}

TEST_CASE("OU mixture is stationary with unit variance") {
  const int trials = 400;
  double var0 = 0.0, var_end = 0.0;
  for (int s = 0; s < trials; ++s) {
    Rng rng(100 + s);
    const OuMixture ou = ou_mixture(200, 4, 2.0, 50.0, rng);
    var0 += ou.x(0) * ou.x(0);
    var_end += ou.x(199) * ou.x(199);
    for (Eigen::Index k = 0; k < ou.timescales.size(); ++k) {
      CHECK_UNARY(ou.timescales(k) >= 2.0);
      CHECK_UNARY(ou.timescales(k) <= 50.0);
    }
  }
  CHECK(var0 / trials == doctest::Approx(1.0).epsilon(0.15));
  CHECK(var_end / trials == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("single OU component has exponential autocorrelation") {
  Rng rng(9);
  const double tau = 20.0;
  const OuMixture ou = ou_mixture(400000, 1, tau, tau, rng);
  const Vec& x = ou.x;
  auto acf = [&](Eigen::Index lag) {
    const Eigen::Index n = x.size() - lag;
    return x.head(n).dot(x.tail(n)) / double(n);
  };
  const double c0 = acf(0);
  for (Eigen::Index lag : {5, 20, 40}) CHECK(acf(lag) / c0 == doctest::Approx(std::exp(-lag / tau)).epsilon(0.05));
  CHECK_THROWS_AS(ou_mixture(10, 0, 1.0, 2.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(ou_mixture(10, 2, 3.0, 2.0, rng), std::invalid_argument);
}

TEST_CASE("GP samples follow the RBF mixture covariance") {
  Vec ls(2), raw(2);
  ls << 2.0, 8.0;
  raw << 1.0, 2.0;
  const Vec w = normalize_rbf_weights(raw);
  CHECK(w.squaredNorm() == doctest::Approx(1.0));
  CHECK(rbf_mixture_kernel(0.0, ls, w) == doctest::Approx(1.0));

  const int samples = 600;
  const Eigen::Index n = 64;
  std::vector<double> cov(5, 0.0);
  for (int s = 0; s < samples; ++s) {
    Rng rng(1000 + s);
    const GpSample g = gp_rbf_mixture(n, ls, raw, rng);
    CHECK(g.floored_mass < 1e-6);
    for (int lag = 0; lag < 5; ++lag) cov[lag] += g.x(10) * g.x(10 + 2 * lag);
  }
  for (int lag = 0; lag < 5; ++lag)
    CHECK(cov[lag] / samples == doctest::Approx(rbf_mixture_kernel(2.0 * lag, ls, w)).epsilon(0.15).scale(0.3));
  Rng rng(0);
  CHECK_THROWS_AS(gp_rbf_mixture(8, ls, Vec::Ones(3), rng), std::invalid_argument);
}

TEST_CASE("token table rows are distinct unit vectors") {
  Rng rng(2);
  const Mat t = make_token_table(25, 6, rng);
  for (int i = 0; i < 25; ++i) {
    CHECK(t.row(i).norm() == doctest::Approx(1.0).epsilon(1e-14));
    for (int j = 0; j < i; ++j) CHECK((t.row(i) - t.row(j)).norm() > 1e-6);
  }
  CHECK_THROWS_AS(make_token_table(0, 3, rng), std::invalid_argument);
}

TEST_CASE("selective copy episodes copy the informative tokens in order") {
  Rng rng(4);
  const SelectiveCopyLayout layout;
  const Mat tokens = make_token_table(layout.table_size(), 8, rng);
  for (int e = 0; e < 20; ++e) {
    const Episode ep = selective_copy_episode(tokens, rng, layout);
    REQUIRE(ep.length() == layout.length());
    std::vector<int> seen;
    int distractors = 0;
    for (int t = 0; t < layout.per_episode + layout.distractors; ++t) {
      if (ep.phases[t] == Phase::Informative) {
        CHECK(ep.input_ids[t] < layout.informative);
        seen.push_back(ep.input_ids[t]);
      } else {
        CHECK(ep.input_ids[t] == layout.uninformative_id());
        ++distractors;
      }
      CHECK(ep.target_ids[t] == -1);
      CHECK(ep.targets.row(t).isZero());
    }
    CHECK(distractors == layout.distractors);
    REQUIRE(seen.size() == static_cast<std::size_t>(layout.per_episode));
    for (int k = 0; k < layout.per_episode; ++k) {
      const int t = layout.per_episode + layout.distractors + k;
      CHECK(ep.phases[t] == Phase::Write);
      CHECK(ep.input_ids[t] == layout.write_id());
      CHECK(ep.target_ids[t] == seen[k]);
      CHECK(ep.targets.row(t) == tokens.row(seen[k]));
    }
    for (int t = 0; t < ep.length(); ++t) CHECK(ep.inputs.row(t) == tokens.row(ep.input_ids[t]));
  }
  CHECK_THROWS_AS(selective_copy_episode(Mat::Zero(3, 8), rng, layout), std::invalid_argument);
}

TEST_CASE("assoc recall episodes answer with the latest matching value") {
  Rng rng(6);
  AssocRecallLayout layout;
  layout.set_size = 4;
  layout.length = 12;
  const Mat tokens = make_token_table(layout.table_size(), 8, rng);
  for (int e = 0; e < 50; ++e) {
    const Episode ep = assoc_recall_episode(tokens, rng, layout);
    const int n = layout.length;
    for (int t = 0; t < n - 2; ++t) {
      if (t % 2 == 0) {
        CHECK(ep.phases[t] == Phase::Key);
        CHECK(ep.input_ids[t] < layout.set_size);
      } else {
        CHECK(ep.phases[t] == Phase::Value);
        CHECK(ep.input_ids[t] >= layout.set_size);
        CHECK(ep.input_ids[t] < 2 * layout.set_size);
      }
    }
    const int q = ep.input_ids[n - 2];
    CHECK(ep.input_ids[n - 1] == layout.write_id());
    int expect = -1;
    for (int t = 0; t < n - 2; t += 2)
      if (ep.input_ids[t] == q) expect = ep.input_ids[t + 1];
    CHECK(expect >= 0);
    CHECK(ep.target_ids[n - 1] == expect);
    for (int t = 0; t < n - 1; ++t) CHECK(ep.target_ids[t] == -1);
  }
}

TEST_CASE("assoc recall sampler errors") {
  Rng rng(8);
  AssocRecallLayout layout;
  const Mat tokens = make_token_table(layout.table_size(), 4, rng);
  layout.max_retries = 0;
  CHECK_THROWS_AS(assoc_recall_episode(tokens, rng, layout), std::runtime_error);
  layout.max_retries = 1000;
  layout.length = 7;
  CHECK_THROWS_AS(assoc_recall_episode(tokens, rng, layout), std::invalid_argument);
  layout.length = 12;
  CHECK_THROWS_AS(assoc_recall_episode(Mat::Zero(5, 4), rng, layout), std::invalid_argument);
}
