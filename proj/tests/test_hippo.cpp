#include "doctest.h"
#include "oracles.hpp"

#include "hippozoo/hippo.hpp"

using namespace hippozoo;

namespace {

struct Run {
  Vec state;
  SampledHistory history;
};

Run drive(const HippoSpec& spec, const ContinuousLTI& sys, double dt, long steps, double omega) {
  const DiscreteLTI d = discretize(sys, dt);
  Run r{Vec::Zero(spec.n), {0.0, dt, Vec(steps + 1)}};
  for (long i = 0; i <= steps; ++i) r.history.values(i) = std::sin(omega * i * dt);
  for (long i = 0; i < steps; ++i) r.state = step(d, r.state, r.history.values(i));
  return r;
}

}  // namespace

TEST_CASE("Leg-T state matches the projection oracle") {
  const HippoSpec spec{Family::LegT, 16, 1.0};
  const Run r = drive(spec, make_hippo(spec), 1e-3, 3000, 5.0);
  const Vec c = project_history_oracle(r.history, spec, r.history.end_time());
  CHECK((r.state - c).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("Leg-T error shrinks with the step size") {
  const HippoSpec spec{Family::LegT, 8, 1.0};
  double prev = 1.0;
  for (double dt : {1e-2, 1e-3}) {
    const Run r = drive(spec, make_hippo(spec), dt, static_cast<long>(2.0 / dt), 3.0);
    const double e = (r.state - project_history_oracle(r.history, spec, r.history.end_time())).cwiseAbs().maxCoeff();
    CHECK(e < prev / 5.0);
    prev = e;
  }
}

TEST_CASE("Leg-S state matches the projection oracle") {
  const HippoSpec spec{Family::LegS, 16, 1.0};
  const Run r = drive(spec, make_hippo(spec), 1e-3, 50000, 5.0);
  const Vec c = project_history_oracle(r.history, spec, r.history.end_time());
  CHECK((r.state - c).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("tabulated Leg-T entry does not generate the window projection") {
  const HippoSpec spec{Family::LegT, 16, 1.0};
  for (int sign : {-1, 1}) {
    double err = 0.0;
    try {
      const Run r = drive(spec, legt_table_transcription(16, 1.0, sign), 1e-3, 3000, 5.0);
      err = (r.state - project_history_oracle(r.history, spec, r.history.end_time())).cwiseAbs().maxCoeff();
    } catch (const NumericError&) {
      err = INFINITY;
    }
    CHECK(err > 0.1);
  }
}

TEST_CASE("Leg-T generator structure") {
  const ContinuousLTI c = make_hippo({Family::LegT, 6, 2.0});
  for (int n = 0; n < 6; ++n) {
    CHECK(c.b(n) == doctest::Approx(std::sqrt(2.0 * n + 1) / 2.0));
    for (int k = 0; k < 6; ++k) {
      const double bb = std::sqrt((2.0 * n + 1) * (2.0 * k + 1));
      const double expect = (k <= n ? -bb : -bb * ((n + k) % 2 ? -1.0 : 1.0)) / 2.0;
      CHECK(c.a(n, k) == doctest::Approx(expect));
    }
  }
}

TEST_CASE("Leg-S generator is lower triangular with -(n+1) on the diagonal") {
  const ContinuousLTI c = make_hippo({Family::LegS, 8, 1.0});
  for (int n = 0; n < 8; ++n) {
    CHECK(c.a(n, n) == doctest::Approx(-(n + 1.0)));
    for (int k = n + 1; k < 8; ++k) CHECK(c.a(n, k) == 0.0);
  }
}

TEST_CASE("constant input over a full window reconstructs the constant") {
  const HippoSpec spec{Family::LegT, 12, 5.0};
  const DiscreteLTI d = discretize(make_hippo(spec), 0.01);
  Vec s = Vec::Zero(12);
  for (int i = 0; i < 2000; ++i) s = step(d, s, 1.5);
  CHECK(s(0) == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(s.tail(11).cwiseAbs().maxCoeff() < 1e-6);
  const Reconstruction rec = reconstruct(spec, s, Vec::LinSpaced(6, 0.0, 6.0));
  for (int i = 0; i < 6; ++i) {
    CHECK(rec.outside_window[i] == (i == 5 ? true : false));
    if (!rec.outside_window[i]) CHECK(rec.values(i) == doctest::Approx(1.5).epsilon(1e-5));
  }
}

TEST_CASE("basis_at_lag and measure density") {
  const HippoSpec legt{Family::LegT, 10, 4.0};
  const Vec at0 = basis_at_lag(legt, 0.0);
  for (int n = 0; n < 10; ++n) CHECK(at0(n) == doctest::Approx(std::sqrt(2.0 * n + 1)));
  const Vec mid = basis_at_lag(legt, 1.0);
  for (int n = 0; n < 10; ++n) CHECK(mid(n) == doctest::Approx(oracle::shifted_legendre(n, 0.25)));
  CHECK(oracle::simpson([&](double l) { return measure_density(legt, l); }, 0.0, 4.0) == doctest::Approx(1.0));
  const HippoSpec legs{Family::LegS, 10, 2.0};
  CHECK(oracle::simpson([&](double l) { return measure_density(legs, l); }, 0.0, 80.0) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("step_batch equals per-row stepping") {
  const DiscreteLTI d = discretize(make_hippo({Family::LegS, 6, 3.0}), 0.5);
  Mat states = Mat::Random(4, 6);
  Vec u(4);
  u << 0.1, -2.0, 0.0, 3.0;
  const Mat out = step_batch(d, states, u);
  for (int r = 0; r < 4; ++r)
    CHECK((out.row(r).transpose() - step(d, states.row(r).transpose(), u(r))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("hippo edge cases and errors") {
  CHECK_THROWS_AS(make_hippo({Family::LegT, 0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_hippo({Family::LegT, 4, 0.0}), std::invalid_argument);
  CHECK(parse_family("legt") == Family::LegT);
  CHECK(std::string(family_name(Family::LegS)) == "legs");
  CHECK_THROWS_AS(parse_family("fourier"), std::invalid_argument);
  const DiscreteLTI d = discretize(make_hippo({Family::LegT, 4, 1.0}), 0.1);
  CHECK_THROWS_AS(step(d, Vec::Zero(3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(step(d, Vec::Zero(4), INFINITY), NumericError);
  CHECK((step(d, Vec::Zero(4), 0.0)).isZero());
  SampledHistory short_history{0.0, 0.1, Vec::Zero(3)};
  CHECK_THROWS_AS(project_history_oracle(short_history, {Family::LegT, 4, 1.0}, 0.2), std::invalid_argument);
}
