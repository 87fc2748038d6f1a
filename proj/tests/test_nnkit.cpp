#include "doctest.h"

#include "hippozoo/nnkit.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace hippozoo;
using nn::Activation;

namespace {

double mlp_grad_error(const std::vector<int>& widths, const std::vector<Activation>& acts, bool residual,
                      std::uint64_t seed) {
  Rng rng(seed);
  nn::Mlp net(widths, acts, rng, residual, 1.7);
  const Vec x = rng.normal_vector(widths.front());
  const Vec target = rng.normal_vector(widths.back());
  nn::Mlp grads = net.zeros_like();
  nn::MlpTape tape;
  const Vec y = net.forward(x, &tape);
  net.backward(tape, y - target, grads);
  auto loss = [&] { return 0.5 * (net.forward(x) - target).squaredNorm(); };
  return nn::check_gradients(net.params(), grads.params(), loss).max_rel_error;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hippozoo_test_" + name);
}

}  // namespace

TEST_CASE("activation values and derivatives") {
  Vec pre(5);
  pre << -30.0, -1.2, 0.0, 0.7, 40.0;
  CHECK(nn::softplus(40.0) == doctest::Approx(40.0));
  CHECK(nn::softplus(-40.0) > 0.0);
  CHECK(nn::softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(nn::sigmoid(0.0) == 0.5);
  const double h = 1e-6;
  for (Activation a : {Activation::Identity, Activation::Tanh, Activation::Sigmoid, Activation::Softplus,
                       Activation::ScaledSigmoid}) {
    const Vec post = nn::activate(a, pre, 1.7);
    const Vec d = nn::activate_derivative(a, pre, post, 1.7);
    const Vec fd = (nn::activate(a, (pre.array() + h).matrix(), 1.7) - nn::activate(a, (pre.array() - h).matrix(), 1.7)) /
                   (2 * h);
    CHECK((d - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
  const Vec g = nn::activate(Activation::ScaledSigmoid, pre, 1.7);
  CHECK(g.maxCoeff() <= 1.7);
  CHECK(g.minCoeff() >= 0.0);
  CHECK(nn::parse_activation("softplus") == Activation::Softplus);
  CHECK_THROWS_AS(nn::parse_activation("relu6"), std::invalid_argument);
}

TEST_CASE("MLP gradients pass finite-difference checks for every activation") {
  for (Activation a : {Activation::Identity, Activation::Tanh, Activation::Sigmoid, Activation::Softplus,
                       Activation::ScaledSigmoid}) {
    CAPTURE(static_cast<int>(a));
    CHECK(mlp_grad_error({4, 6, 3}, {a, Activation::Identity}, false, 1) < 1e-4);
    CHECK(mlp_grad_error({4, 6, 3}, {Activation::Tanh, a}, true, 2) < 1e-4);
  }
  CHECK(mlp_grad_error({3, 8, 8, 5, 2}, {Activation::Softplus, Activation::Tanh, Activation::Sigmoid, Activation::Identity},
                       true, 3) < 1e-4);
  CHECK(mlp_grad_error({5, 1}, {Activation::Identity}, false, 4) < 1e-4);
}

TEST_CASE("input gradient from backward matches finite differences") {
  Rng rng(11);
  nn::Mlp net({3, 7, 2}, {Activation::Tanh, Activation::Sigmoid}, rng, true);
  Vec x = rng.normal_vector(3);
  const Vec w = rng.normal_vector(2);
  nn::Mlp grads = net.zeros_like();
  nn::MlpTape tape;
  net.forward(x, &tape);
  const Vec dx = net.backward(tape, w, grads);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    CHECK(dx(i) == doctest::Approx((w.dot(net.forward(xp)) - w.dot(net.forward(xm))) / (2 * h)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(net.backward(tape, w, grads), std::logic_error);
}

TEST_CASE("residual skip is a linear map from the input") {
  Rng rng(3);
  nn::Mlp net({2, 4, 2}, {Activation::Tanh, Activation::Identity}, rng, true);
  CHECK(net.skip().rows() == 2);
  CHECK(net.skip().cols() == 2);
  const Vec x = rng.normal_vector(2);
  const Vec before = net.forward(x);
  net.skip()(0, 1) += 0.5;
  CHECK(net.forward(x)(0) - before(0) == doctest::Approx(0.5 * x(1)));
  nn::Mlp plain({2, 4, 2}, {Activation::Tanh, Activation::Identity}, rng);
  CHECK(plain.params().size() + 1 == net.params().size());
}

TEST_CASE("AdamW follows the bias-corrected update with decoupled decay") {
  Vec p(3), g(3);
  p << 1.0, -2.0, 0.5;
  const Vec p0 = p;
  nn::AdamWConfig c;
  c.lr = 0.1;
  c.weight_decay = 0.05;
  nn::AdamWState st{c, {}, {}, 0};
  Vec m = Vec::Zero(3), v = Vec::Zero(3), ref = p0;
  for (int t = 1; t <= 3; ++t) {
    g << 0.3 * t, -0.1, 2.0 / t;
    nn::adamw_step({nn::param(p)}, {nn::param(g)}, st);
    for (int k = 0; k < 3; ++k) {
      m(k) = 0.9 * m(k) + 0.1 * g(k);
      v(k) = 0.999 * v(k) + 0.001 * g(k) * g(k);
      const double mh = m(k) / (1 - std::pow(0.9, t));
      const double vh = v(k) / (1 - std::pow(0.999, t));
      ref(k) = ref(k) - c.lr * c.weight_decay * ref(k) - c.lr * mh / (std::sqrt(vh) + c.eps);
    }
    CHECK((p - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(st.step == 3);
  Vec wrong(2);
  CHECK_THROWS_AS(nn::adamw_step({nn::param(p)}, {nn::param(wrong)}, st), std::invalid_argument);
}

TEST_CASE("SGD step and zero") {
  Mat w = Mat::Ones(2, 2);
  Mat g = Mat::Constant(2, 2, 4.0);
  nn::sgd_step({nn::param(w)}, {nn::param(g)}, 0.25);
  CHECK(w.isZero());
  nn::zero({nn::param(g)});
  CHECK(g.isZero());
  CHECK(nn::count({nn::param(w), nn::param(g)}) == 8);
}

TEST_CASE("checkpoint byte layout is column-major little-endian float64") {
  Mat w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  Vec b(2);
  b << -0.5, 0.25;
  const auto path = temp_file("layout.ckpt");
  nn::save_checkpoint(path.string(), {nn::param(w), nn::param(b)});
  std::ifstream is(path, std::ios::binary);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  REQUIRE(bytes.size() == 4 + 4 + 4 + (16 + 6 * 8) + (16 + 2 * 8));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "HZCK");
  auto u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[at + i];
    return v;
  };
  auto f64 = [&](std::size_t at) {
    const std::uint64_t bits = u64(at);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  };
  CHECK((bytes[4] | bytes[5] << 8) == 1);
  CHECK((bytes[8] | bytes[9] << 8) == 2);
  CHECK(u64(12) == 2);
  CHECK(u64(20) == 3);
  const double col_major[] = {1, 4, 2, 5, 3, 6};
  for (int k = 0; k < 6; ++k) CHECK(f64(28 + 8 * k) == col_major[k]);
  CHECK(u64(76) == 2);
  CHECK(u64(84) == 1);
  CHECK(f64(92) == -0.5);
  CHECK(f64(100) == 0.25);

  Mat w2 = Mat::Zero(2, 3);
  Vec b2 = Vec::Zero(2);
  nn::load_checkpoint(path.string(), {nn::param(w2), nn::param(b2)});
  CHECK(w2 == w);
  CHECK(b2 == b);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint load rejects mismatches") {
  Mat w = Mat::Ones(2, 2);
  const auto path = temp_file("mismatch.ckpt");
  nn::save_checkpoint(path.string(), {nn::param(w)});
  Mat wrong(2, 3);
  CHECK_THROWS_AS(nn::load_checkpoint(path.string(), {nn::param(wrong)}), std::runtime_error);
  CHECK_THROWS_AS(nn::load_checkpoint(path.string(), {nn::param(w), nn::param(w)}), std::runtime_error);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "HZCK";
  }
  CHECK_THROWS_AS(nn::load_checkpoint(path.string(), {nn::param(w)}), std::runtime_error);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOPE0000";
  }
  CHECK_THROWS_AS(nn::load_checkpoint(path.string(), {nn::param(w)}), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(nn::load_checkpoint(path.string(), {nn::param(w)}), std::runtime_error);
}

TEST_CASE("MLP shape errors") {
  Rng rng(1);
  CHECK_THROWS_AS(nn::Mlp({3}, {}, rng), std::invalid_argument);
  CHECK_THROWS_AS(nn::Mlp({3, 2}, {Activation::Tanh, Activation::Tanh}, rng), std::invalid_argument);
  CHECK_THROWS_AS(nn::Mlp({3, 0, 2}, {Activation::Tanh, Activation::Tanh}, rng), std::invalid_argument);
  nn::Mlp net({3, 2}, {Activation::Tanh}, rng);
  CHECK_THROWS_AS(net.forward(Vec::Zero(4)), std::invalid_argument);
  nn::MlpTape tape;
  net.forward(Vec::Zero(3), &tape);
  nn::Mlp grads = net.zeros_like();
  CHECK_THROWS_AS(net.backward(tape, Vec::Zero(3), grads), std::invalid_argument);
}

TEST_CASE("check_gradients reports a wrong gradient") {
  Vec p(2);
  p << 0.3, -1.0;
  Vec g(2);
  g << 2 * 0.3, 2 * -1.0;
  auto loss = [&] { return p.squaredNorm(); };
  CHECK(nn::check_gradients({nn::param(p)}, {nn::param(g)}, loss).max_rel_error < 1e-8);
  g(1) *= 1.01;
  CHECK(nn::check_gradients({nn::param(p)}, {nn::param(g)}, loss).max_rel_error > 1e-3);
  const nn::GradCheck sub = nn::check_gradients({nn::param(p)}, {nn::param(g)}, loss, 1e-5, 1);
  CHECK(sub.checked == 1);
}

TEST_CASE("zero and identity networks") {
  Rng rng(2);
  nn::Mlp zero_net({3, 4, 2}, {Activation::Tanh, Activation::Identity}, rng);
  for (auto& l : zero_net.layers()) {
    l.w.setZero();
    l.b.setZero();
  }
  const Vec x = rng.normal_vector(3);
  CHECK(zero_net.forward(x).isZero(0.0));
  nn::Mlp id({3, 3}, {Activation::Identity}, rng);
  id.layers()[0].w.setIdentity();
  id.layers()[0].b.setZero();
  CHECK(id.forward(x) == x);
}

TEST_CASE("linear layer gradient is the outer product") {
  Rng rng(3);
  nn::Mlp net({4, 2}, {Activation::Identity}, rng);
  const Vec x = rng.normal_vector(4), dy = rng.normal_vector(2);
  nn::MlpTape tape;
  net.forward(x, &tape);
  nn::Mlp grads = net.zeros_like();
  net.backward(tape, dy, grads);
  CHECK((grads.layers()[0].w - dy * x.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(grads.layers()[0].b == dy);

  nn::Mlp deep({4, 5, 3}, {Activation::Tanh, Activation::Sigmoid}, rng, true);
  deep.forward(x, &tape);
  nn::Mlp g2 = deep.zeros_like();
  const Vec dx = deep.backward(tape, Vec::Zero(3), g2);
  CHECK(dx.isZero(0.0));
  for (const auto& p : g2.params()) CHECK(p.flat().isZero(0.0));
}

TEST_CASE("bounded activations stay in range") {
  Vec pre = Vec::LinSpaced(41, -20.0, 20.0);
  const Vec g = nn::activate(Activation::ScaledSigmoid, pre, 2.0);
  CHECK(g.minCoeff() > 0.0);
  CHECK(g.maxCoeff() < 2.0);
  CHECK(nn::activate(Activation::Softplus, pre).minCoeff() > 0.0);
  CHECK(nn::detach(pre) == pre);
}

TEST_CASE("AdamW and SGD edge cases") {
  Vec p(3), g = Vec::Zero(3);
  p << 1.0, -2.0, 0.5;
  const Vec p0 = p;
  nn::AdamWState st;
  st.config.lr = 0.1;
  st.config.weight_decay = 0.05;
  nn::adamw_step({nn::param(p)}, {nn::param(g)}, st);
  // Zero gradient: only the decoupled decay acts.
  CHECK((p - (1.0 - 0.1 * 0.05) * p0).cwiseAbs().maxCoeff() < 1e-15);

  Vec q = p0, gq(3);
  gq << 0.3, -1.0, 2.0;
  nn::AdamWState s1;
  nn::adamw_step({nn::param(q)}, {nn::param(gq)}, s1);
  CHECK((s1.m[0] - (1.0 - s1.config.beta1) * gq).cwiseAbs().maxCoeff() < 1e-15);

  Vec frozen = p0;
  nn::AdamWState s0;
  s0.config.lr = 0.0;
  nn::adamw_step({nn::param(frozen)}, {nn::param(gq)}, s0);
  CHECK(frozen == p0);
  nn::sgd_step({nn::param(frozen)}, {nn::param(gq)}, 0.0);
  CHECK(frozen == p0);

  // Descent on 0.5 |p|^2.
  Vec d = p0;
  nn::AdamWState sd;
  sd.config.lr = 0.05;
  double prev = 0.5 * d.squaredNorm();
  for (int k = 0; k < 2; ++k) {
    Vec grad = d;
    nn::adamw_step({nn::param(d)}, {nn::param(grad)}, sd);
    CHECK(0.5 * d.squaredNorm() < prev);
    prev = 0.5 * d.squaredNorm();
  }
}

TEST_CASE("two detached chunks sum to the full truncated loss") {
  // Scalar recurrence s' = w s + x with loss sum (s - y)^2; the second
  // chunk starts from a detached state, so its gradient ignores chunk one.
  const double w = 0.7;
  const std::vector<double> xs{0.3, -1.0, 0.5, 2.0}, ys{0.1, 0.2, -0.3, 0.4};
  auto chunk = [&](double s0, int from, int to, double& s_end, double& dw) {
    double s = s0, loss = 0.0, ds_dw = 0.0;
    dw = 0.0;
    for (int t = from; t < to; ++t) {
      ds_dw = s + w * ds_dw;
      s = w * s + xs[t];
      loss += (s - ys[t]) * (s - ys[t]);
      dw += 2.0 * (s - ys[t]) * ds_dw;
    }
    s_end = s;
    return loss;
  };
  double s_mid, s_end, dw1, dw2, dw_full;
  const double l1 = chunk(0.0, 0, 2, s_mid, dw1);
  const double l2 = chunk(nn::detach(s_mid), 2, 4, s_end, dw2);
  const double full = chunk(0.0, 0, 4, s_end, dw_full);
  CHECK(l1 + l2 == doctest::Approx(full).epsilon(1e-15));
  CHECK(std::abs(dw1 + dw2 - dw_full) > 1e-6);
}
