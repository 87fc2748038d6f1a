#include "hippozoo/nnkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hippozoo::nn {

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softplus") return Activation::Softplus;
  if (name == "scaled-sigmoid") return Activation::ScaledSigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec activate(Activation act, const Vec& pre, double g_max) {
  switch (act) {
    case Activation::Identity: return pre;
    case Activation::Tanh: return pre.array().tanh();
    case Activation::Sigmoid: return pre.unaryExpr([](double x) { return sigmoid(x); });
    case Activation::Softplus: return pre.unaryExpr([](double x) { return softplus(x); });
    case Activation::ScaledSigmoid:
      return pre.unaryExpr([g_max](double x) { return g_max * sigmoid(x); });
  }
  throw std::logic_error("activate: unknown activation");
}

Vec activate_derivative(Activation act, const Vec& pre, const Vec& post, double g_max) {
  switch (act) {
    case Activation::Identity: return Vec::Ones(pre.size());
    case Activation::Tanh: return 1.0 - post.array().square();
    case Activation::Sigmoid: return post.array() * (1.0 - post.array());
    case Activation::Softplus: return pre.unaryExpr([](double x) { return sigmoid(x); });
    case Activation::ScaledSigmoid: return post.array() * (1.0 - post.array() / g_max);
  }
  throw std::logic_error("activate_derivative: unknown activation");
}

void zero(const ParamList& list) {
  for (const auto& p : list) p.flat().setZero();
}

Eigen::Index count(const ParamList& list) {
  Eigen::Index n = 0;
  for (const auto& p : list) n += p.rows * p.cols;
  return n;
}

Mat init_uniform(Eigen::Index rows, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Mat m(rows, fan_in);
  for (Eigen::Index j = 0; j < fan_in; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Mlp::Mlp(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng,
         bool residual, double g_max)
    : residual_(residual), g_max_(g_max) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need input and output widths");
  if (acts.size() + 1 != widths.size()) throw std::invalid_argument("Mlp: one activation per layer");
  if (!(g_max > 0)) throw std::invalid_argument("Mlp: g_max must be > 0");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("Mlp: widths must be >= 1");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Dense d;
    d.w = init_uniform(widths[l + 1], widths[l], rng);
    const double bound = std::sqrt(1.0 / widths[l]);
    d.b.resize(widths[l + 1]);
    for (Eigen::Index i = 0; i < d.b.size(); ++i) d.b(i) = rng.uniform(-bound, bound);
    d.act = acts[l];
    layers_.push_back(std::move(d));
  }
  if (residual_) skip_ = init_uniform(widths.back(), widths.front(), rng);
}

Vec Mlp::forward(const Vec& x, MlpTape* tape) const {
  if (x.size() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  if (tape) {
    tape->x = x;
    tape->pre.clear();
    tape->post.clear();
    tape->live = true;
  }
  Vec h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Dense& d = layers_[l];
    Vec pre = d.w * h + d.b;
    if (residual_ && l + 1 == layers_.size()) pre.noalias() += skip_ * x;
    Vec post = activate(d.act, pre, g_max_);
    if (tape) {
      tape->pre.push_back(std::move(pre));
      tape->post.push_back(post);
    }
    h = std::move(post);
  }
  return h;
}

Vec Mlp::backward(MlpTape& tape, const Vec& dy, Mlp& grads) const {
  if (!tape.live) throw std::logic_error("Mlp::backward: tape already consumed or never recorded");
  if (dy.size() != output_dim()) throw std::invalid_argument("Mlp::backward: gradient dimension mismatch");
  tape.live = false;
  Vec dpost = dy;
  Vec dx = Vec::Zero(input_dim());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Dense& d = layers_[l];
    const Vec dpre = dpost.cwiseProduct(activate_derivative(d.act, tape.pre[l], tape.post[l], g_max_));
    const Vec& in = l == 0 ? tape.x : tape.post[l - 1];
    grads.layers_[l].w.noalias() += dpre * in.transpose();
    grads.layers_[l].b += dpre;
    if (residual_ && l + 1 == layers_.size()) {
      grads.skip_.noalias() += dpre * tape.x.transpose();
      dx.noalias() += skip_.transpose() * dpre;
    }
    dpost = d.w.transpose() * dpre;
  }
  dx += dpost;
  return dx;
}

Mlp Mlp::zeros_like() const {
  Mlp z = *this;
  zero(z.params());
  return z;
}

ParamList Mlp::params() {
  ParamList out;
  for (auto& d : layers_) {
    out.push_back(param(d.w));
    out.push_back(param(d.b));
  }
  if (residual_) out.push_back(param(skip_));
  return out;
}

void adamw_step(const ParamList& params, const ParamList& grads, AdamWState& st) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: parameter/gradient count mismatch");
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.push_back(Vec::Zero(p.rows * p.cols));
      st.v.push_back(Vec::Zero(p.rows * p.cols));
    }
  }
  if (st.m.size() != params.size()) throw std::invalid_argument("adamw_step: state does not match parameters");
  const auto& c = st.config;
  ++st.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows != grads[i].rows || params[i].cols != grads[i].cols)
      throw std::invalid_argument("adamw_step: gradient shape mismatch");
    double* p = params[i].data;
    const double* g = grads[i].data;
    double* m = st.m[i].data();
    double* v = st.v[i].data();
    const double decay = 1.0 - c.lr * c.weight_decay;
    const double step = c.lr / bc1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
    const Eigen::Index len = st.m[i].size();
    for (Eigen::Index k = 0; k < len; ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      p[k] = decay * p[k] - step * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + c.eps);
    }
  }
}

void sgd_step(const ParamList& params, const ParamList& grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("sgd_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].flat() -= lr * grads[i].flat();
}

GradCheck check_gradients(const ParamList& params, const ParamList& grads,
                          const std::function<double()>& loss, double h, Eigen::Index per_tensor,
                          std::uint64_t seed, double floor) {
  if (params.size() != grads.size()) throw std::invalid_argument("check_gradients: count mismatch");
  Rng rng(seed, 0x6772616463686bULL);
  GradCheck out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::Index n = params[i].rows * params[i].cols;
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index k = 0; k < n; ++k) idx[k] = k;
    if (per_tensor > 0 && per_tensor < n) {
      rng.shuffle(idx);
      idx.resize(per_tensor);
    }
    for (Eigen::Index k : idx) {
      double& p = params[i].data[k];
      const double saved = p;
      p = saved + h;
      const double up = loss();
      p = saved - h;
      const double down = loss();
      p = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[i].data[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

namespace {

constexpr std::array<char, 4> kMagic{'H', 'Z', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::ostream& os, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) os.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::istream& is) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("checkpoint: truncated file");
    value |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamList& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(p.rows));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(p.cols));
    for (Eigen::Index k = 0; k < p.rows * p.cols; ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, &p.data[k], sizeof bits);
      put_le<std::uint64_t>(os, bits);
    }
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(const std::string& path, const ParamList& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  if (get_le<std::uint32_t>(is) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  if (get_le<std::uint32_t>(is) != params.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (const auto& p : params) {
    const auto rows = get_le<std::uint64_t>(is);
    const auto cols = get_le<std::uint64_t>(is);
    if (rows != static_cast<std::uint64_t>(p.rows) || cols != static_cast<std::uint64_t>(p.cols))
      throw std::runtime_error("checkpoint: tensor shape mismatch");
    for (Eigen::Index k = 0; k < p.rows * p.cols; ++k) {
      const auto bits = get_le<std::uint64_t>(is);
      std::memcpy(&p.data[k], &bits, sizeof bits);
    }
  }
}

}  // namespace hippozoo::nn
