#include "hippozoo/assoc.hpp"

#include <cmath>
#include <stdexcept>

namespace hippozoo {

AssocMemoryBank::AssocMemoryBank(int d_model, OrthoBasis address_basis)
    : c(Mat::Zero(d_model, address_basis.order())), basis(std::move(address_basis)) {}

Vec AssocMemoryBank::read(double x) const { return c * eval_basis(basis, x); }

void write(AssocMemoryBank& mem, double x_key, const Vec& y, double g_write, double eps) {
  if (y.size() != mem.c.rows()) throw std::invalid_argument("write: value dimension mismatch");
  if (!(eps >= 0)) throw std::invalid_argument("write: eps must be >= 0");
  const Vec k = eval_basis(mem.basis, x_key);
  const double denom = k.squaredNorm() + eps;
  if (!(denom > 0)) throw NumericError("write: zero address feature with eps = 0");
  const double alpha = g_write / denom;
  const Vec err = y - mem.c * k;
  mem.c.noalias() += alpha * err * k.transpose();
}

Vec read(const AssocMemoryBank& mem, double x_query) { return mem.read(x_query); }

void AssocRecallConfig::validate() const {
  if (token_dim < 1 || d_model < 1 || n_hippo < 1 || n_assoc < 1 || gate_hidden < 1)
    throw std::invalid_argument("assoc-recall: widths must be >= 1");
  if (layout.set_size < 1 || layout.length < 4 || layout.length % 2 != 0)
    throw std::invalid_argument("assoc-recall: episode length must be even and >= 4");
  if (!(timescale > 0 && dt > 0)) throw std::invalid_argument("assoc-recall: timescale and dt must be > 0");
  if (!(eps >= 0)) throw std::invalid_argument("assoc-recall: eps must be >= 0");
  if (!(lr >= 0 && weight_decay >= 0)) throw std::invalid_argument("assoc-recall: lr and weight_decay must be >= 0");
  if (iterations < 1 || eval_every < 1 || eval_episodes < 1)
    throw std::invalid_argument("assoc-recall: iterations, eval_every, eval_episodes must be >= 1");
}

AssocModel::AssocModel(const AssocRecallConfig& cfg, Rng& rng) {
  const int flat = cfg.d_model * cfg.n_hippo;
  const std::vector<nn::Activation> gate_acts{nn::Activation::Tanh, nn::Activation::Sigmoid};
  w_in = nn::init_uniform(cfg.d_model, cfg.token_dim, rng);
  w_key = nn::init_uniform(flat, 1, rng).col(0) / std::sqrt(static_cast<double>(flat));
  w_query = nn::init_uniform(flat, 1, rng).col(0) / std::sqrt(static_cast<double>(flat));
  write_gate = nn::Mlp({flat, cfg.gate_hidden, 1}, gate_acts, rng, true);
  out_gate = nn::Mlp({flat, cfg.gate_hidden, 1}, gate_acts, rng, true);
  w_value = nn::init_uniform(cfg.d_model, cfg.d_model, rng);
  w_out = nn::init_uniform(cfg.token_dim, cfg.d_model, rng);
}

AssocModel AssocModel::zeros_like() const {
  AssocModel z = *this;
  nn::zero(z.params());
  return z;
}

nn::ParamList AssocModel::params() {
  nn::ParamList out{nn::param(w_in), nn::param(w_key), nn::param(b_key), nn::param(w_query), nn::param(b_query)};
  for (const auto& p : write_gate.params()) out.push_back(p);
  for (const auto& p : out_gate.params()) out.push_back(p);
  out.push_back(nn::param(w_value));
  out.push_back(nn::param(w_out));
  return out;
}

namespace {

struct AssocStep {
  Vec u;
  Mat s_next;
  double x_key, x_query, g_write, g_out;
  Vec k, dk_dx, q, dq_dx;
  Vec y, y_hat, r, o;
  double alpha, denom;
  Mat c_prev;
  Mat c_next;
  nn::MlpTape write_tape, out_tape;
};

}  // namespace

AssocRollout run_assoc_episode(const AssocModel& model, const AssocRecallConfig& cfg,
                               const DiscreteLTI& encoder, const OrthoBasis& basis,
                               const Episode& ep, AssocModel* grads, bool keep_memories) {
  const Eigen::Index steps = ep.length();
  if (ep.inputs.cols() != model.w_in.cols()) throw std::invalid_argument("run_assoc_episode: token dimension mismatch");
  const Eigen::Index d = model.w_in.rows();
  const Eigen::Index n = encoder.a_d.rows();
  const double norm = 1.0 / static_cast<double>(steps * ep.targets.cols());

  std::vector<AssocStep> rec(steps);
  AssocRollout out;
  out.outputs.resize(steps, ep.targets.cols());
  Mat s = Mat::Zero(d, n);
  Mat c = Mat::Zero(d, basis.order());
  for (Eigen::Index t = 0; t < steps; ++t) {
    AssocStep& r = rec[t];
    r.u = model.w_in * ep.inputs.row(t).transpose();
    r.s_next = s * encoder.a_d.transpose();
    r.s_next.noalias() += r.u * encoder.b_d.transpose();
    const auto v = r.s_next.reshaped();
    r.x_key = nn::sigmoid(model.w_key.dot(v) + model.b_key(0));
    r.x_query = nn::sigmoid(model.w_query.dot(v) + model.b_query(0));
    const Vec flat = v;
    r.g_write = model.write_gate.forward(flat, grads ? &r.write_tape : nullptr)(0);
    r.g_out = model.out_gate.forward(flat, grads ? &r.out_tape : nullptr)(0);
    r.y = model.w_value * r.u;
    eval_basis_with_derivative(basis, r.x_key, r.k, r.dk_dx);
    eval_basis_with_derivative(basis, r.x_query, r.q, r.dq_dx);
    r.y_hat = c * r.k;
    r.denom = r.k.squaredNorm() + cfg.eps;
    r.alpha = r.g_write / r.denom;
    if (keep_memories) out.memories.push_back(c);
    r.c_prev = c;
    c.noalias() += r.alpha * (r.y - r.y_hat) * r.k.transpose();
    r.c_next = c;
    r.r = c * r.q;
    r.o = model.w_out * r.r;
    out.outputs.row(t) = (r.g_out * r.o).transpose();
    out.loss += (out.outputs.row(t) - ep.targets.row(t)).squaredNorm() * norm;
    out.trace.push_back({r.x_key, r.x_query, r.g_write, r.g_out});
    s = r.s_next;
  }
  if (keep_memories) out.memories.push_back(c);
  if (!std::isfinite(out.loss)) throw NumericError("run_assoc_episode: non-finite loss");
  if (!grads) return out;

  Mat ds = Mat::Zero(d, n);               // dL/dS_{t+1}
  Mat dc = Mat::Zero(d, basis.order());   // dL/dC_{t+1}
  for (Eigen::Index t = steps; t-- > 0;) {
    AssocStep& r = rec[t];
    const Vec dxhat = 2.0 * norm * (out.outputs.row(t) - ep.targets.row(t)).transpose();
    // x_hat = g_out W_out r
    const double dg_out = dxhat.dot(r.o);
    const Vec d_o = r.g_out * dxhat;
    grads->w_out.noalias() += d_o * r.r.transpose();
    const Vec dr = model.w_out.transpose() * d_o;
    // r = C' q
    dc.noalias() += dr * r.q.transpose();
    const double dx_query = (r.c_next.transpose() * dr).dot(r.dq_dx);
    // C' = C + alpha e k^T, e = y - C k, alpha = g / (|k|^2 + eps)
    const Vec e = r.y - r.y_hat;
    const Vec gk = dc * r.k;
    const double dalpha = e.dot(gk);
    const Vec de = r.alpha * gk;
    Vec dk = r.alpha * (dc.transpose() * e) - r.c_prev.transpose() * de - (2.0 * r.alpha * dalpha / r.denom) * r.k;
    dc.noalias() -= de * r.k.transpose();
    const double dg_write = dalpha / r.denom;
    const double dx_key = dk.dot(r.dk_dx);
    // address heads
    const double da_key = dx_key * r.x_key * (1.0 - r.x_key);
    const double da_query = dx_query * r.x_query * (1.0 - r.x_query);
    const auto v = r.s_next.reshaped();
    grads->w_key += da_key * v;
    grads->b_key(0) += da_key;
    grads->w_query += da_query * v;
    grads->b_query(0) += da_query;
    Vec dv = da_key * model.w_key + da_query * model.w_query;
    dv += model.write_gate.backward(r.write_tape, Vec::Constant(1, dg_write), grads->write_gate);
    dv += model.out_gate.backward(r.out_tape, Vec::Constant(1, dg_out), grads->out_gate);
    // y = W_value u
    grads->w_value.noalias() += de * r.u.transpose();
    Vec du = model.w_value.transpose() * de;
    ds.reshaped() += dv;
    // S' = S A_d^T + u b_d^T
    du.noalias() += ds * encoder.b_d;
    grads->w_in.noalias() += du * ep.inputs.row(t);
    ds = (ds * encoder.a_d).eval();
  }
  return out;
}

int nearest_row(const Mat& tokens, const Vec& v) {
  int best = 0;
  double best_sim = -2.0;
  const double vn = v.norm();
  for (Eigen::Index i = 0; i < tokens.rows(); ++i) {
    const double sim = vn > 0 ? tokens.row(i).dot(v) / (tokens.row(i).norm() * vn) : 0.0;
    if (sim > best_sim) {
      best_sim = sim;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double evaluate_assoc(const AssocModel& model, const AssocRecallConfig& cfg, const DiscreteLTI& encoder,
                      const OrthoBasis& basis, const Mat& tokens, std::uint64_t eval_seed) {
  Rng rng(eval_seed, 0x6576616cULL);
  long hits = 0;
  for (int e = 0; e < cfg.eval_episodes; ++e) {
    const Episode ep = assoc_recall_episode(tokens, rng, cfg.layout);
    const AssocRollout out = run_assoc_episode(model, cfg, encoder, basis, ep, nullptr);
    const Eigen::Index last = ep.length() - 1;
    hits += nearest_row(tokens, out.outputs.row(last).transpose()) == ep.target_ids[last];
  }
  return static_cast<double>(hits) / cfg.eval_episodes;
}

AssocRecallResult run_assoc_recall(const AssocRecallConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng token_rng = root.fork(1);
  Rng init_rng = root.fork(2);
  Rng train_rng = root.fork(3);
  const std::uint64_t eval_seed = root.fork(4).next();

  AssocRecallResult res;
  res.tokens = make_token_table(cfg.layout.table_size(), cfg.token_dim, token_rng);
  res.model = AssocModel(cfg, init_rng);
  AssocModel grads = res.model.zeros_like();
  const nn::ParamList params = res.model.params();
  const nn::ParamList grad_params = grads.params();
  nn::AdamWState opt;
  opt.config.lr = cfg.lr;
  opt.config.weight_decay = cfg.weight_decay;

  const DiscreteLTI encoder = discretize(make_hippo({Family::LegT, cfg.n_hippo, cfg.timescale}), cfg.dt);
  const OrthoBasis basis = legendre_shifted(cfg.n_assoc);

  double loss_acc = 0.0;
  long loss_count = 0;
  for (long it = 1; it <= cfg.iterations; ++it) {
    const Episode ep = assoc_recall_episode(res.tokens, train_rng, cfg.layout);
    nn::zero(grad_params);
    const AssocRollout out = run_assoc_episode(res.model, cfg, encoder, basis, ep, &grads);
    nn::adamw_step(params, grad_params, opt);
    loss_acc += out.loss;
    ++loss_count;
    if (it % cfg.eval_every == 0 || it == cfg.iterations) {
      const double acc = evaluate_assoc(res.model, cfg, encoder, basis, res.tokens, eval_seed);
      res.rows.push_back({it, loss_acc / loss_count, acc});
      res.final_accuracy = acc;
      loss_acc = 0.0;
      loss_count = 0;
    }
  }

  Rng dump_rng(eval_seed, 0x64756d70ULL);
  const Episode ep = assoc_recall_episode(res.tokens, dump_rng, cfg.layout);
  const AssocRollout out = run_assoc_episode(res.model, cfg, encoder, basis, ep, nullptr, true);
  res.address_dump.resize(ep.length(), 5);
  for (Eigen::Index t = 0; t < ep.length(); ++t) {
    const auto& tr = out.trace[t];
    res.address_dump.row(t) << static_cast<double>(t), tr.x_key, tr.x_query, tr.g_write, tr.g_out;
  }
  const int grid = 101;
  const Eigen::Index last = ep.length() - 1;
  res.memory_dump.resize(grid, 1 + 2 * cfg.d_model);
  for (int i = 0; i < grid; ++i) {
    const double x = static_cast<double>(i) / (grid - 1);
    const Vec phi = eval_basis(basis, x);
    res.memory_dump(i, 0) = x;
    res.memory_dump.row(i).segment(1, cfg.d_model) = (out.memories[last] * phi).transpose();
    res.memory_dump.row(i).segment(1 + cfg.d_model, cfg.d_model) = (out.memories[last + 1] * phi).transpose();
  }
  return res;
}

}  // namespace hippozoo
