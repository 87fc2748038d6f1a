#include "hippozoo/salience.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hippozoo {

Vec salience_step(const ContinuousLTI& cont, const Vec& s, double f, double g, double dt) {
  if (!std::isfinite(g) || !(g > 0)) throw NumericError("salience_step: g must be finite and > 0");
  const auto zoh = numkit::zoh_discretize(g * cont.a, g * cont.b, dt);
  Vec out = zoh.a_d * s + zoh.b_d * f;
  if (!out.allFinite()) throw NumericError("salience_step: non-finite state");
  return out;
}

WarpMap warp(const Vec& g, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("warp: dt must be > 0");
  if (g.size() == 0) throw std::invalid_argument("warp: empty trace");
  if (!g.allFinite() || (g.array() <= 0).any()) throw std::invalid_argument("warp: trace must be finite and > 0");
  WarpMap m{dt, g, Vec(g.size() + 1)};
  m.phi(0) = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) m.phi(i + 1) = m.phi(i) + g(i) * dt;
  return m;
}

double WarpMap::at(double t) const {
  if (t <= 0) return g(0) * t;
  const auto steps = g.size();
  const double pos = t / dt;
  auto i = static_cast<Eigen::Index>(std::floor(pos));
  if (i >= steps) return phi(steps) + g(steps - 1) * (t - end_time());
  return phi(i) + g(i) * (t - static_cast<double>(i) * dt);
}

double WarpMap::inverse(double u) const {
  const auto steps = g.size();
  if (u <= 0) return u / g(0);
  if (u >= phi(steps)) return end_time() + (u - phi(steps)) / g(steps - 1);
  // first boundary with phi > u
  const auto it = std::upper_bound(phi.data(), phi.data() + phi.size(), u);
  const auto i = static_cast<Eigen::Index>(it - phi.data()) - 1;
  return static_cast<double>(i) * dt + (u - phi(i)) / g(i);
}

double WarpMap::salience_at(double t) const {
  const auto i = static_cast<Eigen::Index>(std::floor(t / dt));
  return g(std::clamp<Eigen::Index>(i, 0, g.size() - 1));
}

namespace {

void check_grid(const WarpMap& map, double t, const Vec& grid) {
  const double eps = 1e-12 * std::max(1.0, map.end_time());
  if (t < -eps || t > map.end_time() + eps) throw std::invalid_argument("salience: query time outside the recorded trace");
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (grid(i) < -eps || grid(i) > map.end_time() + eps)
      throw std::invalid_argument("salience: grid point outside the recorded history");
}

}  // namespace

Vec induced_measure(const HippoSpec& spec, const WarpMap& map, double t, const Vec& grid) {
  check_grid(map, t, grid);
  const double now = map.at(t);
  Vec out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid(i) > t) {
      out(i) = 0.0;
      continue;
    }
    out(i) = measure_density(spec, now - map.at(grid(i))) * map.salience_at(grid(i));
  }
  return out;
}

Mat output_functionals(const Mat& w, const HippoSpec& spec, const WarpMap& map, double t,
                       const Vec& grid) {
  if (w.cols() != spec.n) throw std::invalid_argument("output_functionals: readout width must be N");
  check_grid(map, t, grid);
  const OrthoBasis legendre = legendre_shifted(spec.n);
  const double now = map.at(t);
  Mat out = Mat::Zero(grid.size(), w.rows());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid(i) > t) continue;
    const double lag = now - map.at(grid(i));
    const double weight = measure_density(spec, lag) * map.salience_at(grid(i));
    out.row(i) = (weight * (w * basis_at_lag(spec, legendre, lag))).transpose();
  }
  return out;
}

ZohBank::ZohBank(ContinuousLTI cont, double dt, int bins, double g_lo, double g_hi)
    : cont_(std::move(cont)), dt_(dt), bins_(bins) {
  if (!(dt > 0)) throw std::invalid_argument("ZohBank: dt must be > 0");
  if (bins < 0) throw std::invalid_argument("ZohBank: bins must be >= 0");
  lower_ = cont_.a.isLowerTriangular(0.0);
  if (bins > 0) {
    if (!(g_lo > 0 && g_hi > g_lo)) throw std::invalid_argument("ZohBank: need 0 < g_lo < g_hi");
    log_lo_ = std::log(g_lo);
    log_step_ = bins > 1 ? (std::log(g_hi) - log_lo_) / (bins - 1) : 0.0;
    cache_.resize(bins);
  }
}

ZohBank::Entry ZohBank::get(double g, double& g_used) {
  if (!std::isfinite(g) || !(g > 0)) throw NumericError("ZohBank: g must be finite and > 0");
  if (bins_ == 0) {
    g_used = g;
    return std::make_shared<const numkit::Zoh<double>>(numkit::zoh_discretize(g * cont_.a, g * cont_.b, dt_));
  }
  long idx = log_step_ > 0 ? std::lround((std::log(g) - log_lo_) / log_step_) : 0;
  idx = std::clamp(idx, 0L, static_cast<long>(bins_) - 1);
  g_used = std::exp(log_lo_ + log_step_ * static_cast<double>(idx));
  auto& slot = cache_[idx];
  if (!slot)
    slot = std::make_shared<const numkit::Zoh<double>>(
        numkit::zoh_discretize(g_used * cont_.a, g_used * cont_.b, dt_));
  return slot;
}

void SelectiveCopyConfig::validate() const {
  if (token_dim < 1) throw std::invalid_argument("selective-copy: token_dim must be >= 1");
  if (layout.informative < 1 || layout.per_episode < 1 || layout.distractors < 0)
    throw std::invalid_argument("selective-copy: bad episode layout");
  if (d_model < 1 || n < 1 || pool_dim < 1 || hidden < 1)
    throw std::invalid_argument("selective-copy: widths must be >= 1");
  if (!(timescale > 0 && dt > 0 && g_max > 0)) throw std::invalid_argument("selective-copy: timescale, dt, g_max must be > 0");
  if (!(lr >= 0 && weight_decay >= 0)) throw std::invalid_argument("selective-copy: lr and weight_decay must be >= 0");
  if (episodes < 1 || eval_every < 1 || eval_episodes < 1)
    throw std::invalid_argument("selective-copy: episodes, eval_every, eval_episodes must be >= 1");
  if (exp_cache_bins < 0) throw std::invalid_argument("selective-copy: exp_cache_bins must be >= 0");
  if (exp_cache_bins > 0 && !(g_lo > 0 && g_lo < g_max)) throw std::invalid_argument("selective-copy: need 0 < g_lo < g_max");
}

SalienceCopyModel::SalienceCopyModel(const SelectiveCopyConfig& cfg, Rng& rng)
    : w_in(nn::init_uniform(cfg.d_model, cfg.token_dim, rng)),
      w_pool(nn::init_uniform(cfg.pool_dim, cfg.n, rng)),
      b_pool(Vec::Zero(cfg.pool_dim)),
      salience({cfg.d_model + cfg.pool_dim, cfg.hidden, 1},
               {nn::Activation::Softplus, nn::Activation::ScaledSigmoid}, rng, false, cfg.g_max) {
  const Eigen::Index flat = static_cast<Eigen::Index>(cfg.d_model) * cfg.n;
  for (int k = 0; k < cfg.layout.per_episode; ++k) {
    w_out.push_back(nn::init_uniform(cfg.token_dim, flat, rng));
    b_out.push_back(Vec::Zero(cfg.token_dim));
  }
}

SalienceCopyModel SalienceCopyModel::zeros_like() const {
  SalienceCopyModel z = *this;
  nn::zero(z.params());
  return z;
}

nn::ParamList SalienceCopyModel::params() {
  nn::ParamList out{nn::param(w_in), nn::param(w_pool), nn::param(b_pool)};
  for (const auto& p : salience.params()) out.push_back(p);
  for (std::size_t k = 0; k < w_out.size(); ++k) {
    out.push_back(nn::param(w_out[k]));
    out.push_back(nn::param(b_out[k]));
  }
  return out;
}

namespace {

struct StepRecord {
  Vec u;
  Mat pool_act;  // d_model x pool_dim, tanh outputs
  nn::MlpTape tape;
  ZohBank::Entry zoh;
  int slot = -1;
};

}  // namespace

ChunkOutput run_chunk(const SalienceCopyModel& model, const Episode& ep, const Mat& s0,
                      ZohBank& bank, SalienceCopyModel* grads, bool keep_states) {
  const Eigen::Index steps = ep.length();
  const Eigen::Index d = model.w_in.rows();
  const Eigen::Index n = model.w_pool.cols();
  if (s0.rows() != d || s0.cols() != n) throw std::invalid_argument("run_chunk: carry-in state shape mismatch");
  if (ep.inputs.cols() != model.w_in.cols()) throw std::invalid_argument("run_chunk: token dimension mismatch");
  const auto slots = static_cast<Eigen::Index>(model.w_out.size());
  Eigen::Index writes = 0;
  for (auto p : ep.phases) writes += p == Phase::Write;
  if (writes > slots) throw std::invalid_argument("run_chunk: more write steps than readout slots");

  const double norm = 1.0 / static_cast<double>(std::max<Eigen::Index>(writes, 1) * ep.targets.cols());
  std::vector<StepRecord> rec(steps);
  std::vector<Mat> states;  // S_0 .. S_steps
  states.reserve(steps + 1);
  states.push_back(s0);
  ChunkOutput out;
  out.g.resize(steps);
  std::vector<Vec> dy;
  int slot = 0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    StepRecord& r = rec[t];
    const Mat& s = states.back();
    r.u = model.w_in * ep.inputs.row(t).transpose();
    r.pool_act = ((s * model.w_pool.transpose()).rowwise() + model.b_pool.transpose()).array().tanh();
    Vec z(d + model.w_pool.rows());
    z << r.u, r.pool_act.colwise().mean().transpose();
    const double g = model.salience.forward(z, grads ? &r.tape : nullptr)(0);
    double g_used = g;
    r.zoh = bank.get(g, g_used);
    out.g(t) = g_used;
    Mat next = bank.lower_triangular() ? Mat(s * r.zoh->a_d.transpose().triangularView<Eigen::Upper>())
                                       : Mat(s * r.zoh->a_d.transpose());
    next.noalias() += r.u * r.zoh->b_d.transpose();
    if (!next.allFinite()) throw NumericError("run_chunk: non-finite state");
    states.push_back(std::move(next));
    if (ep.phases[t] == Phase::Write) {
      r.slot = slot;
      Vec y = model.w_out[slot] * states.back().reshaped() + model.b_out[slot];
      const Vec e = y - ep.targets.row(t).transpose();
      out.loss += e.squaredNorm() * norm;
      dy.push_back(2.0 * norm * e);
      out.writes.push_back(std::move(y));
      ++slot;
    }
  }
  out.final_state = nn::detach(states.back());
  if (keep_states) out.states.assign(states.begin() + 1, states.end());
  if (!grads) return out;

  const Mat& a = bank.continuous().a;
  const Vec& b = bank.continuous().b;
  const double dt = bank.dt();
  const bool tri = bank.lower_triangular();
  Mat ds = Mat::Zero(d, n);  // dL/dS_{t+1}
  int write_idx = static_cast<int>(dy.size());
  for (Eigen::Index t = steps; t-- > 0;) {
    StepRecord& r = rec[t];
    const Mat& s_next = states[t + 1];
    const Mat& s = states[t];
    if (r.slot >= 0) {
      const Vec& e = dy[--write_idx];
      grads->w_out[r.slot].noalias() += e * s_next.reshaped().transpose();
      grads->b_out[r.slot] += e;
      ds.reshaped() += model.w_out[r.slot].transpose() * e;
    }
    // dS_{t+1}/dg = dt (S_{t+1} A^T + u b^T)
    const Mat sa = tri ? Mat(s_next * a.transpose().triangularView<Eigen::Upper>()) : Mat(s_next * a.transpose());
    const double dg = dt * ((ds.array() * sa.array()).sum() + (ds * b).dot(r.u));
    const Vec dz = model.salience.backward(r.tape, Vec::Constant(1, dg), grads->salience);
    Vec du = ds * r.zoh->b_d + dz.head(d);
    grads->w_in.noalias() += du * ep.inputs.row(t);
    // pooled = mean_j tanh(W_pool s_j + b)
    const Vec dpool = dz.tail(model.w_pool.rows()) / static_cast<double>(d);
    const Mat dpre = (1.0 - r.pool_act.array().square()).matrix() * dpool.asDiagonal();  // d x P
    grads->w_pool.noalias() += dpre.transpose() * s;
    grads->b_pool += dpre.colwise().sum().transpose();
    Mat ds_prev = tri ? Mat(ds * r.zoh->a_d.triangularView<Eigen::Lower>()) : Mat(ds * r.zoh->a_d);
    ds_prev.noalias() += dpre * model.w_pool;
    ds = std::move(ds_prev);
  }
  return out;
}

int nearest_token(const Mat& tokens, int count, const Vec& v) {
  int best = 0;
  double best_sim = -2.0;
  const double vn = v.norm();
  for (int i = 0; i < count; ++i) {
    const double sim = vn > 0 ? tokens.row(i).dot(v) / (tokens.row(i).norm() * vn) : 0.0;
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return best;
}

Mat slot_functional_norms(const SalienceCopyModel& model, const SelectiveCopyConfig& cfg, const Vec& g,
                          ZohBank& bank) {
  const int inputs = cfg.layout.per_episode + cfg.layout.distractors;
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto slots = static_cast<Eigen::Index>(model.w_out.size());
  if (g.size() < inputs + slots) throw std::invalid_argument("slot_functional_norms: salience trace too short");
  std::vector<ZohBank::Entry> zoh(static_cast<std::size_t>(g.size()));
  for (Eigen::Index t = 0; t < g.size(); ++t) {
    double used = 0.0;
    zoh[t] = bank.get(g(t), used);
  }
  Mat out = Mat::Zero(inputs, slots);
  for (int i = 0; i < inputs; ++i) {
    // Unit input held over step i, carried to the state read by each slot.
    Vec v = zoh[i]->b_d;
    for (Eigen::Index t = i + 1; t < inputs + slots; ++t) {
      v = zoh[t]->a_d * v;
      const Eigen::Index k = t - inputs;
      if (k < 0) continue;
      Mat f = Mat::Zero(model.w_out[k].rows(), d);
      for (Eigen::Index c = 0; c < cfg.n; ++c) f.noalias() += v(c) * model.w_out[k].middleCols(c * d, d);
      out(i, k) = (f * model.w_in).norm();
    }
  }
  return out;
}

SalienceEval evaluate_selective_copy(const SalienceCopyModel& model, const Mat& tokens,
                                     const SelectiveCopyConfig& cfg, ZohBank& bank,
                                     std::uint64_t eval_seed) {
  Rng rng(eval_seed, 0x6576616cULL);
  Mat s = Mat::Zero(cfg.d_model, cfg.n);
  SalienceEval ev;
  long hits = 0, total = 0, n_inf = 0, n_uninf = 0, n_write = 0;
  double g_inf = 0, g_uninf = 0, g_write = 0;
  for (int e = 0; e < cfg.eval_episodes; ++e) {
    const Episode ep = selective_copy_episode(tokens, rng, cfg.layout);
    const ChunkOutput out = run_chunk(model, ep, s, bank, nullptr);
    s = out.final_state;
    std::size_t w = 0;
    for (Eigen::Index t = 0; t < ep.length(); ++t) {
      switch (ep.phases[t]) {
        case Phase::Informative: g_inf += out.g(t); ++n_inf; break;
        case Phase::Uninformative: g_uninf += out.g(t); ++n_uninf; break;
        case Phase::Write:
          g_write += out.g(t);
          ++n_write;
          hits += nearest_token(tokens, cfg.layout.informative, out.writes[w++]) == ep.target_ids[t];
          ++total;
          break;
        default: break;
      }
    }
    if (e == cfg.eval_episodes - 1) {
      const Mat norms = slot_functional_norms(model, cfg, out.g, bank);
      std::vector<int> positions;
      for (Eigen::Index t = 0; t < ep.length(); ++t)
        if (ep.phases[t] == Phase::Informative) positions.push_back(static_cast<int>(t));
      int slot_hits = 0;
      for (Eigen::Index k = 0; k < norms.cols(); ++k) {
        Eigen::Index arg;
        norms.col(k).maxCoeff(&arg);
        slot_hits += static_cast<int>(arg) == positions[k];
      }
      ev.functional_argmax_hits = slot_hits;
    }
  }
  ev.accuracy = total ? static_cast<double>(hits) / total : 0.0;
  ev.mean_g_informative = n_inf ? g_inf / n_inf : 0.0;
  ev.mean_g_uninformative = n_uninf ? g_uninf / n_uninf : 0.0;
  ev.mean_g_write = n_write ? g_write / n_write : 0.0;
  return ev;
}

namespace {

Mat dump_table(const SalienceCopyModel& model, const SelectiveCopyConfig& cfg, const Vec& g, ZohBank& bank) {
  const HippoSpec spec{Family::LegS, cfg.n, cfg.timescale};
  const WarpMap map = warp(g, cfg.dt);
  const Mat norms = slot_functional_norms(model, cfg, g, bank);
  const Eigen::Index steps = g.size();
  const int inputs = cfg.layout.per_episode + cfg.layout.distractors;
  Vec grid(steps);
  for (Eigen::Index i = 0; i < steps; ++i) grid(i) = (i + 0.5) * cfg.dt;
  const Vec density = induced_measure(spec, map, map.end_time(), grid);
  Mat table = Mat::Zero(steps, 3 + norms.cols());
  for (Eigen::Index i = 0; i < steps; ++i) {
    table(i, 0) = grid(i);
    table(i, 1) = g(i);
    table(i, 2) = density(i);
    if (i < inputs) table.row(i).tail(norms.cols()) = norms.row(i);
  }
  return table;
}

}  // namespace

SelectiveCopyResult run_selective_copy(const SelectiveCopyConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng token_rng = root.fork(1);
  Rng init_rng = root.fork(2);
  Rng train_rng = root.fork(3);
  const std::uint64_t eval_seed = root.fork(4).next();

  SelectiveCopyResult res;
  res.tokens = make_token_table(cfg.layout.table_size(), cfg.token_dim, token_rng);
  res.model = SalienceCopyModel(cfg, init_rng);
  SalienceCopyModel grads = res.model.zeros_like();
  const nn::ParamList params = res.model.params();
  const nn::ParamList grad_params = grads.params();
  nn::AdamWState opt;
  opt.config.lr = cfg.lr;
  opt.config.weight_decay = cfg.weight_decay;

  const HippoSpec spec{Family::LegS, cfg.n, cfg.timescale};
  ZohBank bank(make_hippo(spec), cfg.dt, cfg.exp_cache_bins, cfg.g_lo, cfg.g_max);

  Mat s = Mat::Zero(cfg.d_model, cfg.n);
  double loss_acc = 0.0;
  long loss_count = 0;
  for (long ep_idx = 1; ep_idx <= cfg.episodes; ++ep_idx) {
    const Episode ep = selective_copy_episode(res.tokens, train_rng, cfg.layout);
    nn::zero(grad_params);
    const ChunkOutput out = run_chunk(res.model, ep, s, bank, &grads);
    s = out.final_state;
    nn::adamw_step(params, grad_params, opt);
    loss_acc += out.loss;
    ++loss_count;
    if (ep_idx % cfg.eval_every == 0 || ep_idx == cfg.episodes) {
      const SalienceEval ev = evaluate_selective_copy(res.model, res.tokens, cfg, bank, eval_seed);
      res.rows.push_back({ep_idx, loss_acc / loss_count, ev.accuracy, ev.mean_g_informative,
                          ev.mean_g_uninformative});
      loss_acc = 0.0;
      loss_count = 0;
      Rng dump_rng(eval_seed, 0x64756d70ULL);
      const Episode dump_ep = selective_copy_episode(res.tokens, dump_rng, cfg.layout);
      const ChunkOutput dump_out = run_chunk(res.model, dump_ep, Mat::Zero(cfg.d_model, cfg.n), bank, nullptr);
      res.dumps.push_back({ep_idx, dump_table(res.model, cfg, dump_out.g, bank)});
      res.final_eval = ev;
    }
  }
  return res;
}

}  // namespace hippozoo
