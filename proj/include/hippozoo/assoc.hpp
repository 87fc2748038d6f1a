#pragma once

// Orthogonal-polynomial associative memory: minimum-norm writes, kernel
// reads and the gated associative-recall model.

#include "hippozoo/hippo.hpp"
#include "hippozoo/nnkit.hpp"
#include "hippozoo/orthopoly.hpp"
#include "hippozoo/signals.hpp"

namespace hippozoo {

/// d_model memory functions m_j(x) = <C[j], phi(x)> on [0, 1].
struct AssocMemoryBank {
  Mat c;  // d_model x n_assoc
  OrthoBasis basis;

  AssocMemoryBank(int d_model, OrthoBasis address_basis);
  Vec read(double x) const;
};

/// C[j] += alpha (y[j] - m_j(x)) phi(x), alpha = g / (|phi(x)|^2 + eps).
void write(AssocMemoryBank& mem, double x_key, const Vec& y, double g_write, double eps);

Vec read(const AssocMemoryBank& mem, double x_query);

struct AssocRecallConfig {
  int token_dim = 24;
  AssocRecallLayout layout;
  int d_model = 32;
  int n_hippo = 32;
  double timescale = 2.0;
  double dt = 1.0;
  int n_assoc = 32;
  int gate_hidden = 256;
  double eps = 1e-6;
  double lr = 1e-3;
  double weight_decay = 0.01;
  long iterations = 20000;
  long eval_every = 1000;
  int eval_episodes = 512;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Encoder projection, address heads, gates, value and output maps.
struct AssocModel {
  Mat w_in;   // d_model x token_dim
  Vec w_key;  // over vec(S), column-major
  Vec b_key = Vec::Zero(1);
  Vec w_query;
  Vec b_query = Vec::Zero(1);
  nn::Mlp write_gate;  // vec(S) -> hidden (tanh) -> 1 (sigmoid), linear skip
  nn::Mlp out_gate;
  Mat w_value;  // d_model x d_model
  Mat w_out;    // token_dim x d_model

  AssocModel() = default;
  AssocModel(const AssocRecallConfig& cfg, Rng& rng);

  AssocModel zeros_like() const;
  nn::ParamList params();
};

struct AssocStepTrace {
  double x_key, x_query, g_write, g_out;
};

struct AssocRollout {
  double loss = 0.0;           // mean over steps and token dims
  Mat outputs;                 // steps x token_dim
  std::vector<AssocStepTrace> trace;
  std::vector<Mat> memories;   // C before each step's write, then the final C
};

/// One episode from (S, C) = (0, 0). With `grads` set, exact gradients of
/// the episode loss are accumulated.
AssocRollout run_assoc_episode(const AssocModel& model, const AssocRecallConfig& cfg,
                               const DiscreteLTI& encoder, const OrthoBasis& address_basis,
                               const Episode& episode, AssocModel* grads, bool keep_memories = false);

/// Nearest row of `tokens` by cosine similarity.
int nearest_row(const Mat& tokens, const Vec& v);

struct AssocRecallRow {
  long iteration;
  double loss;
  double recall_accuracy;
};

struct AssocRecallResult {
  std::vector<AssocRecallRow> rows;
  Mat address_dump;  // step, x_key, x_query, g_write, g_out
  Mat memory_dump;   // x, then m_j(x) before and after the final write
  double final_accuracy = 0.0;
  AssocModel model;
  Mat tokens;
};

double evaluate_assoc(const AssocModel& model, const AssocRecallConfig& cfg, const DiscreteLTI& encoder,
                      const OrthoBasis& address_basis, const Mat& tokens, std::uint64_t eval_seed);

AssocRecallResult run_assoc_recall(const AssocRecallConfig& cfg);

}  // namespace hippozoo
