#ifndef ATTNLAB_TRAINING_HPP
#define ATTNLAB_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "attnlab/constructions.hpp"
#include "attnlab/linalg.hpp"
#include "attnlab/model.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

enum class InitMode { uniform01, constructed_first_layer };
enum class ValueInit { all_ones, identity };

inline std::string to_string(InitMode m) { return m == InitMode::uniform01 ? "uniform01" : "constructed_first_layer"; }
inline std::string to_string(ValueInit v) { return v == ValueInit::all_ones ? "all_ones" : "identity"; }

inline InitMode parse_init_mode(const std::string& s) {
  if (s == "uniform01") return InitMode::uniform01;
  if (s == "constructed_first_layer") return InitMode::constructed_first_layer;
  throw PreconditionError("unknown init mode: " + s);
}

inline ValueInit parse_value_init(const std::string& s) {
  if (s == "all_ones") return ValueInit::all_ones;
  if (s == "identity") return ValueInit::identity;
  throw PreconditionError("unknown value init: " + s);
}

struct TrainConfig {
  double learning_rate = 0.05;
  int steps = 20000;
  int batch_size = 32;
  std::uint64_t seed = 0;
  InitMode init = InitMode::uniform01;
  ValueInit value_init = ValueInit::all_ones;
  double qk_init_scale = 1.0;  // W_QK entries drawn from [0, qk_init_scale)
  int eval_every = 100;
  int checkpoint_every = 0;  // 0 disables intermediate checkpoints

  void validate() const {
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
    require(steps >= 0, "TrainConfig: steps must be >= 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
    require(qk_init_scale >= 0.0, "TrainConfig: qk_init_scale must be >= 0");
    require(checkpoint_every >= 0, "TrainConfig: checkpoint_every must be >= 0");
  }
};

struct MetricsRow {
  int step = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
};

/// -log softmax(logits)[target], evaluated with the max logit subtracted.
inline double cross_entropy(const Vector& logits, int target) {
  require(target >= 0 && target < logits.size(), "cross_entropy: target out of range");
  const double mx = logits.maxCoeff();
  return std::log((logits.array() - mx).exp().sum()) - (logits[target] - mx);
}

inline Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

// ---------------------------------------------------------------------------
// Initialization

enum class TaskKind { sc, icqa, tm, ictm, toy_icqa };

inline std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::sc: return "sc";
    case TaskKind::icqa: return "icqa";
    case TaskKind::tm: return "tm";
    case TaskKind::ictm: return "ictm";
    case TaskKind::toy_icqa: return "toy-icqa";
  }
  return "sc";
}

inline TaskKind parse_task(const std::string& s) {
  if (s == "sc") return TaskKind::sc;
  if (s == "icqa") return TaskKind::icqa;
  if (s == "tm") return TaskKind::tm;
  if (s == "ictm") return TaskKind::ictm;
  if (s == "toy-icqa") return TaskKind::toy_icqa;
  throw PreconditionError("unknown task: " + s);
}

/// Which construction supplies the first-layer pattern.
struct TaskLayout {
  TaskKind kind = TaskKind::sc;
  Vocabulary vocab;
  int l = 0;
  int k = 0;
};

/// Layer-1 W_QK of the matching construction, embedded into a d_hidden x d_hidden matrix.
inline Matrix first_layer_pattern(const TaskLayout& task, const ModelConfig& cfg) {
  Model built;
  switch (task.kind) {
    case TaskKind::icqa:
    case TaskKind::toy_icqa: built = build_icqa_model(task.vocab, task.k); break;
    case TaskKind::tm: built = build_tm_model(task.l, task.vocab.n_question); break;
    case TaskKind::ictm: built = build_ictm_model(task.l, task.k, task.vocab); break;
    case TaskKind::sc: throw PreconditionError("init_model: no constructed first layer for the memorization task");
  }
  require_dims(built.config.d_token == cfg.d_token && built.config.n_positions == cfg.n_positions,
               "init_model: task layout does not match the model config");
  require_dims(built.config.d_hidden <= cfg.d_hidden, "init_model: d_hidden smaller than the construction needs");
  Matrix w = Matrix::Zero(cfg.d_hidden, cfg.d_hidden);
  const auto d = built.config.d_hidden;
  w.topLeftCorner(d, d) = built.layers[0][0].w_qk;
  return w;
}

/// W_QK entries uniform on [0, qk_init_scale), W_V all ones (or identity), W_O uniform on [0, 1).
inline Model init_model(const ModelConfig& cfg, const TaskLayout& task, const TrainConfig& tc) {
  cfg.validate();
  Model m = Model::zeros(cfg);
  Rng rng(tc.seed);
  const auto d = static_cast<Eigen::Index>(cfg.d_hidden);
  Matrix first;
  if (tc.init == InitMode::constructed_first_layer) first = first_layer_pattern(task, cfg);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (auto& h : m.layers[l]) {
      h.w_qk = rng.uniform_matrix(d, d, 0.0, 1.0) * tc.qk_init_scale;
      if (l == 0 && tc.init == InitMode::constructed_first_layer) h.w_qk = first;
      h.w_v = tc.value_init == ValueInit::all_ones ? Matrix(Matrix::Ones(d, d)) : Matrix(Matrix::Identity(d, d));
    }
  }
  m.w_out = rng.uniform_matrix(cfg.n_classes, d, 0.0, 1.0);
  return m;
}

// ---------------------------------------------------------------------------
// Gradients

/// Gradient container with the shape of the model.
using Gradients = Model;

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

inline Gradients zeros_like(const Model& m) { return Model::zeros(m.config); }

/// Adds the gradient of cross_entropy(forward(model, tokens), target) to g; returns the loss.
inline double accumulate_gradient(const Model& model, std::span<const int> tokens, int target, Gradients& g,
                                  double weight = 1.0) {
  const Activation act = model.config.activation;
  struct HeadCache {
    Matrix s, a, p;
  };
  std::vector<Matrix> hs;
  std::vector<std::vector<HeadCache>> caches;
  hs.push_back(encode_tokens(tokens, model.config).data);
  for (const auto& layer : model.layers) {
    const Matrix& h = hs.back();
    Matrix next = h;
    std::vector<HeadCache> lc;
    const double inv_m = 1.0 / static_cast<double>(layer.size());
    for (const auto& head : layer) {
      HeadCache c;
      c.s = attention_scores(h, head.w_qk);
      c.a = activate(c.s, act);
      c.p = head.w_v * h;
      next.noalias() += inv_m * (c.p * c.a);
      lc.push_back(std::move(c));
    }
    caches.push_back(std::move(lc));
    hs.push_back(std::move(next));
  }
  const Matrix& top = hs.back();
  const Eigen::Index last = top.cols() - 1;
  const Vector logits = model.w_out * top.col(last);
  const double loss = cross_entropy(logits, target);
  Vector dlogits = softmax(logits);
  dlogits[target] -= 1.0;
  dlogits *= weight;
  g.w_out.noalias() += dlogits * top.col(last).transpose();
  Matrix dh = Matrix::Zero(top.rows(), top.cols());
  dh.col(last) = model.w_out.transpose() * dlogits;

  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& layer = model.layers[li];
    const Matrix& h = hs[li];
    const double inv_m = 1.0 / static_cast<double>(layer.size());
    Matrix dprev = dh;
    for (std::size_t hi = 0; hi < layer.size(); ++hi) {
      const auto& head = layer[hi];
      const HeadCache& c = caches[li][hi];
      const Matrix dp = inv_m * (dh * c.a.transpose());
      const Matrix da = inv_m * (c.p.transpose() * dh);
      g.layers[li][hi].w_v.noalias() += dp * h.transpose();
      dprev.noalias() += head.w_v.transpose() * dp;
      Matrix ds(da.rows(), da.cols());
      if (act == Activation::relu) {
        ds = (c.s.array() > 0.0).select(da, 0.0);
      } else {
        for (Eigen::Index k = 0; k < da.cols(); ++k) {
          const double dot = c.a.col(k).dot(da.col(k));
          ds.col(k) = c.a.col(k).array() * (da.col(k).array() - dot);
        }
      }
      const Matrix hds = h * ds;
      g.layers[li][hi].w_qk.noalias() += hds * h.transpose();
      dprev.noalias() += head.w_qk * h * ds.transpose();
      dprev.noalias() += head.w_qk.transpose() * hds;
    }
    dh = std::move(dprev);
  }
  return loss;
}

/// Mean cross-entropy over the batch and its exact gradient (ReLU subgradient 0 at 0).
inline LossAndGrad backward(const Model& model, std::span<const TaskExample* const> batch) {
  require(!batch.empty(), "backward: empty batch");
  LossAndGrad r{0.0, zeros_like(model)};
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const TaskExample* ex : batch) r.loss += w * accumulate_gradient(model, ex->tokens, ex->target, r.grad, w);
  return r;
}

inline LossAndGrad backward(const Model& model, const std::vector<TaskExample>& batch) {
  std::vector<const TaskExample*> ptrs;
  for (const auto& ex : batch) ptrs.push_back(&ex);
  return backward(model, std::span<const TaskExample* const>(ptrs));
}

/// theta <- theta - lr * g.
inline void sgd_step(Model& model, const Gradients& g, double lr) {
  require(g.layers.size() == model.layers.size(), "sgd_step: layer count mismatch");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    require(g.layers[l].size() == model.layers[l].size(), "sgd_step: head count mismatch");
    for (std::size_t h = 0; h < model.layers[l].size(); ++h) {
      require_dims(g.layers[l][h].w_qk.rows() == model.layers[l][h].w_qk.rows(), "sgd_step: shape mismatch");
      model.layers[l][h].w_qk -= lr * g.layers[l][h].w_qk;
      model.layers[l][h].w_v -= lr * g.layers[l][h].w_v;
    }
  }
  require_dims(g.w_out.rows() == model.w_out.rows() && g.w_out.cols() == model.w_out.cols(), "sgd_step: w_out shape");
  model.w_out -= lr * g.w_out;
}

// ---------------------------------------------------------------------------
// Training loop

struct DatasetScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline DatasetScore score(const Model& m, const Dataset& ds) {
  DatasetScore s;
  if (ds.examples.empty()) return s;
  for (const auto& ex : ds.examples) {
    const Vector o = forward(m, ex.tokens);
    s.loss += cross_entropy(o, ex.target);
    s.accuracy += argmax(o) == ex.target ? 1.0 : 0.0;
  }
  s.loss /= static_cast<double>(ds.size());
  s.accuracy /= static_cast<double>(ds.size());
  return s;
}

struct TrainResult {
  Model model;
  std::vector<MetricsRow> metrics;
};

using CheckpointHook = std::function<void(int step, const Model&)>;

/// Plain SGD on shuffled epochs. Metrics rows at every eval_every steps and at the last step;
/// eval accuracy uses `eval` when it has examples, the training set otherwise.
inline TrainResult train(const Dataset& train_set, const Dataset& eval, Model model, const TrainConfig& tc,
                         const CheckpointHook& hook = {}) {
  tc.validate();
  require(!train_set.examples.empty(), "train: empty training set");
  model.validate();
  TrainResult r;
  Rng rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<const TaskExample*> order;
  for (const auto& ex : train_set.examples) order.push_back(&ex);
  std::size_t cursor = order.size();
  std::vector<const TaskExample*> batch;
  for (int step = 1; step <= tc.steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < tc.batch_size) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    const LossAndGrad lg = backward(model, batch);
    sgd_step(model, lg.grad, tc.learning_rate);
    if (step % tc.eval_every == 0 || step == tc.steps) {
      const DatasetScore tr = score(model, train_set);
      const double ev = eval.examples.empty() ? tr.accuracy : score(model, eval).accuracy;
      r.metrics.push_back({step, tr.loss, tr.accuracy, ev});
    }
    if (hook && tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0) hook(step, model);
  }
  r.model = std::move(model);
  return r;
}

inline TrainResult train(const Dataset& train_set, const ModelConfig& cfg, const TaskLayout& task,
                         const TrainConfig& tc, const Dataset& eval = {}) {
  return train(train_set, eval, init_model(cfg, task, tc), tc);
}

// ---------------------------------------------------------------------------
// Gradient checking

using GradientFn = std::function<LossAndGrad(const Model&, const std::vector<TaskExample>&)>;

inline LossAndGrad default_gradient(const Model& m, const std::vector<TaskExample>& b) { return backward(m, b); }

inline double batch_loss(const Model& m, const std::vector<TaskExample>& b) {
  double s = 0.0;
  for (const auto& ex : b) s += cross_entropy(forward(m, ex.tokens), ex.target);
  return s / static_cast<double>(b.size());
}

/// Every parameter matrix of the model in a fixed order: per layer per head (w_qk, w_v), then w_out.
inline std::vector<Matrix*> parameter_matrices(Model& m) {
  std::vector<Matrix*> out;
  for (auto& layer : m.layers)
    for (auto& h : layer) {
      out.push_back(&h.w_qk);
      out.push_back(&h.w_v);
    }
  out.push_back(&m.w_out);
  return out;
}

/// Smallest |score| over every head's pre-activation scores on the given input.
inline double min_abs_score(const Model& m, std::span<const int> tokens) {
  double best = std::numeric_limits<double>::infinity();
  Representation h = encode_tokens(tokens, m.config);
  for (const auto& layer : m.layers) {
    for (const auto& head : layer) best = std::min(best, attention_scores(h.data, head.w_qk).cwiseAbs().minCoeff());
    h = layer_forward(h, layer, m.config.activation);
  }
  return best;
}

inline constexpr double kGradFloor = 1e-6;

/// |a - b| / max(|a|, |b|, kGradFloor).
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kGradFloor});
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences against `grad_fn` on a seeded sample of at least `min_params` parameters
/// (all parameters when the model has fewer).
inline GradCheckResult grad_check(const Model& model, const std::vector<TaskExample>& batch, double eps,
                                  std::uint64_t seed, std::size_t min_params = 200,
                                  const GradientFn& grad_fn = default_gradient) {
  require(eps > 0.0, "grad_check: eps must be > 0");
  require(!batch.empty(), "grad_check: empty batch");
  Model probe = model;
  LossAndGrad lg = grad_fn(model, batch);
  auto params = parameter_matrices(probe);
  auto grads = parameter_matrices(lg.grad);
  std::vector<std::pair<std::size_t, Eigen::Index>> all;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (Eigen::Index i = 0; i < params[p]->size(); ++i) all.emplace_back(p, i);
  Rng rng(seed);
  rng.shuffle(all);
  if (all.size() > min_params) all.resize(min_params);
  GradCheckResult r;
  for (auto [p, i] : all) {
    double& x = params[p]->data()[i];
    const double orig = x;
    x = orig + eps;
    const double lp = batch_loss(probe, batch);
    x = orig - eps;
    const double lm = batch_loss(probe, batch);
    x = orig;
    const double fd = (lp - lm) / (2.0 * eps);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(fd, grads[p]->data()[i]));
    ++r.checked;
  }
  return r;
}

/// Model with entries iid uniform on [-range, range].
inline Model random_model(const ModelConfig& cfg, Rng& rng, double range = 0.5) {
  Model m = Model::zeros(cfg);
  const auto d = static_cast<Eigen::Index>(cfg.d_hidden);
  for (auto& layer : m.layers)
    for (auto& h : layer) {
      h.w_qk = rng.uniform_matrix(d, d, -range, range);
      h.w_v = rng.uniform_matrix(d, d, -range, range);
    }
  m.w_out = rng.uniform_matrix(cfg.n_classes, d, -range, range);
  return m;
}

struct GradSuiteResult {
  double worst = 0.0;
  int models = 0;
  std::vector<double> per_model;
};

/// grad_check over random models of depth 1..3 (cycled) for one activation.
/// ReLU models whose scores come within 1e-3 of a kink are redrawn.
inline GradSuiteResult grad_check_suite(Activation act, int n_models, std::uint64_t seed, double eps = 1e-5,
                                        const GradientFn& grad_fn = default_gradient) {
  GradSuiteResult out;
  Rng rng(seed);
  for (int i = 0; i < n_models; ++i) {
    const int depth = 1 + i % 3;
    const int d_token = 3, n = 4, d_hidden = 8;
    ModelConfig cfg{d_token, n, d_hidden, depth, std::vector<int>(static_cast<std::size_t>(depth), 1 + i % 2), act, 3};
    Model m;
    TaskExample ex;
    for (int attempt = 0;; ++attempt) {
      require(attempt < 1000, "grad_check_suite: could not draw a model away from ReLU kinks");
      m = random_model(cfg, rng);
      ex.tokens.clear();
      for (int j = 0; j < n; ++j) ex.tokens.push_back(static_cast<int>(rng.below(d_token)));
      ex.target = static_cast<int>(rng.below(3));
      if (act == Activation::softmax || min_abs_score(m, ex.tokens) >= 1e-3) break;
    }
    const auto r = grad_check(m, {ex}, eps, seed + static_cast<std::uint64_t>(i), 200, grad_fn);
    out.per_model.push_back(r.max_rel_error);
    out.worst = std::max(out.worst, r.max_rel_error);
    ++out.models;
  }
  return out;
}

}  // namespace attnlab

#endif  // ATTNLAB_TRAINING_HPP
