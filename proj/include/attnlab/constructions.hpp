#ifndef ATTNLAB_CONSTRUCTIONS_HPP
#define ATTNLAB_CONSTRUCTIONS_HPP

#include <cmath>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "attnlab/linalg.hpp"
#include "attnlab/model.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

// ---------------------------------------------------------------------------
// Attention gadgets

/// W_QK whose positional block is alpha, so sigma(H^T W_QK H) = alpha for any token content.
inline Matrix instructive_attention(const Matrix& alpha, const ModelConfig& cfg) {
  require_dims(alpha.rows() == cfg.n_positions && alpha.cols() == cfg.n_positions,
               "instructive_attention: alpha must be n x n");
  require((alpha.array() >= 0.0).all(), "instructive_attention: alpha must be entrywise nonnegative");
  Matrix w = Matrix::Zero(cfg.d_hidden, cfg.d_hidden);
  w.block(cfg.positional_offset(), cfg.positional_offset(), cfg.n_positions, cfg.n_positions) = alpha;
  return w;
}

/// Adds -strength at every masked (source, query) pair of the positional block.
inline Matrix constrained_attention(const Matrix& base_w_qk, const std::vector<std::pair<int, int>>& mask,
                                    double strength, const ModelConfig& cfg) {
  require(strength > 0.0, "constrained_attention: strength must be positive");
  require_dims(base_w_qk.rows() == cfg.d_hidden && base_w_qk.cols() == cfg.d_hidden,
               "constrained_attention: w_qk shape");
  Matrix w = base_w_qk;
  const int p = cfg.positional_offset();
  for (auto [i, j] : mask) {
    require_dims(i >= 0 && i < cfg.n_positions && j >= 0 && j < cfg.n_positions,
                 "constrained_attention: masked position out of range");
    w(p + i, p + j) -= strength;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Linear classifier for pairwise non-parallel vectors

inline void require_pairwise_nonparallel(const std::vector<Vector>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i].norm() > 0.0, "build_sc_classifier: zero vector at index " + std::to_string(i));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const double cosine = v[i].dot(v[j]) / (v[i].norm() * v[j].norm());
      require(std::abs(std::abs(cosine) - 1.0) > 1e-12,
              "build_sc_classifier: vectors " + std::to_string(i) + " and " + std::to_string(j) + " are parallel");
    }
  }
}

/// Minimum-norm w (as a row) with a.dot(w) = ta and b.dot(w) = tb.
inline Vector min_norm_pair(const Vector& a, const Vector& b, double ta, double tb) {
  Eigen::Matrix2d g;
  g << a.dot(a), a.dot(b), b.dot(a), b.dot(b);
  const double det = g.determinant();
  require(std::abs(det) > 1e-12 * g(0, 0) * g(1, 1), "build_sc_classifier: singular two-vector system");
  const Eigen::Vector2d c = g.inverse() * Eigen::Vector2d(ta, tb);
  return c[0] * a + c[1] * b;
}

/// N x d' matrix W with argmax(W v_i) = i for every i.
///
/// Built row by row: the first two rows solve w_a . v_b = delta_ab; each later row clones the
/// current winner on the new vector and adds a minimum-norm correction scaled to keep every
/// earlier margin.
inline Matrix build_sc_classifier(const std::vector<Vector>& vectors) {
  require(!vectors.empty(), "build_sc_classifier: no vectors");
  const auto dim = vectors.front().size();
  for (const auto& v : vectors) require_dims(v.size() == dim, "build_sc_classifier: ragged vectors");
  require_pairwise_nonparallel(vectors);
  const std::size_t n = vectors.size();
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), dim);
  if (n == 1) {
    w.row(0) = vectors[0].transpose() / vectors[0].squaredNorm();
    return w;
  }
  w.row(0) = min_norm_pair(vectors[0], vectors[1], 1.0, 0.0).transpose();
  w.row(1) = min_norm_pair(vectors[0], vectors[1], 0.0, 1.0).transpose();
  for (std::size_t k = 2; k < n; ++k) {
    const auto rows = static_cast<Eigen::Index>(k);
    const Vector scores = w.topRows(rows) * vectors[k];
    const int ik = argmax(scores);
    const Vector delta0 = min_norm_pair(vectors[static_cast<std::size_t>(ik)], vectors[k], -1.0, 1.0);
    double scale = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<int>(j) == ik) continue;
      const double eps = w.row(static_cast<Eigen::Index>(j)).dot(vectors[j]) - w.row(ik).dot(vectors[j]);
      require(eps > 0.0, "build_sc_classifier: lost margin on an earlier vector");
      scale = std::max(scale, 2.0 * std::abs(delta0.dot(vectors[j])) / eps);
    }
    w.row(rows) = w.row(ik) + delta0.transpose() / scale;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  std::size_t size = 0;
  std::size_t correct = 0;
  double min_margin = std::numeric_limits<double>::infinity();

  double accuracy() const { return size == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(size); }
};

/// Accuracy and the smallest (target logit - best other logit) over the dataset.
inline Evaluation evaluate(const Model& model, const Dataset& ds) {
  Evaluation e;
  for (const auto& ex : ds.examples) {
    const Vector o = forward(model, ex.tokens);
    double other = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < o.size(); ++c)
      if (c != ex.target) other = std::max(other, o[c]);
    if (o.size() > 1) e.min_margin = std::min(e.min_margin, o[ex.target] - other);
    if (argmax(o) == ex.target) ++e.correct;
    ++e.size;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Memorization: one layer, n heads

inline ModelConfig sc_config(const Vocabulary& vocab, int seq_len, int n_classes) {
  const int d = vocab.d_token();
  const int n = seq_len + 1;
  return {d, n, std::max(n * d, d + n), 1, {n}, Activation::relu, n_classes};
}

/// One-layer model whose last column is [x_0; ...; x_{k-1}; 0], followed by the incremental classifier.
inline Model build_sc_model(const Dataset& ds) {
  require(!ds.examples.empty(), "build_sc_model: empty dataset");
  const int n = ds.seq_len();
  const int k = n - 1;
  require(k >= 1, "build_sc_model: sequences need at least one token before the sign");
  std::set<Sequence> seen;
  for (const auto& ex : ds.examples) {
    require(static_cast<int>(ex.tokens.size()) == n, "build_sc_model: ragged sequences");
    require(seen.insert(ex.tokens).second, "build_sc_model: duplicate sequences");
    require(ex.tokens.back() == ds.vocab.sign(), "build_sc_model: sequences must end with the sign token");
  }
  const ModelConfig cfg = sc_config(ds.vocab, k, ds.n_classes);
  const int d = cfg.d_token;
  Model m = Model::zeros(cfg);
  for (int i = 0; i < k; ++i) {
    Matrix alpha = Matrix::Zero(n, n);
    alpha(i, n - 1) = 1.0;
    auto& head = m.layers[0][static_cast<std::size_t>(i)];
    head.w_qk = instructive_attention(alpha, cfg);
    for (int r = 0; r < d; ++r) head.w_v(i * d + r, r) = static_cast<double>(n);
  }
  auto& last = m.layers[0][static_cast<std::size_t>(k)];
  last.w_qk = instructive_attention(Matrix::Identity(n, n), cfg);
  last.w_v = -static_cast<double>(n) * Matrix::Identity(cfg.d_hidden, cfg.d_hidden);

  std::vector<Vector> vecs;
  for (const auto& ex : ds.examples) {
    const Representation h = final_hidden(m, ex.tokens);
    vecs.push_back(h.data.col(n - 1));
  }
  const Matrix w = build_sc_classifier(vecs);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const int y = ds.examples[i].target;
    require(y >= 0 && y < ds.n_classes, "build_sc_model: target out of range");
    m.w_out.row(y) = w.row(static_cast<Eigen::Index>(i));
  }
  return m;
}

// ---------------------------------------------------------------------------
// In-context QA: copy then match

/// Zero-diagonal all-ones blocks: k triples followed by the final question-sign pair.
inline Matrix icqa_copy_alpha(int k) {
  const int n = 3 * k + 2;
  Matrix a = Matrix::Zero(n, n);
  auto block = [&](int start, int size) {
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        if (i != j) a(start + i, start + j) = 1.0;
  };
  for (int t = 0; t < k; ++t) block(3 * t, 3);
  block(3 * k, 2);
  return a;
}

inline Model build_icqa_model(const Vocabulary& vocab, int k) {
  require(k >= 1, "build_icqa_model: k must be >= 1");
  require(vocab.n_question >= 1 && vocab.n_answer >= 1, "build_icqa_model: vocabulary needs questions and answers");
  const int d = vocab.d_token();
  const int n = 3 * k + 2;
  const ModelConfig cfg{d, n, d + n, 2, {1, 1}, Activation::relu, vocab.n_answer};
  Model m = Model::zeros(cfg);
  auto& l1 = m.layers[0][0];
  l1.w_qk = instructive_attention(icqa_copy_alpha(k), cfg);
  l1.w_v = Matrix::Identity(cfg.d_hidden, cfg.d_hidden);
  auto& l2 = m.layers[1][0];
  l2.w_qk.topLeftCorner(vocab.n_question, vocab.n_question).setIdentity();
  l2.w_v = Matrix::Identity(cfg.d_hidden, cfg.d_hidden);
  for (int a = 0; a < vocab.n_answer; ++a) m.w_out(a, vocab.answer(a)) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Template matching: parse then map

/// sum_i row[i] * 3^(len-1-i).
inline double ternary_code(const std::vector<int>& row) {
  require(row.size() <= 30, "ternary_code: more than 30 digits");
  double v = 0.0;
  for (int x : row) v = 3.0 * v + x;
  return v;
}

/// l x l matrix with 2 on the diagonal and 1 where two positions share a wildcard.
inline Matrix template_matrix(const Template& t) {
  const int l = t.length();
  Matrix f = Matrix::Zero(l, l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j)
      f(i, j) = (i == j ? 1.0 : 0.0) + (t.symbols[static_cast<std::size_t>(i)] == t.symbols[static_cast<std::size_t>(j)] ? 1.0 : 0.0);
  return f;
}

inline ModelConfig tm_config(int l, int alphabet_size) {
  const Vocabulary v{alphabet_size, 0};
  const int d = v.d_token();
  const int n = l + 1;
  return {d, n, d + n, 2, {1, 1}, Activation::relu, static_cast<int>(enumerate_templates(l).size())};
}

inline Model build_tm_model(int l, int alphabet_size) {
  require(l >= 1, "build_tm_model: l must be >= 1");
  require(l <= 30, "build_tm_model: l > 30 overflows exact base-3 codes");
  require(alphabet_size >= l, "build_tm_model: alphabet smaller than l");
  const ModelConfig cfg = tm_config(l, alphabet_size);
  const int d = cfg.d_token;
  const int n = cfg.n_positions;
  Model m = Model::zeros(cfg);
  auto& l1 = m.layers[0][0];
  l1.w_qk.topLeftCorner(d, d).setIdentity();
  l1.w_v.block(d, d, n, n).setIdentity();
  Matrix alpha = Matrix::Zero(n, n);
  double w = 1.0;
  for (int i = l - 1; i >= 0; --i, w *= 3.0) alpha(i, n - 1) = w;
  auto& l2 = m.layers[1][0];
  l2.w_qk = instructive_attention(alpha, cfg);
  l2.w_v.block(d, d, n, n).setIdentity();

  const auto templates = enumerate_templates(l);
  std::vector<Vector> codes;
  std::vector<int> identity(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) identity[static_cast<std::size_t>(i)] = i;
  for (const auto& t : templates) {
    Sequence s = substitute(t, {std::vector<int>(identity.begin(), identity.begin() + t.n_wildcards())});
    s.push_back(alphabet_size);
    codes.push_back(final_hidden(m, s).data.col(n - 1));
  }
  m.w_out = build_sc_classifier(codes);
  return m;
}

// ---------------------------------------------------------------------------
// In-context template matching: parse, copy, match

/// Position bookkeeping for the in-context template-matching layout.
struct IctmLayout {
  int l = 0;
  int k = 0;
  Vocabulary vocab;

  int n() const { return k * (l + 2) + l + 1; }
  int d() const { return vocab.d_token(); }
  int d_hidden() const { return d() + n() + l + 2; }
  int scratch() const { return d() + n(); }
  int block_of(int j) const { return std::min(j / (l + 2), k); }
  int offset_of(int j) const { return j - block_of(j) * (l + 2); }
  bool is_question(int j) const { return offset_of(j) < l; }
  int answer_pos(int t) const { return t * (l + 2) + l + 1; }
  int query_pos(int o) const { return k * (l + 2) + o; }
};

inline constexpr double kMaskStrength = 20.0;

inline Model build_ictm_model(int l, int k, const Vocabulary& vocab) {
  require(l >= 1 && k >= 1, "build_ictm_model: l and k must be >= 1");
  require(vocab.n_question >= l && vocab.n_answer >= k, "build_ictm_model: vocabulary too small");
  const IctmLayout lay{l, k, vocab};
  const int n = lay.n();
  const int d = lay.d();
  const int dh = lay.d_hidden();
  const int s0 = lay.scratch();
  const ModelConfig cfg{d, n, dh, 3, {1, 1, 2 * l}, Activation::relu, vocab.n_answer};
  Model m = Model::zeros(cfg);

  // Layer 1: same-word matching inside each block, fingerprint rows written to scratch.
  Matrix base = Matrix::Zero(dh, dh);
  base.topLeftCorner(vocab.n_question, vocab.n_question).setIdentity();
  std::vector<std::pair<int, int>> mask;
  for (int i = 0; i < n; ++i) {
    if (lay.is_question(i)) base(d + i, d + i) = 1.0;
    for (int j = 0; j < n; ++j)
      if (lay.block_of(i) != lay.block_of(j)) mask.emplace_back(i, j);
  }
  auto& l1 = m.layers[0][0];
  l1.w_qk = constrained_attention(base, mask, kMaskStrength, cfg);
  for (int j = 0; j < n; ++j)
    if (lay.is_question(j)) l1.w_v(s0 + lay.offset_of(j), d + j) = 1.0;

  // Layer 2: copy each block's answer onto its question columns, subtract the query fingerprint,
  // and gather all answers at the last column.
  Matrix alpha = Matrix::Zero(n, n);
  for (int i = 0; i < k * (l + 2); ++i) {
    if (!lay.is_question(i)) continue;
    alpha(lay.answer_pos(lay.block_of(i)), i) = 1.0;
    alpha(lay.query_pos(lay.offset_of(i)), i) = 1.0;
  }
  for (int t = 0; t < k; ++t) alpha(lay.answer_pos(t), n - 1) = 1.0;
  auto& l2 = m.layers[1][0];
  l2.w_qk = instructive_attention(alpha, cfg);
  for (int a = 0; a < vocab.n_answer; ++a) l2.w_v(vocab.answer(a), vocab.answer(a)) = 1.0;
  for (int r = 0; r < l + 2; ++r) l2.w_v(s0 + r, s0 + r) = -1.0;

  // Layer 3: |scratch| read by paired +/- heads from the sign column, subtracting mismatched answers.
  const double gain = static_cast<double>(n);
  for (int h = 0; h < 2 * l; ++h) {
    auto& head = m.layers[2][static_cast<std::size_t>(h)];
    head.w_qk(s0 + (h % l), vocab.sign()) = h < l ? 1.0 : -1.0;
    for (int a = 0; a < vocab.n_answer; ++a) head.w_v(vocab.answer(a), vocab.answer(a)) = -gain;
  }
  for (int a = 0; a < vocab.n_answer; ++a) m.w_out(a, vocab.answer(a)) = 1.0;
  return m;
}

/// Coefficient of each context answer in the final answer block: 1 for the matching block,
/// 1 - gamma_t for the others. Returns gamma_t for every non-matching block.
inline std::vector<double> ictm_gammas(const Model& m, const TaskExample& ex, const Vocabulary& vocab) {
  const Representation h = final_hidden(m, ex.tokens);
  const auto pp = ex.meta.at("pi_prime").get<std::vector<int>>();
  const int c = ex.meta.at("c").get<int>();
  std::vector<double> g;
  for (std::size_t t = 0; t < pp.size(); ++t) {
    if (static_cast<int>(t) == c) continue;
    g.push_back(1.0 - h.data(vocab.answer(pp[t]), h.cols() - 1));
  }
  return g;
}

}  // namespace attnlab

#endif  // ATTNLAB_CONSTRUCTIONS_HPP
