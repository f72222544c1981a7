#ifndef ATTNLAB_DEPENDENCE_HPP
#define ATTNLAB_DEPENDENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "attnlab/linalg.hpp"
#include "attnlab/model.hpp"
#include "attnlab/tasks.hpp"

namespace attnlab {

/// Sequence of multisets: per position, token id -> count.
struct MultisetSequence {
  std::vector<std::map<int, std::int64_t>> positions;

  static MultisetSequence of(const Sequence& s, std::int64_t times = 1) {
    MultisetSequence m;
    m.positions.resize(s.size());
    if (times != 0)
      for (std::size_t i = 0; i < s.size(); ++i) m.positions[i][s[i]] = times;
    return m;
  }
  std::size_t length() const { return positions.size(); }
  bool operator==(const MultisetSequence&) const = default;
};

inline MultisetSequence combine(const MultisetSequence& x, const MultisetSequence& y) {
  require_dims(x.length() == y.length(), "combine: length mismatch");
  MultisetSequence out = x;
  for (std::size_t i = 0; i < y.length(); ++i)
    for (auto [tok, cnt] : y.positions[i]) out.positions[i][tok] += cnt;
  return out;
}

inline MultisetSequence combine(const Sequence& x, const Sequence& y) {
  return combine(MultisetSequence::of(x), MultisetSequence::of(y));
}

/// lambda (x) X: every token repeated lambda times.
inline MultisetSequence scale(std::int64_t lambda, const Sequence& x) {
  require(lambda >= 0, "scale: multiplicity must be nonnegative");
  return MultisetSequence::of(x, lambda);
}

/// True iff all sequences end with the same token and the positive and negative
/// lambda-weighted combinations agree at every position.
inline bool check_dependence(const std::vector<Sequence>& seqs, const std::vector<std::int64_t>& lambdas) {
  if (seqs.empty() || seqs.size() != lambdas.size()) return false;
  if (std::all_of(lambdas.begin(), lambdas.end(), [](std::int64_t l) { return l == 0; })) return false;
  const std::size_t n = seqs.front().size();
  if (n == 0) return false;
  for (const auto& s : seqs)
    if (s.size() != n || s.back() != seqs.front().back()) return false;
  MultisetSequence pos = MultisetSequence::of(Sequence(n, 0), 0);
  MultisetSequence neg = pos;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (lambdas[i] > 0) pos = combine(pos, scale(lambdas[i], seqs[i]));
    if (lambdas[i] < 0) neg = combine(neg, scale(-lambdas[i], seqs[i]));
  }
  return pos == neg;
}

/// Sequences with integer coefficients satisfying check_dependence.
struct DependenceWitness {
  std::vector<Sequence> sequences;
  std::vector<std::int64_t> lambdas;

  DependenceWitness(std::vector<Sequence> s, std::vector<std::int64_t> l)
      : sequences(std::move(s)), lambdas(std::move(l)) {
    require(check_dependence(sequences, lambdas), "DependenceWitness: sequences are not dependent under lambdas");
  }

  json to_json() const { return {{"sequences", sequences}, {"lambdas", lambdas}}; }
};

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Basis of the right nullspace of an exact rational matrix, one vector per free column.
inline std::vector<std::vector<Rational>> rational_nullspace(std::vector<std::vector<Rational>> a, std::size_t cols) {
  std::vector<std::size_t> pivot_cols;
  std::size_t row = 0;
  for (std::size_t c = 0; c < cols && row < a.size(); ++c) {
    std::size_t p = row;
    while (p < a.size() && a[p][c] == 0) ++p;
    if (p == a.size()) continue;
    std::swap(a[row], a[p]);
    const Rational inv = 1 / a[row][c];
    for (auto& x : a[row]) x *= inv;
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (r == row || a[r][c] == 0) continue;
      const Rational f = a[r][c];
      for (std::size_t k = 0; k < cols; ++k) a[r][k] -= f * a[row][k];
    }
    pivot_cols.push_back(c);
    ++row;
  }
  std::vector<std::vector<Rational>> basis;
  for (std::size_t f = 0; f < cols; ++f) {
    if (std::find(pivot_cols.begin(), pivot_cols.end(), f) != pivot_cols.end()) continue;
    std::vector<Rational> v(cols, Rational(0));
    v[f] = 1;
    for (std::size_t r = 0; r < pivot_cols.size(); ++r) v[pivot_cols[r]] = -a[r][f];
    basis.push_back(std::move(v));
  }
  return basis;
}

/// Coprime integers proportional to v with the first nonzero entry positive.
inline std::vector<std::int64_t> to_coprime_integers(const std::vector<Rational>& v) {
  BigInt lcm = 1;
  for (const auto& x : v) lcm = boost::multiprecision::lcm(lcm, boost::multiprecision::denominator(x));
  std::vector<BigInt> ints;
  BigInt g = 0;
  for (const auto& x : v) {
    BigInt i = boost::multiprecision::numerator(x) * (lcm / boost::multiprecision::denominator(x));
    g = boost::multiprecision::gcd(g, i);
    ints.push_back(i);
  }
  require(g != 0, "to_coprime_integers: zero vector");
  auto first = std::find_if(ints.begin(), ints.end(), [](const BigInt& i) { return i != 0; });
  if (*first < 0) g = -g;
  std::vector<std::int64_t> out;
  for (auto& i : ints) out.push_back(static_cast<std::int64_t>(i / g));
  return out;
}

/// Occurrence matrix: one row per observed (position, token), one column per sequence.
inline std::vector<std::vector<Rational>> occurrence_matrix(const std::vector<Sequence>& seqs) {
  std::map<std::pair<std::size_t, int>, std::size_t> row_of;
  for (const auto& s : seqs)
    for (std::size_t p = 0; p < s.size(); ++p) row_of.try_emplace({p, s[p]}, row_of.size());
  std::vector<std::vector<Rational>> a(row_of.size(), std::vector<Rational>(seqs.size(), Rational(0)));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t p = 0; p < seqs[i].size(); ++p) a[row_of.at({p, seqs[i][p]})][i] += 1;
  return a;
}

/// Dimension of the space of lambdas balancing the sequences.
inline std::size_t dependence_dimension(const std::vector<Sequence>& seqs) {
  return rational_nullspace(occurrence_matrix(seqs), seqs.size()).size();
}

/// An integer lambda vector with check_dependence true, if one exists.
/// Returns the nullspace basis vector of the first free sequence.
inline std::optional<std::vector<std::int64_t>> find_dependence(const std::vector<Sequence>& seqs) {
  require(seqs.size() <= 64, "find_dependence: at most 64 sequences");
  if (seqs.size() < 2) return std::nullopt;
  const std::size_t n = seqs.front().size();
  for (const auto& s : seqs)
    if (s.size() != n || n == 0 || s.back() != seqs.front().back()) return std::nullopt;
  const auto basis = rational_nullspace(occurrence_matrix(seqs), seqs.size());
  if (basis.empty()) return std::nullopt;
  auto lambdas = to_coprime_integers(basis.front());
  require(check_dependence(seqs, lambdas), "find_dependence: nullspace vector failed the multiset check");
  return lambdas;
}

/// All sequences of two templates (sign appended), weighted n(t2) and -n(t1).
inline DependenceWitness template_dependence_witness(const Template& t1, const Template& t2, int alphabet_size) {
  require(t1 != t2, "template_dependence_witness: templates must differ");
  require(t1.length() == t2.length(), "template_dependence_witness: templates must have equal length");
  const auto s1 = sequences_of_template(t1, alphabet_size);
  const auto s2 = sequences_of_template(t2, alphabet_size);
  std::vector<Sequence> seqs;
  std::vector<std::int64_t> lambdas;
  for (auto s : s1) {
    s.push_back(alphabet_size);
    seqs.push_back(std::move(s));
    lambdas.push_back(static_cast<std::int64_t>(s2.size()));
  }
  for (auto s : s2) {
    s.push_back(alphabet_size);
    seqs.push_back(std::move(s));
    lambdas.push_back(-static_cast<std::int64_t>(s1.size()));
  }
  return {std::move(seqs), std::move(lambdas)};
}

inline DependenceWitness toy_witness() {
  std::vector<Sequence> seqs;
  for (const auto& ex : toy_icqa().examples) seqs.push_back(ex.tokens);
  return {std::move(seqs), {1, 1, -1, -1}};
}

// ---------------------------------------------------------------------------
// Output dependence

struct Residual {
  double residual = 0.0;  // max-abs of the weighted sum
  double scale = 0.0;     // max-abs over the individual outputs

  double relative() const { return scale > 0.0 ? residual / scale : residual; }
};

/// Max-abs of sum_i w_i * out_i, with out_i the last hidden column (or the logits).
inline Residual weighted_output_residual(const Model& model, const std::vector<Sequence>& seqs,
                                         const std::vector<double>& weights, bool apply_classifier) {
  require(model.config.n_layers == 1, "verify_output_dependence: model must have exactly one layer");
  require(seqs.size() == weights.size(), "verify_output_dependence: one weight per sequence");
  Residual r;
  Vector acc;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Representation h = final_hidden(model, seqs[i]);
    const Vector out = apply_classifier ? Vector(model.w_out * h.data.col(h.cols() - 1)) : Vector(h.data.col(h.cols() - 1));
    if (i == 0) acc = Vector::Zero(out.size());
    acc += weights[i] * out;
    r.scale = std::max(r.scale, max_abs(out));
  }
  r.residual = max_abs(acc);
  return r;
}

inline Residual verify_output_dependence(const Model& model, const DependenceWitness& w, bool apply_classifier) {
  require(model.config.activation == Activation::relu,
          "verify_output_dependence: integer lambdas apply to ReLU models; use softmax_lambdas");
  std::vector<double> weights(w.lambdas.begin(), w.lambdas.end());
  return weighted_output_residual(model, w.sequences, weights, apply_classifier);
}

/// lambda'_i = lambda_i * sum_j exp(h_j^T W_QK h_{n-1}) for a single-head softmax layer.
inline std::vector<double> softmax_lambdas(const Model& model, const DependenceWitness& w) {
  require(model.config.n_layers == 1 && model.config.heads_per_layer[0] == 1,
          "softmax_lambdas: model must have one layer with one head");
  require(model.config.activation == Activation::softmax, "softmax_lambdas: model must use softmax");
  const Matrix& qk = model.layers[0][0].w_qk;
  std::vector<double> out;
  for (std::size_t i = 0; i < w.sequences.size(); ++i) {
    const Matrix h = encode_tokens(w.sequences[i], model.config).data;
    const Vector s = h.transpose() * (qk * h.col(h.cols() - 1));
    out.push_back(static_cast<double>(w.lambdas[i]) * s.array().exp().sum());
  }
  return out;
}

/// Residual of the lambda'-weighted outputs, with lambda' rescaled so max|lambda'| = max|lambda|.
inline Residual verify_softmax_dependence(const Model& model, const DependenceWitness& w, bool apply_classifier) {
  auto lp = softmax_lambdas(model, w);
  double ml = 0.0, mlp = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    ml = std::max(ml, std::abs(static_cast<double>(w.lambdas[i])));
    mlp = std::max(mlp, std::abs(lp[i]));
  }
  for (auto& x : lp) x *= ml / mlp;
  return weighted_output_residual(model, w.sequences, lp, apply_classifier);
}

inline double toy_accuracy_certificate(const Model& model) {
  require(model.config.n_layers == 1, "toy_accuracy_certificate: model must have exactly one layer");
  const Dataset ds = toy_icqa();
  int correct = 0;
  for (const auto& ex : ds.examples) correct += predict(model, ex.tokens) == ex.target ? 1 : 0;
  return correct / 4.0;
}

// ---------------------------------------------------------------------------
// Ensemble certification

inline constexpr double kResidualTolerance = 1e-9;

/// Single-layer model with every weight iid uniform on [-1, 1].
inline Model random_single_layer(const ModelConfig& shape, int heads, Activation act, Rng& rng) {
  ModelConfig cfg = shape;
  cfg.n_layers = 1;
  cfg.heads_per_layer = {heads};
  cfg.activation = act;
  Model m = Model::zeros(cfg);
  const auto d = static_cast<Eigen::Index>(cfg.d_hidden);
  for (auto& h : m.layers[0]) {
    h.w_qk = rng.uniform_matrix(d, d, -1.0, 1.0);
    h.w_v = rng.uniform_matrix(d, d, -1.0, 1.0);
  }
  m.w_out = rng.uniform_matrix(cfg.n_classes, d, -1.0, 1.0);
  return m;
}

/// Hidden shape for the toy instance: d = 5, n = 8, d' = 13, two classes.
inline ModelConfig toy_shape() {
  const Vocabulary v{2, 2};
  return {v.d_token(), 8, v.d_token() + 8, 1, {1}, Activation::relu, 2};
}

/// Hidden shape for template pairs of length l: d = |X| + 1, n = l + 1, d' = d + n, two classes.
inline ModelConfig template_pair_shape(int l, int alphabet_size) {
  const int d = alphabet_size + 1;
  return {d, l + 1, d + l + 1, 1, {1}, Activation::relu, 2};
}

struct CertificationReport {
  json witness;
  std::size_t models_tested = 0;
  double max_residual = 0.0;  // relative to the output scale, over hidden and logit outputs
  double max_accuracy = 0.0;
  std::size_t consistent_models = 0;
  std::uint64_t seed = 0;
  std::string activation;
  std::vector<int> heads;

  bool residual_ok() const { return max_residual <= kResidualTolerance; }

  json to_json() const {
    return {{"witness", witness},           {"models_tested", models_tested}, {"max_residual", max_residual},
            {"tolerance", kResidualTolerance}, {"max_accuracy", max_accuracy},  {"consistent_models", consistent_models},
            {"seed", seed},                 {"activation", activation},       {"heads", heads}};
  }
};

/// True iff the model labels every t1 sequence with one class and every t2 sequence with a different one.
inline bool labels_templates_consistently(const Model& m, const DependenceWitness& w) {
  int first = -1, second = -1;
  for (std::size_t i = 0; i < w.sequences.size(); ++i) {
    const int p = predict(m, w.sequences[i]);
    int& slot = w.lambdas[i] > 0 ? first : second;
    if (slot == -1) slot = p;
    if (slot != p) return false;
  }
  return first != second;
}

/// Samples n_models random single-layer models cycling through `heads` and records the worst
/// relative residual. With `accuracy_on` set, the best accuracy on that dataset is recorded too.
inline CertificationReport certify(const DependenceWitness& w, const ModelConfig& shape, Activation act,
                                   const std::vector<int>& heads, std::size_t n_models, std::uint64_t seed,
                                   const Dataset* accuracy_on = nullptr) {
  require(!heads.empty(), "certify: no head counts");
  require(act == Activation::relu || std::all_of(heads.begin(), heads.end(), [](int h) { return h == 1; }),
          "certify: softmax certification is defined for single-head models only");
  CertificationReport rep;
  rep.witness = w.to_json();
  rep.seed = seed;
  rep.activation = to_string(act);
  rep.heads = heads;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_models; ++i) {
    const Model m = random_single_layer(shape, heads[i % heads.size()], act, rng);
    for (bool cls : {false, true}) {
      const Residual r = act == Activation::relu ? verify_output_dependence(m, w, cls) : verify_softmax_dependence(m, w, cls);
      rep.max_residual = std::max(rep.max_residual, r.relative());
    }
    if (accuracy_on != nullptr) {
      std::size_t ok = 0;
      for (const auto& ex : accuracy_on->examples) ok += predict(m, ex.tokens) == ex.target ? 1 : 0;
      rep.max_accuracy = std::max(rep.max_accuracy, static_cast<double>(ok) / static_cast<double>(accuracy_on->size()));
    }
    if (labels_templates_consistently(m, w)) ++rep.consistent_models;
    ++rep.models_tested;
  }
  return rep;
}

}  // namespace attnlab

#endif  // ATTNLAB_DEPENDENCE_HPP
