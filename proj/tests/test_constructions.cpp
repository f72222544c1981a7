#include <gtest/gtest.h>

#include <map>

#include "attnlab/constructions.hpp"

using namespace attnlab;

namespace {

ModelConfig plain_config(int d, int n, int dh) { return {d, n, dh, 1, {1}, Activation::relu, 2}; }

Dataset manual_dataset(const Vocabulary& v, const std::vector<Sequence>& seqs) {
  Dataset ds;
  ds.task = "sc";
  ds.vocab = v;
  ds.n_classes = static_cast<int>(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    TaskExample ex;
    ex.tokens = seqs[i];
    ex.roles = roles_of(ex.tokens, v);
    ex.target = static_cast<int>(i);
    ds.examples.push_back(ex);
  }
  return ds;
}

void expect_perfect(const Model& m, const Dataset& ds) {
  const Evaluation e = evaluate(m, ds);
  EXPECT_EQ(e.correct, e.size) << ds.task << " " << ds.params.dump();
  EXPECT_GT(e.min_margin, 0.0);
}

}  // namespace

TEST(InstructiveAttention, IdentityAnyContent) {
  const ModelConfig cfg = plain_config(3, 4, 9);
  Model m = Model::zeros(cfg);
  m.layers[0][0].w_qk = instructive_attention(Matrix::Identity(4, 4), cfg);
  for (const Sequence& s : {Sequence{0, 0, 0, 0}, Sequence{2, 1, 0, 2}})
    EXPECT_EQ(attention_maps(m, s)[0].alpha, Matrix(Matrix::Identity(4, 4)));
}

TEST(InstructiveAttention, CopyPatternBlocks) {
  const Matrix a = icqa_copy_alpha(2);
  ASSERT_EQ(a.rows(), 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const int bi = std::min(i / 3, 2), bj = std::min(j / 3, 2);
      EXPECT_EQ(a(i, j), (bi == bj && i != j) ? 1.0 : 0.0) << i << "," << j;
    }
}

TEST(InstructiveAttention, RejectsNegative) {
  Matrix a = Matrix::Identity(3, 3);
  a(0, 1) = -0.5;
  EXPECT_THROW(instructive_attention(a, plain_config(2, 3, 5)), PreconditionError);
}

TEST(InstructiveAttentionProperty, RecoversAlphaForRandomContent) {
  Rng rng(1);
  const ModelConfig cfg = plain_config(5, 6, 14);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix alpha = rng.uniform_matrix(6, 6, 0, 3);
    HeadWeights head = HeadWeights::zeros(14);
    head.w_qk = instructive_attention(alpha, cfg);
    for (int s = 0; s < 20; ++s) {
      std::vector<Vector> xs;
      for (int j = 0; j < 6; ++j) xs.push_back(Vector::Random(5) * 4.0);
      const Matrix h = encode_input(xs, cfg).data;
      EXPECT_EQ(attention_map(h, head, Activation::relu), alpha);
    }
  }
}

TEST(ConstrainedAttention, EmptyMaskUnchanged) {
  const ModelConfig cfg = plain_config(2, 3, 6);
  Rng rng(2);
  const Matrix base = rng.uniform_matrix(6, 6, -1, 1);
  EXPECT_EQ(constrained_attention(base, {}, 5.0, cfg), base);
  EXPECT_THROW(constrained_attention(base, {}, 0.0, cfg), PreconditionError);
}

TEST(ConstrainedAttention, BlockMask) {
  const int l = 2, k = 2;
  const IctmLayout lay{l, k, {4, 3}};
  const ModelConfig cfg{lay.d(), lay.n(), lay.d_hidden(), 1, {1}, Activation::relu, 3};
  std::vector<std::pair<int, int>> mask;
  for (int i = 0; i < lay.n(); ++i)
    for (int j = 0; j < lay.n(); ++j)
      if (lay.block_of(i) != lay.block_of(j)) mask.emplace_back(i, j);
  const Matrix w = constrained_attention(Matrix::Zero(cfg.d_hidden, cfg.d_hidden), mask, kMaskStrength, cfg);
  const Matrix pp = w.block(lay.d(), lay.d(), lay.n(), lay.n());
  for (int i = 0; i < lay.n(); ++i)
    for (int j = 0; j < lay.n(); ++j)
      EXPECT_EQ(pp(i, j), lay.block_of(i) == lay.block_of(j) ? 0.0 : -kMaskStrength);
  EXPECT_EQ(w.topLeftCorner(lay.d(), lay.d()).cwiseAbs().sum(), 0.0);
}

TEST(ConstrainedAttention, MaskedPairScoreIsZero) {
  const ModelConfig cfg = plain_config(3, 2, 5);
  Matrix base = Matrix::Zero(5, 5);
  base.topLeftCorner(3, 3).setIdentity();
  HeadWeights head = HeadWeights::zeros(5);
  head.w_qk = constrained_attention(base, {{0, 1}}, 10.0, cfg);
  const std::vector<int> same{1, 1};
  const Matrix a = attention_map(encode_tokens(same, cfg).data, head, Activation::relu);
  EXPECT_EQ(a(0, 1), 0.0);
  EXPECT_EQ(a(1, 0), 1.0);
  EXPECT_EQ(std::max(0.0, 1.0 - 10.0), 0.0);
}

TEST(ScClassifier, SingleVector) {
  Vector v(3);
  v << 0, 2, 1;
  const Matrix w = build_sc_classifier({v});
  ASSERT_EQ(w.rows(), 1);
  EXPECT_GT((w * v)(0), 0.0);
}

TEST(ScClassifier, OrthonormalPair) {
  const Vector a = Vector::Unit(4, 0), b = Vector::Unit(4, 2);
  const Matrix w = build_sc_classifier({a, b});
  EXPECT_NEAR((w * a)(0), 1.0, 1e-15);
  EXPECT_NEAR((w * a)(1), 0.0, 1e-15);
  EXPECT_NEAR((w * b)(1), 1.0, 1e-15);
  EXPECT_EQ(argmax(w * a), 0);
  EXPECT_EQ(argmax(w * b), 1);
}

TEST(ScClassifier, FiftyRandomUnitVectors) {
  Rng rng(3);
  std::vector<Vector> vs;
  for (int i = 0; i < 50; ++i) {
    Vector v(60);
    for (auto& x : v) x = rng.uniform(-1, 1);
    vs.push_back(v.normalized());
  }
  const Matrix w = build_sc_classifier(vs);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(argmax(w * vs[static_cast<std::size_t>(i)]), i);
}

TEST(ScClassifier, NonNegativeOneHotConcatenations) {
  // Same-norm vectors with shared support, as produced by the memorization model.
  std::vector<Vector> vs;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      Vector v = Vector::Zero(8);
      v(a) = 1;
      v(4 + b) = 1;
      vs.push_back(v);
    }
  const Matrix w = build_sc_classifier(vs);
  for (std::size_t i = 0; i < vs.size(); ++i) EXPECT_EQ(argmax(w * vs[i]), static_cast<int>(i));
}

TEST(ScClassifier, RejectsParallel) {
  Vector a(3), b(3);
  a << 1, 2, 3;
  b = -2.5 * a;
  EXPECT_THROW(build_sc_classifier({a, Vector::Unit(3, 0), b}), PreconditionError);
  EXPECT_THROW(build_sc_classifier({Vector::Zero(3)}), PreconditionError);
}

TEST(ScModel, LastColumnConcatenatesTokens) {
  const Vocabulary v{3, 0};
  const Dataset ds = manual_dataset(v, {{1, 2, 3}, {0, 2, 3}});
  const Model m = build_sc_model(ds);
  EXPECT_EQ(m.config.d_hidden, std::max(3 * 4, 4 + 3));
  EXPECT_EQ(m.config.heads_per_layer, std::vector<int>{3});
  const Vector h = final_hidden(m, ds.examples[0].tokens).data.col(2);
  Vector expect = Vector::Zero(m.config.d_hidden);
  expect(1) = 1.0;
  expect(4 + 2) = 1.0;
  EXPECT_LE((h - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScModel, DistinctSequencesGiveNonParallelStates) {
  const Vocabulary v{5, 0};
  const Dataset ds = manual_dataset(v, {{1, 2, 4, 5}, {1, 3, 4, 5}});
  const Model m = build_sc_model(ds);
  const Vector a = final_hidden(m, ds.examples[0].tokens).data.col(3);
  const Vector b = final_hidden(m, ds.examples[1].tokens).data.col(3);
  EXPECT_LT(std::abs(a.dot(b)) / (a.norm() * b.norm()), 1.0 - 1e-6);
}

TEST(ScModel, ClassifiesEveryPair) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Dataset ds = gen_sc(16, 6, {50, 0}, seed);
    expect_perfect(build_sc_model(ds), ds);
  }
  const Dataset small = gen_sc(9, 2, {3, 0}, 5);
  expect_perfect(build_sc_model(small), small);
}

TEST(ScModel, RejectsDuplicates) {
  const Vocabulary v{3, 0};
  EXPECT_THROW(build_sc_model(manual_dataset(v, {{1, 2, 3}, {1, 2, 3}})), PreconditionError);
}

TEST(IcqaModel, WorkedInstanceLastState) {
  const Vocabulary v{3, 3};
  const Model m = build_icqa_model(v, 2);
  // q0 = 0 -> a0 = 1, q1 = 2 -> a1 = 0, query q0.
  const TaskExample ex = icqa_example(v, {0, 2}, {1, 0}, 0);
  const Vector h = final_hidden(m, ex.tokens).data.col(7);
  for (int q = 0; q < 3; ++q) EXPECT_EQ(h(q), q == 0 ? 6.0 : 0.0);
  EXPECT_EQ(h(v.sign()), 6.0);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(h(v.answer(a)), a == 1 ? 3.0 : 0.0);
  EXPECT_EQ(predict(m, ex.tokens), 1);
}

TEST(IcqaModel, FirstLayerMapIsTokenIndependent) {
  const Dataset ds = gen_icqa(3, 3, 2);
  const Model m = build_icqa_model(ds.vocab, 2);
  for (const auto& ex : ds.examples) EXPECT_EQ(attention_maps(m, ex.tokens)[0].alpha, icqa_copy_alpha(2));
}

TEST(IcqaModelProperty, ExhaustiveUpToHundredThousand) {
  int cases = 0;
  for (int nq = 1; nq <= 6; ++nq)
    for (int na = 1; na <= 6; ++na)
      for (int k = 1; k <= std::min(nq, na); ++k) {
        const auto size = falling_factorial(nq, k) * falling_factorial(na, k) * static_cast<std::uint64_t>(k);
        if (size > 100'000) continue;
        const Dataset ds = gen_icqa(nq, na, k);
        const Model m = build_icqa_model(ds.vocab, k);
        const Evaluation e = evaluate(m, ds);
        EXPECT_EQ(e.correct, e.size) << nq << " " << na << " " << k;
        ++cases;
      }
  EXPECT_GT(cases, 50);
}

TEST(TmModel, TernaryCode) {
  EXPECT_EQ(ternary_code({2, 1, 1, 0, 0}), 198.0);
  EXPECT_EQ(ternary_code({}), 0.0);
  EXPECT_THROW(ternary_code(std::vector<int>(31, 1)), PreconditionError);
}

TEST(TmModel, TemplateMatrixAlphaBetaAlphaGamma) {
  Matrix expect(4, 4);
  expect << 2, 0, 1, 0, 0, 2, 0, 0, 1, 0, 2, 0, 0, 0, 0, 2;
  EXPECT_EQ(template_matrix({{0, 1, 0, 2}}), expect);
}

TEST(TmModel, FingerprintIsTokenInvariant) {
  const Model m = build_tm_model(3, 3);
  const int d = m.config.d_token, n = m.config.n_positions;
  const Matrix h1 = hidden_states(m, Sequence{0, 0, 1, 3})[1].data.block(d, 0, n, n);
  const Matrix h2 = hidden_states(m, Sequence{2, 2, 0, 3})[1].data.block(d, 0, n, n);
  EXPECT_EQ(h1, h2);
  EXPECT_EQ(h1(0, 0), 2.0);
  EXPECT_EQ(h1(1, 0), 1.0);
  EXPECT_EQ(h1(2, 0), 0.0);
}

TEST(TmModel, FingerprintMatchesTemplateMatrix) {
  const int l = 4, X = 5;
  const Model m = build_tm_model(l, X);
  const int d = m.config.d_token;
  for (const auto& t : enumerate_templates(l))
    for (const auto& s : sequences_of_template(t, X)) {
      Sequence toks = s;
      toks.push_back(X);
      const Matrix h1 = hidden_states(m, toks)[1].data;
      EXPECT_EQ(Matrix(h1.block(d, 0, l, l)), template_matrix(t)) << t.str();
    }
}

TEST(TmModel, CodesArePairwiseNonParallel) {
  for (int l = 1; l <= 4; ++l) {
    const Model m = build_tm_model(l, l + 1);
    std::vector<Vector> codes;
    for (const auto& t : enumerate_templates(l)) {
      Sequence s = substitute(t, {std::vector<int>{0, 1, 2, 3}});
      s.push_back(l + 1);
      codes.push_back(final_hidden(m, s).data.col(l));
    }
    EXPECT_NO_THROW(require_pairwise_nonparallel(codes));
  }
}

TEST(TmModelProperty, ExhaustiveSmallGrid) {
  for (int l = 1; l <= 4; ++l)
    for (int X = l; X <= 6; ++X) {
      const Dataset ds = gen_tm(l, X);
      expect_perfect(build_tm_model(l, X), ds);
    }
}

TEST(TmModel, Guards) {
  EXPECT_THROW(build_tm_model(31, 40), PreconditionError);
  EXPECT_THROW(build_tm_model(3, 2), PreconditionError);
}

TEST(IctmModel, Shape) {
  const Vocabulary v{4, 3};
  const Model m = build_ictm_model(2, 2, v);
  EXPECT_EQ(m.config.n_positions, 11);
  EXPECT_EQ(m.config.d_hidden, v.d_token() + 11 + 4);
  EXPECT_EQ(m.config.heads_per_layer, (std::vector<int>{1, 1, 4}));
  EXPECT_NO_THROW(m.validate());
}

TEST(IctmModel, MatchingBlockScratchIsZeroAfterSecondLayer) {
  const IctmSpec spec{2, 4, 2, 3, 2};
  const Dataset ds = gen_ictm(spec);
  const Model m = build_ictm_model(2, 2, ds.vocab);
  const IctmLayout lay{2, 2, ds.vocab};
  for (std::size_t i = 0; i < ds.size(); i += 37) {
    const auto& ex = ds.examples[i];
    const Matrix h2 = hidden_states(m, ex.tokens)[2].data;
    const int c = ex.meta.at("c").get<int>();
    for (int t = 0; t < 2; ++t) {
      const double mass = h2.block(lay.scratch(), t * 4, 4, 2).cwiseAbs().sum();
      if (t == c)
        EXPECT_EQ(mass, 0.0);
      else
        EXPECT_GT(mass, 0.0);
    }
  }
}

TEST(IctmModel, FinalAnswerCoefficients) {
  const Dataset ds = gen_ictm({2, 4, 2, 3, 2});
  const Model m = build_ictm_model(2, 2, ds.vocab);
  for (std::size_t i = 0; i < ds.size(); i += 11) {
    const auto& ex = ds.examples[i];
    const Vector last = final_hidden(m, ex.tokens).data.col(10);
    const auto pp = ex.meta.at("pi_prime").get<std::vector<int>>();
    const int c = ex.meta.at("c").get<int>();
    EXPECT_EQ(last(ds.vocab.answer(pp[static_cast<std::size_t>(c)])), 1.0);
    const auto g = ictm_gammas(m, ex, ds.vocab);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_GE(g[0], 1.0);
  }
}

TEST(IctmModelProperty, ExhaustiveSmallCases) {
  const std::vector<IctmSpec> specs{{1, 2, 1, 2, 1}, {2, 3, 2, 2, 2}, {2, 4, 2, 3, 2}, {3, 3, 3, 3, 3},
                                    {3, 3, 3, 3, 2}, {3, 4, 2, 3, 2}, {2, 3, 2, 3, 1}};
  for (const auto& spec : specs) {
    const Dataset ds = gen_ictm(spec);
    ASSERT_FALSE(ds.params.at("sampled").get<bool>());
    const Model m = build_ictm_model(spec.l, spec.k, ds.vocab);
    expect_perfect(m, ds);
    double gmin = INFINITY;
    for (const auto& ex : ds.examples)
      for (double g : ictm_gammas(m, ex, ds.vocab)) gmin = std::min(gmin, g);
    if (spec.k > 1) EXPECT_GE(gmin, 1.0) << spec.l << " " << spec.k;
  }
}

TEST(IctmModel, SampledAuditLargeCase) {
  const Dataset ds = gen_ictm({3, 5, 5, 4, 3}, 2000, 4);
  ASSERT_TRUE(ds.params.at("sampled").get<bool>());
  expect_perfect(build_ictm_model(3, 3, ds.vocab), ds);
}

TEST(IctmModel, RejectsSmallVocabulary) { EXPECT_THROW(build_ictm_model(3, 2, {2, 3}), PreconditionError); }
