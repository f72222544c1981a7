#include <gtest/gtest.h>

#include <Eigen/LU>
#include <map>

#include "attnlab/constructions.hpp"
#include "attnlab/dependence.hpp"

using namespace attnlab;

namespace {

MultisetSequence ms(std::vector<std::map<int, std::int64_t>> p) { return {std::move(p)}; }

// Rank of the occurrence matrix in floating point, independent of the rational elimination.
std::size_t float_nullity(const std::vector<Sequence>& seqs) {
  std::map<std::pair<std::size_t, int>, int> rows;
  for (const auto& s : seqs)
    for (std::size_t p = 0; p < s.size(); ++p) rows.try_emplace({p, s[p]}, static_cast<int>(rows.size()));
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(seqs.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t p = 0; p < seqs[i].size(); ++p) a(rows.at({p, seqs[i][p]}), static_cast<Eigen::Index>(i)) += 1;
  return seqs.size() - static_cast<std::size_t>(Eigen::FullPivLU<Eigen::MatrixXd>(a).rank());
}

std::vector<Sequence> with_sign(const std::vector<Sequence>& s, int sign) {
  std::vector<Sequence> out = s;
  for (auto& x : out) x.push_back(sign);
  return out;
}

}  // namespace

TEST(Combine, PairExample) {
  const int a = 0, b = 1, r = 2;
  EXPECT_EQ(combine(Sequence{a, b, r}, Sequence{b, a, r}), ms({{{a, 1}, {b, 1}}, {{a, 1}, {b, 1}}, {{r, 2}}}));
  EXPECT_EQ(combine(Sequence{a, b, r}, Sequence{b, a, r}), combine(Sequence{a, a, r}, Sequence{b, b, r}));
}

TEST(Combine, SelfIsDouble) {
  const Sequence x{3, 1, 4, 1};
  EXPECT_EQ(combine(x, x), scale(2, x));
  EXPECT_THROW(combine(Sequence{1, 2}, Sequence{1}), DimensionError);
}

TEST(ToyIcqa, CombinationIdentity) {
  const auto ds = toy_icqa();
  EXPECT_EQ(combine(ds.examples[0].tokens, ds.examples[1].tokens), combine(ds.examples[2].tokens, ds.examples[3].tokens));
}

TEST(CheckDependence, Examples) {
  const auto w = toy_witness();
  EXPECT_TRUE(check_dependence(w.sequences, {1, 1, -1, -1}));
  EXPECT_FALSE(check_dependence({w.sequences[0]}, {1}));
  EXPECT_FALSE(check_dependence(w.sequences, {1, 1, -1, 0}));
  EXPECT_FALSE(check_dependence(w.sequences, {2, 1, -1, -1}));
  EXPECT_FALSE(check_dependence(w.sequences, {0, 0, 0, 0}));
  EXPECT_FALSE(check_dependence({{0, 1}, {1, 2}}, {1, -1}));
  EXPECT_THROW(DependenceWitness(w.sequences, {1, -1, 1, -1}), PreconditionError);
}

TEST(FindDependence, Toy) {
  const auto w = toy_witness();
  const auto found = find_dependence(w.sequences);
  ASSERT_TRUE(found);
  EXPECT_EQ(*found, (std::vector<std::int64_t>{1, 1, -1, -1}));
  EXPECT_EQ(dependence_dimension(w.sequences), float_nullity(w.sequences));
}

TEST(FindDependence, NoneForIndependent) {
  EXPECT_FALSE(find_dependence({{0}, {1}}));
  EXPECT_FALSE(find_dependence({{0, 2}, {1, 2}}));
  EXPECT_FALSE(find_dependence({{0, 2}, {1, 3}}));
  EXPECT_THROW(find_dependence(std::vector<Sequence>(65, Sequence{0})), PreconditionError);
}

TEST(FindDependence, TemplatePairOverThreeLetters) {
  const auto aa = with_sign(sequences_of_template({{0, 0}}, 3), 3);
  const auto ab = with_sign(sequences_of_template({{0, 1}}, 3), 3);
  std::vector<Sequence> all = aa;
  all.insert(all.end(), ab.begin(), ab.end());
  std::vector<std::int64_t> quoted(3, 6);
  quoted.insert(quoted.end(), 6, -3);
  EXPECT_TRUE(check_dependence(all, quoted));
  const auto found = find_dependence(all);
  ASSERT_TRUE(found);
  EXPECT_TRUE(check_dependence(all, *found));
  EXPECT_EQ(dependence_dimension(all), float_nullity(all));
  EXPECT_EQ(dependence_dimension(all), 4u);
}

TEST(FindDependenceProperty, RoundTripOnRandomSets) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = 1 + static_cast<int>(rng.below(3));
    const int count = 2 + static_cast<int>(rng.below(8));
    std::vector<Sequence> seqs;
    for (int i = 0; i < count; ++i) {
      Sequence s;
      for (int p = 0; p < len; ++p) s.push_back(static_cast<int>(rng.below(3)));
      s.push_back(9);
      seqs.push_back(s);
    }
    const auto found = find_dependence(seqs);
    EXPECT_EQ(found.has_value(), float_nullity(seqs) > 0);
    if (found) {
      EXPECT_TRUE(check_dependence(seqs, *found));
      const auto first = std::find_if(found->begin(), found->end(), [](std::int64_t x) { return x != 0; });
      EXPECT_GT(*first, 0);
      std::int64_t g = 0;
      for (auto x : *found) g = std::gcd(g, x);
      EXPECT_EQ(g, 1);
    }
  }
}

TEST(TemplateWitness, AlphaAlphaVersusAlphaBeta) {
  const auto w = template_dependence_witness({{0, 0}}, {{0, 1}}, 3);
  ASSERT_EQ(w.sequences.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(w.lambdas[i], i < 3 ? 6 : -3);
  // Each side puts n1 * n2 / |X| = 6 copies of each token at each word position.
  for (std::size_t p = 0; p < 2; ++p)
    for (int tok = 0; tok < 3; ++tok) {
      std::int64_t pos = 0, neg = 0;
      for (std::size_t i = 0; i < 9; ++i)
        if (w.sequences[i][p] == tok) (w.lambdas[i] > 0 ? pos : neg) += std::abs(w.lambdas[i]);
      EXPECT_EQ(pos, 6);
      EXPECT_EQ(neg, 6);
    }
}

TEST(TemplateWitness, AllLengthThreePairs) {
  const auto ts = enumerate_templates(3);
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = i + 1; j < ts.size(); ++j)
      EXPECT_NO_THROW(template_dependence_witness(ts[i], ts[j], 4)) << ts[i].str() << " " << ts[j].str();
}

TEST(TemplateWitness, RejectsEqualTemplates) {
  EXPECT_THROW(template_dependence_witness({{0}}, {{0}}, 3), PreconditionError);
}

TEST(OutputDependence, ZeroModelResidualIsZero) {
  const Model m = Model::zeros(toy_shape());
  const auto r = verify_output_dependence(m, toy_witness(), false);
  EXPECT_EQ(r.residual, 0.0);
  EXPECT_EQ(r.scale, 1.0);
}

TEST(OutputDependence, RejectsDeepModels) {
  const Model deep = build_icqa_model({2, 2}, 2);
  EXPECT_THROW(verify_output_dependence(deep, toy_witness(), false), PreconditionError);
}

TEST(OutputDependenceProperty, RandomReluModelsCancel) {
  Rng rng(5);
  const auto toy = toy_witness();
  const auto tpl = template_dependence_witness({{0, 0}}, {{0, 1}}, 3);
  const std::vector<int> heads{1, 2, 3, 4, 5, 6, 7, 8};
  for (int i = 0; i < 100; ++i) {
    const int h = heads[static_cast<std::size_t>(i) % heads.size()];
    const Model a = random_single_layer(toy_shape(), h, Activation::relu, rng);
    const Model b = random_single_layer(template_pair_shape(2, 3), h, Activation::relu, rng);
    for (bool cls : {false, true}) {
      EXPECT_LE(verify_output_dependence(a, toy, cls).relative(), kResidualTolerance);
      EXPECT_LE(verify_output_dependence(b, tpl, cls).relative(), kResidualTolerance);
    }
  }
}

TEST(OutputDependence, WrongLambdasDoNotCancel) {
  Rng rng(6);
  const auto toy = toy_witness();
  const Model m = random_single_layer(toy_shape(), 2, Activation::relu, rng);
  const auto r = weighted_output_residual(m, toy.sequences, {1, -1, 1, -1}, false);
  EXPECT_GT(r.relative(), 1e-3);
}

TEST(SoftmaxDependence, ZeroQkScalesByLength) {
  ModelConfig cfg = toy_shape();
  cfg.activation = Activation::softmax;
  const Model m = Model::zeros(cfg);
  const auto w = toy_witness();
  const auto lp = softmax_lambdas(m, w);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(lp[i], 8.0 * static_cast<double>(w.lambdas[i]));
}

TEST(SoftmaxDependenceProperty, RandomSingleHeadModelsCancel) {
  Rng rng(7);
  const auto toy = toy_witness();
  for (int i = 0; i < 100; ++i) {
    const Model m = random_single_layer(toy_shape(), 1, Activation::softmax, rng);
    EXPECT_LE(verify_softmax_dependence(m, toy, false).relative(), kResidualTolerance);
    EXPECT_LE(verify_softmax_dependence(m, toy, true).relative(), kResidualTolerance);
  }
}

TEST(SoftmaxDependence, RejectsMultiHead) {
  Rng rng(8);
  const Model m = random_single_layer(toy_shape(), 2, Activation::softmax, rng);
  EXPECT_THROW(softmax_lambdas(m, toy_witness()), PreconditionError);
  EXPECT_THROW(verify_output_dependence(m, toy_witness(), false), PreconditionError);
}

TEST(ToyCertificate, ZeroModelAndTwoLayerContrast) {
  EXPECT_LE(toy_accuracy_certificate(Model::zeros(toy_shape())), 0.75);
  const Model two = build_icqa_model({2, 2}, 2);
  EXPECT_EQ(evaluate(two, toy_icqa()).accuracy(), 1.0);
  EXPECT_THROW(toy_accuracy_certificate(two), PreconditionError);
}

TEST(Certify, ToyEnsemble) {
  const Dataset toy = toy_icqa();
  const auto rep = certify(toy_witness(), toy_shape(), Activation::relu, {1, 2, 4, 8}, 200, 7, &toy);
  EXPECT_EQ(rep.models_tested, 200u);
  EXPECT_LE(rep.max_accuracy, 0.75);
  EXPECT_TRUE(rep.residual_ok());
  const json j = rep.to_json();
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("witness").at("lambdas"), json::array({1, 1, -1, -1}));
  const auto again = certify(toy_witness(), toy_shape(), Activation::relu, {1, 2, 4, 8}, 200, 7, &toy);
  EXPECT_EQ(again.to_json().dump(), j.dump());
}

TEST(Certify, TemplatePairHasNoConsistentModel) {
  const auto w = template_dependence_witness({{0, 0}}, {{0, 1}}, 3);
  const auto rep = certify(w, template_pair_shape(2, 3), Activation::relu, {1, 2, 4, 8}, 100, 1);
  EXPECT_EQ(rep.consistent_models, 0u);
  EXPECT_TRUE(rep.residual_ok());
}

TEST(Certify, ConsistentLabellingDetector) {
  // A two-layer model that separates the templates is flagged as consistent.
  const Model tm = build_tm_model(2, 3);
  const auto w = template_dependence_witness({{0, 0}}, {{0, 1}}, 3);
  EXPECT_TRUE(labels_templates_consistently(tm, w));
  EXPECT_FALSE(labels_templates_consistently(Model::zeros(template_pair_shape(2, 3)), w));
}
