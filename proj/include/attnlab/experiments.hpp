#ifndef ATTNLAB_EXPERIMENTS_HPP
#define ATTNLAB_EXPERIMENTS_HPP

#include <string>
#include <vector>

#include "attnlab/tasks.hpp"
#include "attnlab/training.hpp"

namespace attnlab {

/// A training run: datasets, model shape and optimizer settings.
struct ExperimentSetup {
  std::string name;
  Dataset train_set;
  Dataset eval_set;
  ModelConfig model;
  TaskLayout layout;
  TrainConfig train;
};

/// Desk-scale depth-ablation recipes. All use W_V = identity; see README for the all-ones variant.
namespace recipes {

/// 32 random length-6 sequences over 20 words, one layer with 4 heads.
inline ExperimentSetup memorization(int layers, std::uint64_t seed) {
  ExperimentSetup e;
  e.name = "sc";
  e.train_set = gen_sc(32, 6, {20, 0}, seed);
  e.layout = {TaskKind::sc, e.train_set.vocab, 0, 0};
  const int d = e.train_set.vocab.d_token();
  e.model = {d, 7, d + 7, layers, std::vector<int>(static_cast<std::size_t>(layers), 4), Activation::relu, 32};
  e.train.learning_rate = 0.005;
  e.train.steps = 3000;
  e.train.seed = seed;
  e.train.init = InitMode::uniform01;
  e.train.value_init = ValueInit::identity;
  e.train.eval_every = 250;
  return e;
}

/// Full in-context QA enumeration with n_q = n_a = 5, k = 2; train and eval on the same set.
inline ExperimentSetup icqa(int layers, std::uint64_t seed) {
  ExperimentSetup e;
  e.name = "icqa";
  e.train_set = gen_icqa(5, 5, 2);
  e.layout = {TaskKind::icqa, e.train_set.vocab, 0, 2};
  const int d = e.train_set.vocab.d_token();
  e.model = {d, 8, d + 8, layers, std::vector<int>(static_cast<std::size_t>(layers), 1), Activation::relu, 5};
  e.train.learning_rate = 0.005;
  e.train.steps = 6000;
  e.train.seed = seed;
  e.train.init = InitMode::constructed_first_layer;
  e.train.value_init = ValueInit::identity;
  e.train.qk_init_scale = 0.1;
  e.train.eval_every = 250;
  return e;
}

/// Template matching l = 3 over 10 words: 128 training maps, 64 held-out maps, every template per map.
inline ExperimentSetup tm(int layers, std::uint64_t seed) {
  ExperimentSetup e;
  e.name = "tm";
  const auto maps = sample_maps(3, 10, 192, seed);
  e.train_set = gen_tm_maps(3, 10, {maps.begin(), maps.begin() + 128});
  e.eval_set = gen_tm_maps(3, 10, {maps.begin() + 128, maps.end()});
  e.layout = {TaskKind::tm, e.train_set.vocab, 3, 0};
  const int d = e.train_set.vocab.d_token();
  e.model = {d, 4, d + 4, layers, std::vector<int>(static_cast<std::size_t>(layers), 1), Activation::relu, 5};
  e.train.learning_rate = 0.01;
  e.train.steps = 4000;
  e.train.seed = seed;
  e.train.init = InitMode::constructed_first_layer;
  e.train.value_init = ValueInit::identity;
  e.train.eval_every = 250;
  return e;
}

/// In-context template matching l = 2, 6 words, templates {αα, αβ}, k = 2, 3 answers:
/// 6000 examples drawn uniformly from the full space, 4800 train and 1200 held out.
inline ExperimentSetup ictm(int layers, std::uint64_t seed) {
  ExperimentSetup e;
  e.name = "ictm";
  const IctmSpec spec{2, 6, 2, 3, 2};
  const Dataset all = gen_ictm(spec, 6000, seed);
  auto [tr, ev] = split_dataset(all, 4800, seed);
  e.train_set = std::move(tr);
  e.eval_set = std::move(ev);
  e.layout = {TaskKind::ictm, all.vocab, spec.l, spec.k};
  const int d = all.vocab.d_token();
  const int n = spec.seq_len();
  e.model = {d, n, d + n + spec.l + 2, layers, std::vector<int>(static_cast<std::size_t>(layers), 1), Activation::relu,
             spec.n_a};
  e.train.learning_rate = 0.001;
  e.train.steps = 20000;
  e.train.seed = seed;
  e.train.init = InitMode::constructed_first_layer;
  e.train.value_init = ValueInit::identity;
  e.train.qk_init_scale = 0.01;
  e.train.eval_every = 1000;
  return e;
}

inline ExperimentSetup by_name(const std::string& task, int layers, std::uint64_t seed) {
  if (task == "sc") return memorization(layers, seed);
  if (task == "icqa") return icqa(layers, seed);
  if (task == "tm") return tm(layers, seed);
  if (task == "ictm") return ictm(layers, seed);
  throw PreconditionError("no recipe for task: " + task);
}

}  // namespace recipes

inline TrainResult run(const ExperimentSetup& e, const CheckpointHook& hook = {}) {
  return train(e.train_set, e.eval_set, init_model(e.model, e.layout, e.train), e.train, hook);
}

}  // namespace attnlab

#endif  // ATTNLAB_EXPERIMENTS_HPP
