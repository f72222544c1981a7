#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attnlab/attnlab.hpp"

namespace fs = std::filesystem;
using namespace attnlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

/// Dataset parameters shared by construct, eval and gen.
struct DataOptions {
  std::string task = "icqa";
  int n = 16;
  int len = 6;
  int vocab = 50;
  int nq = 3;
  int na = 3;
  int k = 2;
  int l = 3;
  int alphabet = 5;
  int templates = 0;
  std::uint64_t cap = 100'000;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--task", task, "sc | icqa | tm | ictm | toy-icqa")
        ->check(CLI::IsMember({"sc", "icqa", "tm", "ictm", "toy-icqa"}));
    app->add_option("--n", n, "memorization: number of sequences");
    app->add_option("--len", len, "memorization: sequence length");
    app->add_option("--vocab", vocab, "memorization: alphabet size");
    app->add_option("--nq", nq, "icqa: number of questions");
    app->add_option("--na", na, "icqa/ictm: number of answers");
    app->add_option("--k", k, "icqa/ictm: context blocks");
    app->add_option("--l", l, "tm/ictm: template length");
    app->add_option("--alphabet", alphabet, "tm/ictm: word alphabet size");
    app->add_option("--templates", templates, "ictm: number of templates (0 = all)");
    app->add_option("--cap", cap, "ictm: enumerate up to this many examples, sample beyond");
    app->add_option("--seed", seed, "generator seed");
  }

  IctmSpec ictm_spec() const {
    const int t = templates > 0 ? templates : static_cast<int>(enumerate_templates(l).size());
    return {l, alphabet, t, na, k};
  }

  Dataset build() const {
    if (task == "sc") return gen_sc(n, len, {vocab, 0}, seed);
    if (task == "icqa") return gen_icqa(nq, na, k);
    if (task == "toy-icqa") return toy_icqa();
    if (task == "tm") return gen_tm(l, alphabet);
    return gen_ictm(ictm_spec(), cap, seed);
  }
};

fs::path resolve_out(const std::string& out, const std::string& fallback) {
  return out.empty() ? output_root() / fallback : fs::path(out);
}

// ---------------------------------------------------------------------------

struct ConstructCmd {
  DataOptions data;
  std::string out;
  bool no_verify = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("construct", "build a closed-form model and verify it exhaustively");
    data.add_to(sub);
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--verify", "verify accuracy on the dataset (default)");
    sub->add_flag("--no-verify", no_verify, "write the checkpoint only");
    sub->callback([this] { code = run(); });
  }

  int code = kExitOk;

  int run() const {
    if (data.task == "toy-icqa") throw UsageError("construct: use --task icqa for the in-context QA construction");
    const Dataset ds = data.build();
    Model m;
    if (data.task == "sc") m = build_sc_model(ds);
    if (data.task == "icqa") m = build_icqa_model(ds.vocab, data.k);
    if (data.task == "tm") m = build_tm_model(data.l, data.alphabet);
    if (data.task == "ictm") m = build_ictm_model(data.l, data.k, ds.vocab);
    const fs::path dir = resolve_out(out, "construct-" + data.task);
    fs::create_directories(dir);
    save_model((dir / "model.json").string(), m, ds.vocab);
    if (no_verify) {
      std::cout << "checkpoint " << (dir / "model.json").string() << "\n";
      return kExitOk;
    }
    const Evaluation e = evaluate(m, ds);
    json rep = {{"task", data.task},
                {"params", ds.params},
                {"dataset_size", e.size},
                {"accuracy", e.accuracy()},
                {"min_margin", e.min_margin}};
    if (data.task == "ictm") {
      double gmin = std::numeric_limits<double>::infinity();
      for (const auto& ex : ds.examples)
        for (double g : ictm_gammas(m, ex, ds.vocab)) gmin = std::min(gmin, g);
      rep["gamma_min"] = gmin;
    }
    write_text(dir / "report.json", rep.dump(2) + "\n");
    std::cout << data.task << ": accuracy " << e.accuracy() << " over " << e.size << " examples, min margin "
              << e.min_margin << "\n";
    return e.correct == e.size ? kExitOk : kExitFailed;
  }
};

// ---------------------------------------------------------------------------

struct TrainCmd {
  std::string task = "icqa";
  int layers = 2;
  std::string heads;
  std::string activation;
  double lr = 0;
  int steps = 0;
  int batch = 0;
  std::uint64_t seed = 0;
  std::string init;
  std::string value_init;
  double qk_scale = 0;
  int eval_every = 0;
  int checkpoint_every = 0;
  std::string out;
  CLI::App* sub = nullptr;
  int code = kExitOk;

  void add(CLI::App& app) {
    sub = app.add_subcommand("train", "train a model from scratch with SGD");
    sub->add_option("--task", task, "sc | icqa | tm | ictm")->check(CLI::IsMember({"sc", "icqa", "tm", "ictm"}));
    sub->add_option("--layers", layers, "number of layers")->check(CLI::PositiveNumber);
    sub->add_option("--heads", heads, "heads per layer, one value or a comma list");
    sub->add_option("--activation", activation, "relu | softmax")->check(CLI::IsMember({"relu", "softmax"}));
    sub->add_option("--lr", lr, "learning rate");
    sub->add_option("--steps", steps, "SGD steps");
    sub->add_option("--batch", batch, "batch size");
    sub->add_option("--seed", seed, "seed for data, init and batching");
    sub->add_option("--init", init, "uniform01 | constructed_first_layer")
        ->check(CLI::IsMember({"uniform01", "constructed_first_layer"}));
    sub->add_option("--value-init", value_init, "all_ones | identity")->check(CLI::IsMember({"all_ones", "identity"}));
    sub->add_option("--qk-scale", qk_scale, "W_QK init range [0, qk-scale)");
    sub->add_option("--eval-every", eval_every, "metrics interval");
    sub->add_option("--checkpoint-every", checkpoint_every, "checkpoint interval (0 = final only)");
    sub->add_option("--out", out, "run directory");
    sub->callback([this] { code = run(); });
  }

  bool given(const std::string& name) const { return sub->get_option(name)->count() > 0; }

  int run() const {
    ExperimentSetup e = recipes::by_name(task, layers, seed);
    if (given("--heads")) {
      auto hs = parse_int_list(heads);
      if (hs.size() == 1) hs.assign(static_cast<std::size_t>(layers), hs[0]);
      if (static_cast<int>(hs.size()) != layers) throw UsageError("--heads must list one count per layer");
      e.model.heads_per_layer = hs;
    }
    if (given("--activation")) e.model.activation = parse_activation(activation);
    if (given("--lr")) e.train.learning_rate = lr;
    if (given("--steps")) e.train.steps = steps;
    if (given("--batch")) e.train.batch_size = batch;
    if (given("--init")) e.train.init = parse_init_mode(init);
    if (given("--value-init")) e.train.value_init = parse_value_init(value_init);
    if (given("--qk-scale")) e.train.qk_init_scale = qk_scale;
    if (given("--eval-every")) e.train.eval_every = eval_every;
    if (given("--checkpoint-every")) e.train.checkpoint_every = checkpoint_every;
    try {
      e.model.validate();
      e.train.validate();
    } catch (const PreconditionError& err) {
      throw UsageError(err.what());
    }
    const fs::path dir = resolve_out(out, "train-" + task + "-L" + std::to_string(layers) + "-s" + std::to_string(seed));
    fs::create_directories(dir);
    write_text(dir / "config.resolved", resolved(e));
    const TrainResult r = attnlab::run(e, [&](int step, const Model& m) {
      const fs::path ck = dir / "checkpoints" / ("step_" + std::to_string(step) + ".json");
      fs::create_directories(ck.parent_path());
      save_model(ck.string(), m, e.train_set.vocab);
    });
    write_text(dir / "metrics.csv", metrics_csv(r.metrics));
    save_model((dir / "model.json").string(), r.model, e.train_set.vocab);
    if (!r.metrics.empty()) {
      const auto& last = r.metrics.back();
      std::cout << task << " L" << layers << " seed " << seed << ": step " << last.step << " loss " << last.train_loss
                << " train_acc " << last.train_accuracy << " eval_acc " << last.eval_accuracy << "\n";
    }
    std::cout << "run directory " << dir.string() << "\n";
    return kExitOk;
  }

  std::string resolved(const ExperimentSetup& e) const {
    std::ostringstream os;
    os << std::setprecision(17);
    std::string hs;
    for (std::size_t i = 0; i < e.model.heads_per_layer.size(); ++i)
      hs += (i ? "," : "") + std::to_string(e.model.heads_per_layer[i]);
    os << "task = " << task << "\n"
       << "layers = " << layers << "\n"
       << "heads = \"" << hs << "\"\n"
       << "activation = " << to_string(e.model.activation) << "\n"
       << "lr = " << e.train.learning_rate << "\n"
       << "steps = " << e.train.steps << "\n"
       << "batch = " << e.train.batch_size << "\n"
       << "seed = " << e.train.seed << "\n"
       << "init = " << to_string(e.train.init) << "\n"
       << "value-init = " << to_string(e.train.value_init) << "\n"
       << "qk-scale = " << e.train.qk_init_scale << "\n"
       << "eval-every = " << e.train.eval_every << "\n"
       << "checkpoint-every = " << e.train.checkpoint_every << "\n"
       << "# d_token = " << e.model.d_token << ", n_positions = " << e.model.n_positions
       << ", d_hidden = " << e.model.d_hidden << ", n_classes = " << e.model.n_classes << "\n"
       << "# train examples = " << e.train_set.size() << ", eval examples = " << e.eval_set.size() << "\n";
    return os.str();
  }
};

// ---------------------------------------------------------------------------

struct EvalCmd {
  DataOptions data;
  std::string checkpoint;
  std::string dataset;
  std::string out;
  int code = kExitOk;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    sub->add_option("--checkpoint", checkpoint, "model JSON")->required();
    sub->add_option("--data", dataset, "dataset JSONL (otherwise generated from --task)");
    data.add_to(sub);
    sub->add_option("--out", out, "write the report to this file");
    sub->callback([this] { code = run(); });
  }

  int run() const {
    const Model m = load_model(checkpoint);
    Dataset ds;
    if (!dataset.empty()) {
      std::ifstream is(dataset);
      if (!is) throw UsageError("cannot open dataset: " + dataset);
      ds = read_dataset(is);
    } else {
      ds = data.build();
    }
    const Evaluation e = evaluate(m, ds);
    const json rep = {{"dataset_size", e.size}, {"accuracy", e.accuracy()}, {"min_margin", e.min_margin}};
    if (!out.empty()) write_text(out, rep.dump(2) + "\n");
    std::cout << rep.dump() << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------

struct VerifyDependenceCmd {
  std::string task = "toy-icqa";
  std::size_t models = 1000;
  std::uint64_t seed = 7;
  std::string activation = "relu";
  std::string heads;
  std::string t1 = "0,0";
  std::string t2 = "0,1";
  int alphabet = 3;
  std::string out;
  int code = kExitOk;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("verify-dependence", "certify single-layer output dependence on random models");
    sub->add_option("--task", task, "toy-icqa | tm-pair")->check(CLI::IsMember({"toy-icqa", "tm-pair"}));
    sub->add_option("--models", models, "number of random models");
    sub->add_option("--seed", seed, "sampling seed");
    sub->add_option("--activation", activation, "relu | softmax")->check(CLI::IsMember({"relu", "softmax"}));
    sub->add_option("--heads", heads, "head counts to cycle through (default 1,2,4,8 for relu, 1 for softmax)");
    sub->add_option("--t1", t1, "tm-pair: first template as a wildcard list");
    sub->add_option("--t2", t2, "tm-pair: second template as a wildcard list");
    sub->add_option("--alphabet", alphabet, "tm-pair: alphabet size");
    sub->add_option("--out", out, "output directory");
    sub->callback([this] { code = run(); });
  }

  int run() const {
    const Activation act = parse_activation(activation);
    std::vector<int> hs = heads.empty() ? (act == Activation::relu ? std::vector<int>{1, 2, 4, 8} : std::vector<int>{1})
                                        : parse_int_list(heads);
    if (act == Activation::softmax && (hs.size() != 1 || hs[0] != 1))
      throw UsageError("softmax certification is defined for single-head models only");
    CertificationReport rep;
    bool ok = true;
    if (task == "toy-icqa") {
      const Dataset toy = toy_icqa();
      rep = certify(toy_witness(), toy_shape(), act, hs, models, seed, &toy);
      if (act == Activation::relu) ok = rep.max_accuracy <= 0.75;
    } else {
      const Template a{parse_int_list(t1)}, b{parse_int_list(t2)};
      if (!a.is_canonical() || !b.is_canonical() || a.length() != b.length())
        throw UsageError("--t1/--t2 must be canonical templates of equal length");
      rep = certify(template_dependence_witness(a, b, alphabet), template_pair_shape(a.length(), alphabet), act, hs,
                    models, seed);
      if (act == Activation::relu) ok = rep.consistent_models == 0;
    }
    ok = ok && rep.residual_ok();
    json j = rep.to_json();
    j["task"] = task;
    j["passed"] = ok;
    const fs::path dir = resolve_out(out, "verify-" + task);
    write_text(dir / "report.json", j.dump(2) + "\n");
    std::cout << task << " " << activation << ": models " << rep.models_tested << ", max residual " << rep.max_residual
              << ", max accuracy " << rep.max_accuracy << (ok ? " PASS" : " FAIL") << "\n";
    return ok ? kExitOk : kExitFailed;
  }
};

// ---------------------------------------------------------------------------

struct AttnCmd {
  std::string checkpoint;
  std::string input;
  std::string tokens;
  std::string out;
  int code = kExitOk;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("attn", "export attention maps as JSON and SVG heatmaps");
    sub->add_option("--checkpoint", checkpoint, "model JSON")->required();
    auto* in = sub->add_option("--input", input, "demo string: letters questions, digits answers, '=' sign");
    auto* tk = sub->add_option("--tokens", tokens, "comma-separated token ids");
    in->excludes(tk);
    sub->add_option("--out", out, "output directory");
    sub->callback([this] { code = run(); });
  }

  int run() const {
    const json j = load_json(checkpoint);
    const Model m = model_from_json(j);
    const auto vocab = vocabulary_from_json(j).value_or(Vocabulary{m.config.d_token - 1, 0});
    if (vocab.d_token() != m.config.d_token) throw UsageError("checkpoint vocabulary does not match d_token");
    Sequence seq;
    if (!input.empty()) {
      seq = tokenize(input, vocab);
    } else if (!tokens.empty()) {
      seq = parse_int_list(tokens);
    } else {
      throw UsageError("attn: give --input or --tokens");
    }
    if (static_cast<int>(seq.size()) > m.config.n_positions) throw UsageError("attn: input longer than n_positions");
    for (int t : seq)
      if (t < 0 || t >= m.config.d_token) throw UsageError("attn: token id out of range");
    const fs::path dir = resolve_out(out, "attn");
    const json maps = attention_json(m, seq, vocab);
    write_text(dir / "attn.json", maps.dump(2) + "\n");
    const auto labels = token_labels(seq, vocab);
    for (const auto& am : attention_maps(m, seq)) {
      const std::string name = "layer" + std::to_string(am.layer) + "_head" + std::to_string(am.head);
      write_text(dir / (name + ".svg"),
                 heatmap_svg(query_major(am.alpha), labels, labels, name + " (rows: query, columns: attended)"));
    }
    std::cout << "wrote " << maps.size() << " maps to " << dir.string() << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------

struct GradcheckCmd {
  std::uint64_t seed = 0;
  int models = 20;
  double eps = 1e-5;
  bool mutate = false;
  std::string out;
  int code = kExitOk;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("gradcheck", "compare backward against central differences");
    sub->add_option("--seed", seed, "seed");
    sub->add_option("--models", models, "random models per activation");
    sub->add_option("--eps", eps, "finite-difference step");
    sub->add_flag("--mutate", mutate, "flip the sign of one gradient term (sensitivity check)");
    sub->add_option("--out", out, "output directory");
    sub->callback([this] { code = run(); });
  }

  static LossAndGrad mutated(const Model& m, const std::vector<TaskExample>& b) {
    LossAndGrad r = backward(m, b);
    r.grad.layers[0][0].w_v *= -1.0;
    return r;
  }

  int run() const {
    const GradientFn fn = mutate ? GradientFn(mutated) : GradientFn(default_gradient);
    json rep = {{"seed", seed}, {"models", models}, {"eps", eps}, {"tolerance", 1e-4}, {"mutated", mutate}};
    bool ok = true;
    for (Activation act : {Activation::relu, Activation::softmax}) {
      const auto r = grad_check_suite(act, models, seed, eps, fn);
      json sweep = json::object();
      for (double e : {1e-4, 1e-5, 1e-6}) {
        std::ostringstream key;
        key << e;
        sweep[key.str()] = grad_check_suite(act, models, seed, e, fn).worst;
      }
      rep[to_string(act)] = {{"worst_rel_error", r.worst}, {"eps_sweep", sweep}};
      std::cout << to_string(act) << ": worst relative error " << r.worst << " over " << r.models << " models\n";
      ok = ok && r.worst <= 1e-4;
    }
    rep["passed"] = ok;
    write_text(resolve_out(out, "gradcheck") / "report.json", rep.dump(2) + "\n");
    std::cout << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? kExitOk : kExitFailed;
  }
};

// ---------------------------------------------------------------------------

struct GenCmd {
  DataOptions data;
  std::string out;
  int code = kExitOk;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("gen", "write a dataset as JSON Lines");
    data.add_to(sub);
    sub->add_option("--out", out, "output file (default: stdout)");
    sub->callback([this] { code = run(); });
  }

  int run() const {
    const Dataset ds = data.build();
    if (out.empty()) {
      write_dataset(std::cout, ds);
    } else {
      std::ostringstream os;
      write_dataset(os, ds);
      write_text(out, os.str());
      std::cerr << "wrote " << ds.size() << " examples to " << out << "\n";
    }
    return kExitOk;
  }
};

/// argv with `--key=value` pairs from `--config FILE` spliced in right after the subcommand,
/// so flags given on the command line (parsed later) take precedence.
std::vector<std::string> splice_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.size() < 2) return args;
  std::vector<std::string> out{args[0], args[1]};
  for (const auto& [k, v] : load_kv_config(path)) out.push_back("--" + k + "=" + v);
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnlab: attention-only transformer constructions, certificates and training"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config;
  ConstructCmd construct;
  TrainCmd train_cmd;
  EvalCmd eval;
  VerifyDependenceCmd verify;
  AttnCmd attn;
  GradcheckCmd gradcheck;
  GenCmd gen;
  construct.add(app);
  train_cmd.add(app);
  eval.add(app);
  verify.add(app);
  attn.add(app);
  gradcheck.add(app);
  gen.add(app);
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->add_option("--config", config, "flat key = value file; command-line flags override it");

  try {
    auto args = splice_config(argc, argv);
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  for (int c : {construct.code, train_cmd.code, eval.code, verify.code, attn.code, gradcheck.code, gen.code})
    if (c != kExitOk) return c;
  return kExitOk;
}
