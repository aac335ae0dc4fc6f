#include "raf/cli.hpp"

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "raf/data_io.hpp"
#include "raf/evaluation.hpp"
#include "raf/presets.hpp"
#include "raf/training.hpp"

namespace raf {

namespace {

std::string fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

struct GenSynthArgs {
  std::string task;
  std::size_t n = 0;
  std::size_t k = 0;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  std::string preset = "desk";
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string variant = "io";
  std::size_t steps = 1000;
  std::size_t batch = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::string preset = "desk";
  std::string out;
  std::size_t log_every = 100;
  std::size_t threads = 1;
};

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string humans;
  std::string dump;
  bool subset_average = false;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string preset = "desk";
  std::string variant = "io";
  double h = 1e-5;
  double tol = 1e-4;
  std::string oracle = "extended";
};

struct ParamsArgs {
  std::size_t nq = 0, nv = 0, nout = 0, tq = 0, tv = 0, trho = 0;
};

struct ScoreArgs {
  std::string pred;
  std::string human;
  bool subset_average = false;
};

int gen_synth(const GenSynthArgs& a, std::ostream& out, std::ostream& err) {
  const Preset& p = preset_by_name(a.preset);
  SynthSpec spec = synth_spec(p, parse_task(a.task), a.n, a.sigma, a.seed);
  if (a.k > 0) spec.k = a.k;
  spec.validate();
  err << "generating " << spec.count << " " << task_name(spec.task) << " examples (K=" << spec.k << ", sigma=" << spec.sigma
      << ", seed=" << spec.seed << ")\n";
  write_dataset(generate_synthetic(spec), a.out);
  out << "wrote " << spec.count << " examples to " << a.out << '\n';
  return 0;
}

int train_cmd(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Preset& p = preset_by_name(a.preset);
  const Variant variant = parse_variant(a.variant);
  TrainConfig tc;
  tc.lr = a.lr;
  tc.batch = a.batch;
  tc.steps = a.steps;
  tc.seed = a.seed;
  tc.log_every = a.log_every;
  tc.threads = a.threads;
  tc.validate();

  const Dataset data = read_dataset(a.data);
  ModelConfig cfg = model_config(p, variant, a.seed);
  cfg.n_q = data.n_q;
  cfg.n_v = data.n_v;
  cfg.grid = data.grid;
  cfg.objects = data.objects;
  cfg.n_answers = data.vocab.size();
  cfg.validate();

  err << "training variant " << variant_name(variant) << " on " << data.size() << " examples for " << tc.steps
      << " steps\n";
  TrainResult r = train(init_model(cfg), data, tc, std::nullopt, [&](std::size_t step, double loss) {
    err << "step " << step << " loss " << fixed(loss) << '\n';
  });
  save_checkpoint(r.model, &r.adam, a.out);
  if (r.stopped_early) {
    err << "error: training stopped: " << r.diagnostic << " (last good parameters saved to " << a.out << ")\n";
    return 1;
  }
  out << "steps=" << r.step_losses.size()
      << " final_loss=" << (r.interval_losses.empty() ? std::string("nan") : fixed(r.interval_losses.back())) << '\n';
  return 0;
}

int eval_cmd(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset data = read_dataset(a.data);
  const Checkpoint ck = load_checkpoint(a.ckpt);
  std::vector<HumanAnswerRecord> humans;
  if (!a.humans.empty()) humans = read_human_answers(a.humans);
  const EvalReport r = evaluate_dataset(ck.model, data, a.humans.empty() ? nullptr : &humans, a.subset_average);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  if (!a.dump.empty()) {
    dump_attention(ck.model, data, a.dump);
    err << "attention weights written to " << a.dump << '\n';
  }
  out << "accuracy=" << fixed(r.accuracy) << " count=" << r.count << '\n';
  return 0;
}

int gradcheck_cmd(const GradcheckArgs& a, std::ostream& out, std::ostream&) {
  if (!(a.h > 0.0) || !(a.tol > 0.0)) throw std::invalid_argument("--h and --tol must be positive");
  const ModelConfig cfg = model_config(preset_by_name(a.preset), parse_variant(a.variant), a.seed);
  const RafModel model = init_model(cfg);
  const Example ex = random_example(cfg, a.seed);
  const OraclePrecision precision = a.oracle == "double" ? OraclePrecision::Double : OraclePrecision::Extended;
  const ad::GradientReport rep = gradient_check(model, ex, a.h, a.tol, precision);
  for (const auto& t : rep.tensors) {
    out << t.name << " max_rel_error=" << sci(t.max_rel_error) << " entries=" << t.entries_checked
        << " worst_index=" << t.worst_index << " analytic=" << sci(t.worst_analytic) << " numeric=" << sci(t.worst_numeric)
        << '\n';
  }
  if (!rep.diagnostic.empty()) out << "diagnostic: " << rep.diagnostic << '\n';
  out << "max_rel_error=" << sci(rep.max_rel_error) << " tol=" << sci(rep.tol) << ' ' << (rep.pass ? "PASS" : "FAIL")
      << '\n';
  return rep.pass ? 0 : 1;
}

int params_cmd(const ParamsArgs& a, std::ostream& out) {
  const ParameterCount c = parameter_count({a.nq, a.nv, a.tq, a.tv, a.trho, a.nout});
  out << "full=" << c.full << " tucker=" << c.tucker << '\n';
  out << "ratio=" << sci(static_cast<double>(c.tucker) / static_cast<double>(c.full)) << '\n';
  return 0;
}

int score_cmd(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const auto preds = read_predictions(a.pred);
  const auto humans = read_human_answers(a.human);
  const EvalReport r = score_predictions(preds, humans, a.subset_average);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  out << "accuracy=" << fixed(r.accuracy) << " count=" << r.count << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reciprocal attention fusion VQA head: synthetic data, training, evaluation and checks", "raf"};
  app.require_subcommand(1, 1);
  const std::vector<std::string> presets{"desk", "paper"};

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "Write a planted synthetic dataset");
  gen->add_option("--task", gs.task, "grid | object | joint")->required()->check(CLI::IsMember({"grid", "object", "joint"}));
  gen->add_option("--n", gs.n, "Number of examples")->required();
  gen->add_option("--k", gs.k, "Answer classes (default: preset)");
  gen->add_option("--sigma", gs.sigma, "Gaussian noise level")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gs.seed, "Generator seed")->capture_default_str();
  gen->add_option("--preset", gs.preset, "Dimension preset")->capture_default_str()->check(CLI::IsMember(presets));
  gen->add_option("--out", gs.out, "Output dataset directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
  tr->add_option("--data", ta.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--variant", ta.variant, "io | i | o")->capture_default_str()->check(CLI::IsMember({"io", "i", "o"}));
  tr->add_option("--steps", ta.steps, "Optimizer steps")->capture_default_str();
  tr->add_option("--batch", ta.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--seed", ta.seed, "Model and shuffling seed")->capture_default_str();
  tr->add_option("--preset", ta.preset, "Fusion dimension preset")->capture_default_str()->check(CLI::IsMember(presets));
  tr->add_option("--out", ta.out, "Checkpoint path")->required();
  tr->add_option("--log-every", ta.log_every, "Steps per logged loss")->capture_default_str();
  tr->add_option("--threads", ta.threads, "Worker threads per batch")->capture_default_str()->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ev->add_option("--data", ea.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--ckpt", ea.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--humans", ea.humans, "humans.tsv with 10 answers per qid")->check(CLI::ExistingFile);
  ev->add_option("--dump-attention", ea.dump, "Write attention weights to this TSV");
  ev->add_flag("--subset-average", ea.subset_average, "Average consensus accuracy over 9-annotator subsets");

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  gc->set_help_flag("--help", "Print this help message and exit");
  gc->add_option("--seed", ga.seed, "Model and input seed")->capture_default_str();
  gc->add_option("--preset", ga.preset, "Dimension preset")->capture_default_str()->check(CLI::IsMember(presets));
  gc->add_option("--variant", ga.variant, "io | i | o")->capture_default_str()->check(CLI::IsMember({"io", "i", "o"}));
  gc->add_option("--h", ga.h, "Finite-difference step")->capture_default_str();
  gc->add_option("--tol", ga.tol, "Relative error tolerance")->capture_default_str();
  gc->add_option("--oracle-precision", ga.oracle, "Finite-difference loss precision: extended | double")
      ->capture_default_str()
      ->check(CLI::IsMember({"extended", "double"}));

  ParamsArgs pa;
  auto* pc = app.add_subcommand("params", "Full bilinear vs Tucker parameter counts");
  pc->add_option("--nq", pa.nq)->required()->check(CLI::PositiveNumber);
  pc->add_option("--nv", pa.nv)->required()->check(CLI::PositiveNumber);
  pc->add_option("--nout", pa.nout)->required()->check(CLI::PositiveNumber);
  pc->add_option("--tq", pa.tq)->required()->check(CLI::PositiveNumber);
  pc->add_option("--tv", pa.tv)->required()->check(CLI::PositiveNumber);
  pc->add_option("--trho", pa.trho)->required()->check(CLI::PositiveNumber);

  ScoreArgs sa;
  auto* sc = app.add_subcommand("score", "Consensus accuracy of a predictions file");
  sc->add_option("--pred", sa.pred, "preds.tsv")->required()->check(CLI::ExistingFile);
  sc->add_option("--human", sa.human, "humans.tsv")->required()->check(CLI::ExistingFile);
  sc->add_flag("--subset-average", sa.subset_average, "Average over 9-annotator subsets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (*gen) return gen_synth(gs, out, err);
    if (*tr) return train_cmd(ta, out, err);
    if (*ev) return eval_cmd(ea, out, err);
    if (*gc) return gradcheck_cmd(ga, out, err);
    if (*pc) return params_cmd(pa, out);
    if (*sc) return score_cmd(sa, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace raf
