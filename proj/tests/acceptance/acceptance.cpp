// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   raf_acceptance            run everything
//   raf_acceptance 3 5        run only the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "raf/cli.hpp"
#include "raf/evaluation.hpp"
#include "raf/presets.hpp"
#include "raf/rng.hpp"
#include "raf/training.hpp"
#include "raf/tucker_fusion.hpp"

using namespace raf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int run_tool(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "raf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  return code;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "raf_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Vector random_vector(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// ---------------------------------------------------------------------------

Outcome tucker_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  const int sets = 100;
  for (int s = 0; s < sets; ++s) {
    const FusionDims d{1 + rng.below(6), 1 + rng.below(7), 1 + rng.below(3),
                       1 + rng.below(4), 1 + rng.below(5), 1 + rng.below(8)};
    const TuckerFusionParams p = init_params(d, rng.next());
    const Tensor W = reconstruct_full_tensor(p);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector q = random_vector(d.n_q, rng), v = random_vector(d.n_v, rng);
      const Vector a = project_out(p, fuse_linear(p, q, v));
      const Vector b = full_bilinear_oracle(W, q, v);
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && secs < 10.0, std::to_string(sets) + " parameter sets, max abs error " + fmt("%.3e", worst) +
                                            ", " + fmt("%.2f", secs) + " s"};
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int failures = 0;
  std::string bad;
  for (Variant v : {Variant::IO, Variant::I, Variant::O}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const ModelConfig cfg = model_config(preset_by_name("desk"), v, seed);
      const ad::GradientReport r = gradient_check(init_model(cfg), random_example(cfg, seed), 1e-5, 1e-4);
      worst = std::max(worst, r.max_rel_error);
      if (!r.pass) {
        ++failures;
        bad += " " + std::string(variant_name(v)) + "/" + std::to_string(seed);
      }
    }
  }
  const double secs = seconds_since(t0);
  std::string detail = "15 checks (3 variants x 5 seeds, h=1e-5, 64-bit gradients, extended-precision difference quotient), max rel error " + fmt("%.3e", worst) + ", " +
                       fmt("%.1f", secs) + " s";
  if (failures) detail += ", failed:" + bad;
  return {failures == 0 && secs < 120.0, detail};
}

Outcome parameter_accounting() {
  std::string out;
  const int code = run_tool({"params", "--nq", "2400", "--nv", "2048", "--nout", "2000", "--tq", "310", "--tv", "310",
                             "--trho", "510"},
                            &out);
  const bool printed = out.find("full=9830400000 tucker=51409880") != std::string::npos;
  const ParameterCount c = parameter_count({2400, 2048, 310, 310, 510, 2000});
  const double ratio = static_cast<double>(c.tucker) / static_cast<double>(c.full);
  return {code == 0 && printed && ratio < 0.006,
          "full=" + std::to_string(c.full) + " tucker=" + std::to_string(c.tucker) + " ratio=" + fmt("%.5f", ratio)};
}

Outcome metric_correctness() {
  bool table_ok = true;
  std::string table;
  for (std::size_t m = 0; m <= kHumanAnswers; ++m) {
    HumanAnswerRecord r;
    for (std::size_t i = 0; i < kHumanAnswers; ++i) r.answers[i] = i < m ? "yes" : "no";
    const double got = vqa_accuracy("yes", r);
    // Exact rational check: got * 3 must equal min(m, 3) and got must be the correctly rounded m/3.
    const double num = static_cast<double>(std::min<std::size_t>(m, 3));
    table_ok = table_ok && got == num / 3.0 && (m >= 3 ? got == 1.0 : got * 3.0 == num);
    table += (m ? "," : "") + fmt("%.4g", got);
  }
  std::string out;
  const fs::path fixtures = RAF_FIXTURE_DIR;
  const int code =
      run_tool({"score", "--pred", (fixtures / "preds.tsv").string(), "--human", (fixtures / "humans.tsv").string()}, &out);
  double acc = -1.0;
  std::sscanf(out.c_str(), "accuracy=%lf", &acc);
  const bool fixture_ok = code == 0 && std::abs(acc - 0.5556) <= 1e-4;
  return {table_ok && fixture_ok, "matches 0..10 -> {" + table + "}, fixture accuracy " + fmt("%.6f", acc)};
}

Outcome attention_invariants() {
  const Preset& desk = preset_by_name("desk");
  Rng rng(77);
  const int inputs = 1000;
  double worst_sum = 0.0, worst_logit = 0.0, worst_perm = 0.0;
  bool negative = false, argmax_changed = false;
  for (int n = 0; n < inputs; ++n) {
    const Variant v = n % 3 == 0 ? Variant::IO : n % 3 == 1 ? Variant::I : Variant::O;
    const RafModel m = init_model(model_config(desk, v, 1000 + static_cast<std::uint64_t>(n)));
    const Example ex = random_example(m.config, 5000 + static_cast<std::uint64_t>(n));
    const ForwardOutput base = forward(m, ex);

    for (const auto* att : {&base.image_attention, &base.object_attention}) {
      if (!att->has_value()) continue;
      const Tensor& w = **att;
      for (std::size_t r = 0; r < w.extent(0); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.extent(1); ++i) {
          negative = negative || w(r, i) < 0.0;
          s += w(r, i);
        }
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      }
    }

    if (!m.config.uses_objects()) continue;
    std::vector<std::size_t> perm(m.config.objects);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    Example px = ex;
    for (std::size_t i = 0; i < m.config.objects; ++i)
      for (std::size_t c = 0; c < m.config.n_v; ++c) px.objects(i, c) = ex.objects(perm[i], c);
    const ForwardOutput out = forward(m, px);
    const Tensor scores = score_locations(*m.object_branch, ex.q, ex.objects);
    const Tensor pscores = score_locations(*m.object_branch, px.q, px.objects);
    for (std::size_t r = 0; r < scores.extent(0); ++r)
      for (std::size_t i = 0; i < scores.extent(1); ++i)
        worst_perm = std::max(worst_perm, std::abs(pscores(r, i) - scores(r, perm[i])));
    for (std::size_t k = 0; k < out.logits.size(); ++k)
      worst_logit = std::max(worst_logit, std::abs(out.logits[k] - base.logits[k]));
    argmax_changed = argmax_changed || argmax(out.logits) != argmax(base.logits);
  }
  const bool ok = !negative && worst_sum < 1e-10 && worst_perm < 1e-10 && worst_logit < 1e-10 && !argmax_changed;
  return {ok, std::to_string(inputs) + " inputs, max |sum-1| " + fmt("%.2e", worst_sum) + ", attention-logit permutation error " +
                  fmt("%.2e", worst_perm) + ", answer-logit change " + fmt("%.2e", worst_logit) +
                  (argmax_changed ? ", argmax changed" : ", argmax unchanged") + (negative ? ", negative weight" : "")};
}

// --- learnability ------------------------------------------------------------

struct LearnSettings {
  std::size_t steps = 5000;
  std::size_t batch = 32;
  double lr = 3e-3;
};

const LearnSettings kLearn;

RafModel train_on(const Dataset& data, Variant v, std::uint64_t seed, double* train_acc = nullptr) {
  TrainConfig tc;
  tc.steps = kLearn.steps;
  tc.batch = kLearn.batch;
  tc.lr = kLearn.lr;
  tc.seed = seed;
  tc.log_every = 0;
  ModelConfig cfg = model_config(preset_by_name("desk"), v, seed);
  TrainResult r = train(init_model(cfg), data, tc);
  if (r.stopped_early) throw NumericError("training stopped early: " + r.diagnostic);
  if (train_acc) *train_acc = evaluate_dataset(r.model, data).accuracy;
  return std::move(r.model);
}

struct TaskData {
  Dataset train, test;
};

TaskData task_data(SynthTask task, double sigma) {
  const Preset& desk = preset_by_name("desk");
  return {generate_synthetic(synth_spec(desk, task, 8000, sigma, 101)),
          generate_synthetic(synth_spec(desk, task, 2000, sigma, 202))};
}

Outcome learnability() {
  const auto t0 = Clock::now();
  const TaskData joint = task_data(SynthTask::Joint, 0.1);
  const TaskData grid = task_data(SynthTask::Grid, 0.1);
  const TaskData object = task_data(SynthTask::Object, 0.1);

  const double io = evaluate_dataset(train_on(joint.train, Variant::IO, 1), joint.test).accuracy;
  const double i = evaluate_dataset(train_on(joint.train, Variant::I, 2), joint.test).accuracy;
  const double o = evaluate_dataset(train_on(joint.train, Variant::O, 3), joint.test).accuracy;
  const double gi = evaluate_dataset(train_on(grid.train, Variant::I, 4), grid.test).accuracy;
  const double oo = evaluate_dataset(train_on(object.train, Variant::O, 5), object.test).accuracy;
  const double secs = seconds_since(t0);

  const bool ok = io >= 0.90 && i <= 0.40 && o <= 0.40 && gi >= 0.95 && oo >= 0.95 && secs < 900.0;
  return {ok, "held-out accuracy: joint RAF-IO " + fmt("%.4f", io) + " (>= 0.90), RAF-I " + fmt("%.4f", i) +
                  " (<= 0.40), RAF-O " + fmt("%.4f", o) + " (<= 0.40); grid RAF-I " + fmt("%.4f", gi) +
                  " (>= 0.95); object RAF-O " + fmt("%.4f", oo) + " (>= 0.95); " + std::to_string(kLearn.steps) +
                  " steps, batch " + std::to_string(kLearn.batch) + ", lr " + fmt("%g", kLearn.lr) + ", " +
                  fmt("%.0f", secs) + " s"};
}

// --- determinism and persistence -------------------------------------------

Outcome determinism() {
  const fs::path dir = scratch_dir();
  bool ok = true;
  std::vector<std::string> notes;

  const int gen = run_tool({"gen-synth", "--task", "joint", "--n", "256", "--seed", "9", "--out", (dir / "data").string()});
  const std::vector<std::string> base{"train", "--data", (dir / "data").string(), "--variant", "io", "--steps", "200",
                                      "--batch", "16", "--lr", "1e-3", "--seed", "4", "--log-every", "0", "--out"};
  auto a = base, b = base;
  a.push_back((dir / "a.ckpt").string());
  b.push_back((dir / "b.ckpt").string());
  const bool ran = gen == 0 && run_tool(a) == 0 && run_tool(b) == 0;
  const auto ba = file_bytes(dir / "a.ckpt"), bb = file_bytes(dir / "b.ckpt");
  const bool identical = ran && !ba.empty() && ba == bb;
  ok = ok && identical;
  notes.push_back(identical ? "two train runs bit-identical (" + std::to_string(ba.size()) + " bytes)"
                            : "train runs differ or failed");

  bool exact = true;
  for (Variant v : {Variant::IO, Variant::I, Variant::O}) {
    const RafModel m = init_model(model_config(preset_by_name("desk"), v, 31));
    AdamState st = make_adam_state(m);
    st.step = 3;
    Rng rng(32);
    for (auto* moments : {&st.first_moment, &st.second_moment})
      for (Tensor& t : *moments)
        for (double& x : t.data()) x = rng.normal();
    const fs::path p = dir / ("rt_" + std::string(variant_name(v)) + ".ckpt");
    save_checkpoint(m, &st, p);
    const Checkpoint ck = load_checkpoint(p);
    exact = exact && ck.model == m && ck.adam && *ck.adam == st;
  }
  ok = ok && exact;
  notes.push_back(exact ? "save/load round trip exact" : "round trip mismatch");

  const auto good = file_bytes(dir / "rt_io.ckpt");
  std::vector<std::vector<char>> corrupt;
  corrupt.emplace_back(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 2));
  corrupt.emplace_back(good.begin(), good.end() - 1);
  corrupt.push_back(good);
  corrupt.back()[0] = 'Z';
  corrupt.push_back(good);
  corrupt.back()[4] = 2;
  corrupt.push_back(good);
  corrupt.back().push_back('x');
  corrupt.push_back(good);
  for (std::size_t i = 0; i < 8; ++i) corrupt.back()[4 + 4 + 9 * 4 + 1 + 8 + i] = static_cast<char>(0xff);
  corrupt.push_back(good);
  corrupt.back()[4 + 4 + 9 * 4] = 7;
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < corrupt.size(); ++i) {
    const fs::path p = dir / ("bad" + std::to_string(i) + ".ckpt");
    std::ofstream(p, std::ios::binary).write(corrupt[i].data(), static_cast<std::streamsize>(corrupt[i].size()));
    try {
      (void)load_checkpoint(p);
    } catch (const std::exception&) {
      ++rejected;
    }
  }
  ok = ok && rejected == corrupt.size();
  notes.push_back(std::to_string(rejected) + "/" + std::to_string(corrupt.size()) + " corrupted checkpoints rejected");
  fs::remove_all(dir);

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {ok, detail};
}

Outcome localization() {
  const Preset& desk = preset_by_name("desk");
  const TaskData grid = task_data(SynthTask::Grid, 0.0);
  double train_acc = 0.0;
  const RafModel m = train_on(grid.train, Variant::I, 8, &train_acc);
  std::size_t hits = 0;
  for (const Example& ex : grid.test.examples) {
    const ForwardOutput out = forward(m, ex);
    if (argmax(out.image_attention->row(0)) == planted_cell(ex, desk.grid)) ++hits;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(grid.test.size());
  return {frac >= 0.90, "image-branch argmax on the planted cell for " + fmt("%.4f", frac) +
                            " of held-out examples (>= 0.90), train accuracy " + fmt("%.4f", train_acc)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "tucker equivalence", tucker_equivalence},   {2, "gradient fidelity", gradient_fidelity},
      {3, "parameter accounting", parameter_accounting}, {4, "metric correctness", metric_correctness},
      {5, "attention invariants", attention_invariants}, {6, "desk-scale learnability", learnability},
      {7, "determinism and persistence", determinism},  {8, "attention localization", localization}};

  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
