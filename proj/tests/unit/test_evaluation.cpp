#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "raf/evaluation.hpp"
#include "raf/presets.hpp"
#include "raf/rng.hpp"
#include "raf/training.hpp"

using namespace raf;
namespace fs = std::filesystem;

namespace {

HumanAnswerRecord record_with_matches(const std::string& answer, std::size_t m) {
  HumanAnswerRecord r;
  r.qid = "q";
  for (std::size_t i = 0; i < kHumanAnswers; ++i) r.answers[i] = i < m ? answer : "other";
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("raf_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("consensus accuracy over every match count") {
  for (std::size_t m = 0; m <= kHumanAnswers; ++m) {
    const double got = vqa_accuracy("yes", record_with_matches("yes", m));
    // min(m/3, 1) as the nearest double to the rational value.
    const double expect = m >= 3 ? 1.0 : static_cast<double>(m) / 3.0;
    CHECK(got == expect);
  }
  CHECK(vqa_accuracy("yes", record_with_matches("yes", 1)) * 3.0 == 1.0);
  CHECK(vqa_accuracy("yes", record_with_matches("yes", 2)) * 3.0 == 2.0);
}

TEST_CASE("matches are counted after normalization") {
  HumanAnswerRecord r = record_with_matches("x", 0);
  r.answers[0] = "Yes.";
  r.answers[1] = " YES ";
  CHECK(count_matches("yes", r) == 2);
  CHECK(count_matches("Yes!", r) == 2);
  CHECK(count_matches("no", r) == 0);
}

TEST_CASE("leave-one-out subset averaging") {
  for (std::size_t m = 0; m <= kHumanAnswers; ++m) {
    const double with_match = std::min(static_cast<double>(m - (m > 0 ? 1 : 0)) / 3.0, 1.0);
    const double without = std::min(static_cast<double>(m) / 3.0, 1.0);
    const double expect = (static_cast<double>(m) * with_match + static_cast<double>(10 - m) * without) / 10.0;
    CHECK(std::abs(vqa_accuracy("a", record_with_matches("a", m), true) - expect) < 1e-15);
  }
  CHECK(std::abs(vqa_accuracy("a", record_with_matches("a", 3), true) - 0.9) < 1e-15);
}

TEST_CASE("label accuracy of an oracle predictor is one") {
  const Dataset d = generate_synthetic(synth_spec(preset_by_name("desk"), SynthTask::Grid, 100, 0.1, 1));
  std::vector<std::size_t> pred;
  for (const auto& ex : d.examples) pred.push_back(ex.answer);
  const EvalReport r = evaluate_predictions(pred, d);
  CHECK(r.accuracy == 1.0);
  CHECK(r.count == 100);
  CHECK(r.qids.front() == d.examples.front().qid);
}

TEST_CASE("a uniform random predictor scores about 1/K") {
  const Dataset d = generate_synthetic(synth_spec(preset_by_name("desk"), SynthTask::Joint, 10000, 0.1, 2));
  Rng rng(3);
  std::vector<std::size_t> pred;
  for (std::size_t i = 0; i < d.size(); ++i) pred.push_back(rng.below(4));
  CHECK(std::abs(evaluate_predictions(pred, d).accuracy - 0.25) < 0.02);
}

TEST_CASE("empty evaluation warns and reports zero") {
  Dataset d;
  d.vocab = AnswerVocab::from_list({"a"});
  const EvalReport r = evaluate_predictions({}, d);
  CHECK(r.count == 0);
  CHECK(r.accuracy == 0.0);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("evaluation argument checks") {
  const Dataset d = generate_synthetic(synth_spec(preset_by_name("desk"), SynthTask::Grid, 3, 0.1, 1));
  const std::vector<std::size_t> short_pred{0, 1};
  CHECK_THROWS(evaluate_predictions(short_pred, d));
  const std::vector<std::size_t> pred{0, 1, 2};
  std::vector<HumanAnswerRecord> humans{record_with_matches("class0", 3)};
  humans[0].qid = d.examples[0].qid;
  CHECK_THROWS(evaluate_predictions(pred, d, &humans));
}

TEST_CASE("consensus scoring through the vocabulary") {
  const Dataset d = generate_synthetic(synth_spec(preset_by_name("desk"), SynthTask::Grid, 2, 0.1, 1));
  std::vector<HumanAnswerRecord> humans{record_with_matches("class1", 2), record_with_matches("class3", 9)};
  humans[0].qid = d.examples[0].qid;
  humans[1].qid = d.examples[1].qid;
  const std::vector<std::size_t> pred{1, 0};
  const EvalReport r = evaluate_predictions(pred, d, &humans);
  CHECK(r.scores[0] == 2.0 / 3.0);
  CHECK(r.scores[1] == 0.0);
  CHECK(r.accuracy == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("prediction files against the three-question fixture") {
  const auto humans = read_human_answers(fs::path(RAF_FIXTURE_DIR) / "humans.tsv");
  const auto preds = read_predictions(fs::path(RAF_FIXTURE_DIR) / "preds.tsv");
  REQUIRE(humans.size() == 3);
  REQUIRE(preds.size() == 3);
  const EvalReport r = score_predictions(preds, humans);
  CHECK(r.scores == std::vector<double>{1.0, 2.0 / 3.0, 0.0});
  CHECK(std::abs(r.accuracy - 0.5556) < 1e-4);
}

TEST_CASE("malformed answer files are rejected") {
  TempDir dir("eval_bad");
  std::ofstream(dir.path / "nine.tsv") << "q1\ta\ta\ta\ta\ta\ta\ta\ta\ta\n";
  CHECK_THROWS(read_human_answers(dir.path / "nine.tsv"));
  std::ofstream(dir.path / "dup.tsv") << "q1\ta\nq1\tb\n";
  CHECK_THROWS(read_predictions(dir.path / "dup.tsv"));
  CHECK_THROWS(read_predictions(dir.path / "missing.tsv"));

  const std::vector<std::pair<std::string, std::string>> preds{{"zz", "a"}};
  const std::vector<HumanAnswerRecord> humans{record_with_matches("a", 3)};
  CHECK_THROWS(score_predictions(preds, humans));
}

TEST_CASE("attention dump layout") {
  ModelConfig cfg;
  cfg.n_q = 6;
  cfg.n_v = 5;
  cfg.grid = 4;
  cfg.objects = 2;
  cfg.t_q = 3;
  cfg.t_v = 3;
  cfg.t_rho = 4;
  cfg.glimpses = 1;
  cfg.n_answers = 3;
  cfg.seed = 1;
  Dataset d;
  d.n_q = 6;
  d.n_v = 5;
  d.grid = 4;
  d.objects = 2;
  d.vocab = AnswerVocab::from_list({"a", "b", "c"});
  d.examples.push_back(random_example(cfg, 2));
  d.examples[0].qid = "only";

  TempDir dir("dump");
  dump_attention(init_model(cfg), d, dir.path / "att.tsv");
  const auto rows = read_tsv(dir.path / "att.tsv");
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == std::vector<std::string>{"qid", "branch", "glimpse", "index", "weight"});
  std::map<std::string, double> sums;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 5);
    CHECK(rows[i][0] == "only");
    sums[rows[i][1]] += std::stod(rows[i][4]);
  }
  CHECK(sums.size() == 2);
  for (const auto& [branch, s] : sums) CHECK(std::abs(s - 1.0) < 1e-12);

  cfg.variant = Variant::O;
  dump_attention(init_model(cfg), d, dir.path / "att_o.tsv");
  CHECK(read_tsv(dir.path / "att_o.tsv").size() == 3);
}

TEST_CASE("trained image attention lands on the planted cell") {
  const Preset& p = preset_by_name("desk");
  const Dataset d = generate_synthetic(synth_spec(p, SynthTask::Grid, 1000, 0.0, 5));
  TrainConfig cfg;
  cfg.lr = 3e-3;
  cfg.steps = 1500;
  cfg.seed = 6;
  const RafModel m = train(init_model(model_config(p, Variant::I, 7)), d, cfg).model;
  std::size_t hits = 0;
  for (const Example& ex : d.examples) {
    const ForwardOutput out = forward(m, ex);
    const auto w = out.image_attention->row(0);
    if (argmax(w) == planted_cell(ex, p.grid)) ++hits;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(d.size()) >= 0.9);
}
