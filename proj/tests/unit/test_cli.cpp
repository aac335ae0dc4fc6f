#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "raf/cli.hpp"
#include "raf/data_io.hpp"
#include "raf/training.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "raf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = raf::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("raf_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_CASE("params at the large configuration") {
  const Run r = run({"params", "--nq", "2400", "--nv", "2048", "--nout", "2000", "--tq", "310", "--tv", "310", "--trho",
                     "510"});
  CHECK(r.code == 0);
  CHECK(r.out.find("full=9830400000 tucker=51409880") != std::string::npos);
}

TEST_CASE("score on the three-question fixture") {
  const std::string dir = RAF_FIXTURE_DIR;
  const Run r = run({"score", "--pred", dir + "/preds.tsv", "--human", dir + "/humans.tsv"});
  CHECK(r.code == 0);
  CHECK(r.out == "accuracy=0.555556 count=3\n");
}

TEST_CASE("gradcheck prints every tensor and passes") {
  const Run r = run({"gradcheck", "--seed", "1", "--preset", "desk"});
  CHECK(r.code == 0);
  CHECK(r.out.find("image.question_proj max_rel_error=") != std::string::npos);
  CHECK(r.out.find("final.output_proj max_rel_error=") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);

  const Run strict = run({"gradcheck", "--seed", "1", "--variant", "i", "--tol", "1e-30"});
  CHECK(strict.code == 1);
  CHECK(strict.out.find("FAIL") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"params", "--nq", "abc"}).code == 2);
  CHECK(run({"gen-synth", "--task", "grid"}).code == 2);
  CHECK(run({"gen-synth", "--task", "nope", "--out", "x"}).code == 2);
  CHECK(run({"train", "--data", "d", "--out", "o", "--variant", "q"}).code == 2);
  CHECK(run({"gradcheck", "--preset", "huge"}).code == 2);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("gen-synth") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1 and leave no output behind") {
  TempDir dir("cli_errors");
  CHECK(run({"eval", "--data", dir / "missing", "--ckpt", dir / "none.ckpt"}).code != 0);
  const Run bad_lr = run({"train", "--data", dir / "missing", "--out", dir / "m.ckpt", "--lr", "-1"});
  CHECK(bad_lr.code != 0);
  CHECK_FALSE(fs::exists(dir / "m.ckpt"));
  const Run bad_sigma = run({"gen-synth", "--task", "grid", "--n", "5", "--sigma", "-1", "--out", dir / "d"});
  CHECK(bad_sigma.code != 0);
  CHECK_FALSE(fs::exists(dir / "d"));
}

TEST_CASE("gen-synth, train and eval end to end") {
  TempDir dir("cli_e2e");
  Run r = run({"gen-synth", "--task", "grid", "--n", "200", "--seed", "3", "--out", dir / "train"});
  REQUIRE(r.code == 0);
  CHECK(raf::read_dataset(dir / "train").size() == 200);
  CHECK(run({"gen-synth", "--task", "grid", "--n", "5", "--out", dir / "train"}).code == 1);

  const std::vector<std::string> train_args{"train",  "--data",  dir / "train", "--variant", "i",
                                            "--steps", "30",     "--batch",     "8",         "--lr",
                                            "1e-3",   "--seed",  "4",           "--log-every", "10", "--out"};
  auto a = train_args;
  a.push_back(dir / "a.ckpt");
  auto b = train_args;
  b.push_back(dir / "b.ckpt");
  r = run(a);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("steps=30") != std::string::npos);
  CHECK(r.err.find("step 10 loss") != std::string::npos);
  REQUIRE(run(b).code == 0);

  const auto ca = raf::load_checkpoint(dir / "a.ckpt");
  const auto cb = raf::load_checkpoint(dir / "b.ckpt");
  CHECK(ca.model == cb.model);
  CHECK(ca.adam->step == 30);

  r = run({"eval", "--data", dir / "train", "--ckpt", dir / "a.ckpt", "--dump-attention", dir / "att.tsv"});
  CHECK(r.code == 0);
  CHECK(r.out.find("accuracy=") == 0);
  CHECK(r.out.find("count=200") != std::string::npos);
  CHECK(fs::exists(dir / "att.tsv"));

  // Checkpoint trained on grid dims but evaluated against data with different dims.
  REQUIRE(run({"gen-synth", "--task", "grid", "--n", "4", "--k", "3", "--out", dir / "k3"}).code == 0);
  CHECK(run({"eval", "--data", dir / "k3", "--ckpt", dir / "a.ckpt"}).code == 1);

  fs::resize_file(dir / "a.ckpt", 100);
  CHECK(run({"eval", "--data", dir / "train", "--ckpt", dir / "a.ckpt"}).code == 1);
}
