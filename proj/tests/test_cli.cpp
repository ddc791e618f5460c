#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "disrep/cli.hpp"
#include "disrep/data.hpp"

using namespace disrep;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Scratch directory holding a tiny shapes config.
struct Workspace {
  fs::path dir = fs::temp_directory_path() / "disrep_test_cli";
  fs::path config = dir / "tiny.cfg";
  fs::path out = dir / "run";

  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(config) << "dataset = shapes\nwidth_divisor = 16\nshapes_train = 200\nshapes_test = 60\n"
                             "labeled_count = 30\nbatch_size = 16\niters = 3\nramp_iters = 2\n"
                             "checkpoint_every = 0\n";
  }
  ~Workspace() { fs::remove_all(dir); }

  std::vector<std::string> train_args() const {
    return {"train", "--config", config.string(), "--seed", "4", "--data-dir", (dir / "data").string(),
            "--output-dir", out.string()};
  }
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == exit_validation);
  CHECK(run({"frobnicate"}).code == exit_validation);
  CHECK(run({"--help"}).code == exit_ok);

  const Result missing = run({"train"});
  CHECK(missing.code == exit_validation);
  CHECK(missing.err.find("--config") != std::string::npos);

  Workspace w;
  auto bad_key = w.train_args();
  bad_key.insert(bad_key.end(), {"--set", "learning_rate=1"});
  CHECK(run(bad_key).code == exit_validation);

  auto bad_form = w.train_args();
  bad_form.insert(bad_form.end(), {"--set", "iters"});
  CHECK(run(bad_form).code == exit_validation);

  auto bad_dataset = w.train_args();
  bad_dataset.insert(bad_dataset.end(), {"--dataset", "cifar"});
  CHECK(run(bad_dataset).code == exit_validation);

  CHECK(run({"generate"}).code == exit_validation);
  CHECK(run({"evaluate", "--checkpoint", (w.dir / "none.ckpt").string()}).code == exit_validation);
}

TEST_CASE("train, render and evaluate from the command line") {
  Workspace w;
  const Result trained = run(w.train_args());
  REQUIRE(trained.code == exit_ok);
  CHECK(trained.out.find("iterations: 3\n") != std::string::npos);
  const fs::path ckpt = w.out / "ckpt_00000003.ckpt";
  REQUIRE(fs::exists(ckpt));

  const std::string manifest = slurp(w.out / "manifest_train.txt");
  CHECK(manifest.find("command: train\n") != std::string::npos);
  CHECK(manifest.find("seed: 4\n") != std::string::npos);
  CHECK(manifest.find("config.width_divisor: 16\n") != std::string::npos);

  SUBCASE("reruns are byte-identical") {
    const fs::path again = w.dir / "again";
    auto args = w.train_args();
    args.back() = again.string();
    REQUIRE(run(args).code == exit_ok);
    CHECK(read_file(again / "ckpt_00000003.ckpt") == read_file(ckpt));
    CHECK(slurp(again / "loss.csv") == slurp(w.out / "loss.csv"));
  }

  SUBCASE("resume appends to the log") {
    const Result resumed =
        run({"train", "--checkpoint", ckpt.string(), "--iters", "5", "--output-dir", w.out.string()});
    REQUIRE(resumed.code == exit_ok);
    CHECK(fs::exists(w.out / "ckpt_00000005.ckpt"));
    std::ifstream log(w.out / "loss.csv");
    int rows = 0;
    for (std::string l; std::getline(log, l);) ++rows;
    CHECK(rows == 6);
  }

  SUBCASE("grids") {
    const std::vector<std::string> base{"--checkpoint", ckpt.string(), "--output-dir", w.out.string(), "--seed", "9"};
    auto with = [&](std::vector<std::string> head) {
      head.insert(head.end(), base.begin(), base.end());
      return run(head);
    };
    const Result sweep = with({"generate", "--columns", "4"});
    REQUIRE(sweep.code == exit_ok);
    CHECK(sweep.out.find("(3x4)") != std::string::npos);
    CHECK(fs::exists(w.out / "class-sweep_3_9.png"));
    CHECK(fs::exists(w.out / "manifest_generate.txt"));

    CHECK(with({"generate", "--mode", "continuous-sweep", "--steps", "5"}).code == exit_ok);
    CHECK(fs::exists(w.out / "continuous-sweep_3_9.png"));
    CHECK(with({"generate", "--mode", "translate"}).code == exit_validation);

    // An explicit IDX input file feeds translation.
    Rng rng(1);
    Dataset inputs = make_shapes(3, 16, rng);
    save_idx(inputs, w.dir / "in-images.idx", w.dir / "in-labels.idx");
    const Result tr =
        with({"translate", "--input", (w.dir / "in-images.idx").string(), "--count", "3", "--classes", "0,2"});
    REQUIRE(tr.code == exit_ok);
    CHECK(tr.out.find("(3x3)") != std::string::npos);
    CHECK(with({"translate", "--classes", "zero"}).code == exit_validation);
    CHECK(with({"translate", "--input", (w.dir / "in-images.idx").string(), "--count", "4"}).code ==
          exit_validation);

    const Result in = with({"interpolate", "--count", "2", "--steps", "4"});
    REQUIRE(in.code == exit_ok);
    CHECK(in.out.find("(2x4)") != std::string::npos);
  }

  SUBCASE("oracle and evaluation") {
    const Result oracle = run({"oracle-train", "--config", w.config.string(), "--seed", "4", "--iters", "20",
                               "--data-dir", (w.dir / "data").string(), "--output-dir", w.out.string()});
    REQUIRE(oracle.code == exit_ok);
    CHECK(oracle.out.find("warning:") != std::string::npos);
    REQUIRE(fs::exists(w.out / "oracle.ckpt"));

    CHECK(run({"evaluate", "--checkpoint", ckpt.string()}).code == exit_validation);
    const Result ev = run({"evaluate", "--checkpoint", ckpt.string(), "--oracle", (w.out / "oracle.ckpt").string(),
                           "--per-class", "10", "--data-dir", (w.dir / "data").string(), "--output-dir",
                           w.out.string()});
    REQUIRE(ev.code == exit_ok);
    CHECK(ev.out.find("per_class: 10\n") != std::string::npos);
    CHECK(ev.out.find("encoder_samples: 60\n") != std::string::npos);
    CHECK(slurp(w.out / "eval_report.txt") == ev.out);
    CHECK(fs::exists(w.out / "eval_classes.csv"));
  }
}
