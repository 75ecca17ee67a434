#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oim/records.hpp"
#include "oim/rng.hpp"
#include "oim/synth.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string binary() {
  const char* path = std::getenv("OIMSEARCH_BIN");
  REQUIRE_MESSAGE(path != nullptr, "OIMSEARCH_BIN must point at the CLI");
  return path;
}

// exit code of the command with stdout/stderr captured under dir
int run_cli(const std::string& args, const fs::path& dir) {
  std::string cmd = binary() + " " + args + " > " + (dir / "stdout.txt").string() +
                    " 2> " + (dir / "stderr.txt").string();
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("/tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// world small enough for sub-second training runs
void write_tiny_config(const fs::path& path, const fs::path& out_dir,
                       unsigned total_iters = 40) {
  std::ofstream out(path);
  out << R"({
  "out_dir": ")" << out_dir.string() << R"(",
  "synth": {"num_labeled": 8, "num_unlabeled_pool": 4, "raw_dim": 12,
            "scenes_train": 16, "scenes_test": 12, "persons_per_scene": 3.0},
  "train": {"total_iters": )" << total_iters << R"(, "lr_drop_iter": )"
      << (total_iters * 3 / 4) << R"(, "out_dim": 8,
            "oim": {"queue_capacity": 32}},
  "protocol": {"gallery_sizes": [6], "cmc_ks": [1, 5], "seeds": 2}
})";
}

}  // namespace

TEST_CASE("gradcheck passes clean and fails when corrupted") {
  fs::path dir = fresh_dir("oim_cli_gradcheck");
  CHECK(run_cli("gradcheck --out " + (dir / "out").string(), dir) == 0);
  std::string report = slurp(dir / "out" / "gradcheck_report.json");
  CHECK(json::parse(report)["all_passed"] == true);

  CHECK(run_cli("gradcheck --corrupt 0.5 --out " + (dir / "bad").string(),
                dir) != 0);
  CHECK(json::parse(slurp(dir / "bad" / "gradcheck_report.json"))["all_passed"] ==
        false);
}

TEST_CASE("training twice with one seed is byte-identical") {
  fs::path dir = fresh_dir("oim_cli_determinism");
  write_tiny_config(dir / "config.json", dir / "run1");
  CHECK(run_cli("train --config " + (dir / "config.json").string() +
                    " --seed 3",
                dir) == 0);
  write_tiny_config(dir / "config.json", dir / "run2");
  CHECK(run_cli("train --config " + (dir / "config.json").string() +
                    " --seed 3",
                dir) == 0);
  CHECK(slurp(dir / "run1" / "metrics.csv") ==
        slurp(dir / "run2" / "metrics.csv"));
  CHECK(slurp(dir / "run1" / "checkpoint.bin") ==
        slurp(dir / "run2" / "checkpoint.bin"));

  write_tiny_config(dir / "config.json", dir / "run3");
  CHECK(run_cli("train --config " + (dir / "config.json").string() +
                    " --seed 4",
                dir) == 0);
  CHECK(slurp(dir / "run1" / "metrics.csv") !=
        slurp(dir / "run3" / "metrics.csv"));
}

TEST_CASE("gen emits records reproducible from the documented seed stream") {
  fs::path dir = fresh_dir("oim_cli_gen");
  write_tiny_config(dir / "config.json", dir / "out");
  CHECK(run_cli("gen --config " + (dir / "config.json").string() + " --seed 11",
                dir) == 0);
  oim::SynthWorld loaded = oim::load_world((dir / "out" / "world.jsonl").string());

  oim::SynthConfig expect;
  expect.num_labeled = 8;
  expect.num_unlabeled_pool = 4;
  expect.raw_dim = 12;
  expect.scenes_train = 16;
  expect.scenes_test = 12;
  expect.persons_per_scene = 3.0;
  expect.seed = oim::derive_seed(11, 10);  // the world stream of master seed 11
  CHECK(loaded == gen_world(expect));

  std::vector<std::vector<oim::Detection>> dets = oim::load_detections(
      (dir / "out" / "detections.jsonl").string());
  // detections exist for test scenes only
  std::size_t with_dets = 0;
  for (int scene_id : loaded.train_scenes) {
    with_dets += dets[static_cast<std::size_t>(scene_id)].empty() ? 0 : 1;
  }
  CHECK(with_dets == 0);
}

TEST_CASE("checkpointed training evaluates end to end") {
  fs::path dir = fresh_dir("oim_cli_pipeline");
  write_tiny_config(dir / "config.json", dir / "out");
  CHECK(run_cli("train --config " + (dir / "config.json").string() +
                    " --seed 2",
                dir) == 0);
  CHECK(run_cli("eval --config " + (dir / "config.json").string() +
                    " --seed 2 --checkpoint " +
                    (dir / "out" / "checkpoint.bin").string() + " --out " +
                    (dir / "eval").string(),
                dir) == 0);
  json report = json::parse(slurp(dir / "eval" / "eval_report.json"));
  REQUIRE(report["medians"].size() == 1);
  CHECK(report["medians"][0]["gallery_size"] == 6);
  CHECK(report["medians"][0]["map"].is_number());
  CHECK(report["rows"].size() == 2);  // two protocol seeds

  // flag overrides beat the config file
  CHECK(run_cli("eval --config " + (dir / "config.json").string() +
                    " --seed 2 --checkpoint " +
                    (dir / "out" / "checkpoint.bin").string() + " --out " +
                    (dir / "eval2").string() + " --gallery-sizes 4,8 --seeds 1",
                dir) == 0);
  json report2 = json::parse(slurp(dir / "eval2" / "eval_report.json"));
  CHECK(report2["medians"].size() == 2);
  CHECK(report2["rows"].size() == 2);
}

TEST_CASE("sweep writes a curve table and per-value medians") {
  fs::path dir = fresh_dir("oim_cli_sweep");
  write_tiny_config(dir / "config.json", dir / "out", 30);
  CHECK(run_cli("sweep --config " + (dir / "config.json").string() +
                    " --seed 5 --axis gallery_size --values 8,10 --seeds 2",
                dir) == 0);
  json report = json::parse(slurp(dir / "out" / "sweep_gallery_size_report.json"));
  CHECK(report["axis"] == "gallery_size");
  CHECK(report["rows"].size() == 4);  // two values times two seeds
  REQUIRE(report["medians"].size() == 2);
  CHECK(report["medians"][0]["value"] == "8");

  std::string curve = slurp(dir / "out" / "sweep_gallery_size_curve.csv");
  CHECK(curve.rfind("value,seed,cmc1,cmc5,map,final_train_accuracy\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 5);  // header + 4 rows
}

TEST_CASE("subsample sweep accepts the full keyword") {
  fs::path dir = fresh_dir("oim_cli_sweep_sub");
  write_tiny_config(dir / "config.json", dir / "out", 30);
  CHECK(run_cli("sweep --config " + (dir / "config.json").string() +
                    " --seed 6 --axis subsample --values 2,full --seeds 1",
                dir) == 0);
  json report = json::parse(slurp(dir / "out" / "sweep_subsample_report.json"));
  CHECK(report["rows"].size() == 2);
  CHECK(fs::exists(dir / "out" / "metrics_subsample_2_seed0.csv"));
  CHECK(fs::exists(dir / "out" / "metrics_subsample_full_seed0.csv"));
}

TEST_CASE("malformed invocations fail with a nonzero exit") {
  fs::path dir = fresh_dir("oim_cli_errors");
  // unknown key in the config file
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"trainer": {"total_iters": 5}})";
  }
  CHECK(run_cli("train --config " + (dir / "bad.json").string(), dir) != 0);
  CHECK(slurp(dir / "stderr.txt").find("trainer") != std::string::npos);

  // eval without a checkpoint
  CHECK(run_cli("eval --out " + (dir / "out").string(), dir) != 0);
  // unknown axis
  CHECK(run_cli("sweep --axis bogus --values 1", dir) != 0);
  // unknown loss name
  CHECK(run_cli("train --loss centroid --out " + (dir / "out").string(),
                dir) != 0);
  // missing config file
  CHECK(run_cli("train --config /tmp/oim_cli_missing.json", dir) != 0);
}

TEST_CASE("seed flag overrides the config file seed") {
  fs::path dir = fresh_dir("oim_cli_override");
  {
    std::ofstream out(dir / "config.json");
    out << R"({"seed": 5, "out_dir": ")" << (dir / "out").string() << R"(",
  "synth": {"num_labeled": 8, "num_unlabeled_pool": 4, "raw_dim": 12,
            "scenes_train": 16, "scenes_test": 12, "persons_per_scene": 3.0},
  "train": {"total_iters": 20, "lr_drop_iter": 16, "out_dim": 8,
            "oim": {"queue_capacity": 32}}})";
  }
  CHECK(run_cli("train --config " + (dir / "config.json").string() +
                    " --seed 7",
                dir) == 0);
  json report = json::parse(slurp(dir / "out" / "train_report.json"));
  CHECK(report["config"]["seed"] == 7);
}
