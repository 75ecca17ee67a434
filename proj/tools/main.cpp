#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "oim/gradcheck.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  oimtool::Overrides overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> loss;
  std::optional<std::vector<std::size_t>> gallery_sizes;
  std::optional<std::size_t> seeds;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--out", flags.out_dir, "output directory override");
}

oimtool::ExperimentConfig resolve_config(const CommonFlags& flags) {
  oimtool::ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = oimtool::load_config(flags.config_path);
  }
  oimtool::Overrides overrides;
  overrides.seed = flags.seed;
  overrides.out_dir = flags.out_dir;
  overrides.loss = flags.loss;
  overrides.gallery_sizes = flags.gallery_sizes;
  overrides.seeds = flags.seeds;
  apply_overrides(config, overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic person search: embedding training and evaluation"};
  app.require_subcommand(1);

  CommonFlags gradcheck_flags;
  oim::GradCheckOptions gradcheck_options;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  add_common(gradcheck, gradcheck_flags);
  gradcheck
      ->add_option("--corrupt", gradcheck_options.corrupt,
                   "offset added to one analytic gradient entry")
      ->group("");  // test hook, hidden from help

  CommonFlags gen_flags;
  CLI::App* gen =
      app.add_subcommand("gen", "generate a synthetic world and detections");
  add_common(gen, gen_flags);

  CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train an embedding model");
  add_common(train, train_flags);
  train->add_option("--loss", train_flags.loss,
                    "oim | softmax | softmax_pretrained");

  CommonFlags eval_flags;
  std::string checkpoint_path;
  CLI::App* eval =
      app.add_subcommand("eval", "run the search protocol on a checkpoint");
  add_common(eval, eval_flags);
  eval->add_option("--checkpoint", checkpoint_path, "trained model state")
      ->required();
  eval->add_option("--gallery-sizes", eval_flags.gallery_sizes,
                   "comma separated gallery sizes")
      ->delimiter(',');
  eval->add_option("--seeds", eval_flags.seeds, "number of protocol seeds");

  CommonFlags sweep_flags;
  std::string axis_name;
  std::vector<std::string> values;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "factor study over one axis, medians across seeds");
  add_common(sweep, sweep_flags);
  sweep->add_option("--loss", sweep_flags.loss,
                    "oim | softmax | softmax_pretrained");
  sweep
      ->add_option("--axis", axis_name,
                   "subsample | recall | gallery_size | dimension")
      ->required();
  sweep->add_option("--values", values, "comma separated axis values")
      ->delimiter(',')
      ->required();
  sweep->add_option("--seeds", sweep_flags.seeds, "number of full runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gradcheck->parsed()) {
      return run_gradcheck(resolve_config(gradcheck_flags), gradcheck_options);
    }
    if (gen->parsed()) {
      return run_gen(resolve_config(gen_flags));
    }
    if (train->parsed()) {
      return run_train(resolve_config(train_flags));
    }
    if (eval->parsed()) {
      return run_eval(resolve_config(eval_flags), checkpoint_path);
    }
    if (sweep->parsed()) {
      return run_sweep(resolve_config(sweep_flags),
                       oimtool::sweep_axis_from_name(axis_name), values);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
