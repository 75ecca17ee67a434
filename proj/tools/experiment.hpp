#ifndef OIMSEARCH_TOOLS_EXPERIMENT_HPP_
#define OIMSEARCH_TOOLS_EXPERIMENT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oim/gradcheck.hpp"
#include "oim/synth.hpp"
#include "oim/trainer.hpp"

namespace oimtool {

struct ProtocolSettings {
  std::vector<std::size_t> gallery_sizes = {20};
  std::vector<std::size_t> cmc_ks = {1, 5, 10};
  double iou_threshold = 0.5;
  std::size_t seeds = 1;
};

// One experiment = one master seed. Every stream (world generation, detector
// noise, training order, protocol draws) is derived from it, so a config
// file plus flags fully determines every output file.
struct ExperimentConfig {
  oim::SynthConfig synth;
  oim::DetectorConfig detector;
  oim::TrainConfig train;
  ProtocolSettings protocol;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
};

// Parses the JSON config file; unknown keys are errors. Missing keys keep
// their defaults.
ExperimentConfig load_config(const std::string& path);

// Flag values; unset members leave the config file values in place.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> loss;
  std::optional<std::vector<std::size_t>> gallery_sizes;
  std::optional<std::size_t> seeds;
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

// Sub-seed streams, all derived from the master seed.
std::uint64_t world_seed(const ExperimentConfig& config);
std::uint64_t detector_seed(const ExperimentConfig& config);
std::uint64_t train_seed(const ExperimentConfig& config);
std::uint64_t protocol_seed(const ExperimentConfig& config, std::size_t index);
// Master seed for run `index` of a multi-seed sweep.
ExperimentConfig config_for_run(const ExperimentConfig& config,
                                std::size_t index);

int run_gen(const ExperimentConfig& config);
int run_train(const ExperimentConfig& config);
int run_eval(const ExperimentConfig& config, const std::string& checkpoint);
int run_gradcheck(const ExperimentConfig& config,
                  const oim::GradCheckOptions& options);

enum class SweepAxis { Subsample, Recall, GallerySize, Dimension };
SweepAxis sweep_axis_from_name(const std::string& name);

int run_sweep(const ExperimentConfig& config, SweepAxis axis,
              const std::vector<std::string>& values);

}  // namespace oimtool

#endif  // OIMSEARCH_TOOLS_EXPERIMENT_HPP_
