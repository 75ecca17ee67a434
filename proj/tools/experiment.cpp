#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "oim/eval.hpp"
#include "oim/records.hpp"

namespace oimtool {

namespace {

using nlohmann::json;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) ==
        allowed.end()) {
      throw std::runtime_error("config " + where + ": unknown key '" +
                               item.key() + "'");
    }
  }
}

void parse_synth(const json& j, oim::SynthConfig& cfg) {
  check_keys(j,
             {"num_labeled", "num_unlabeled_pool", "raw_dim", "scenes_train",
              "scenes_test", "persons_per_scene", "noise_sigma",
              "scene_extent", "box_scale_min", "box_scale_max"},
             "synth");
  cfg.num_labeled = j.value("num_labeled", cfg.num_labeled);
  cfg.num_unlabeled_pool =
      j.value("num_unlabeled_pool", cfg.num_unlabeled_pool);
  cfg.raw_dim = j.value("raw_dim", cfg.raw_dim);
  cfg.scenes_train = j.value("scenes_train", cfg.scenes_train);
  cfg.scenes_test = j.value("scenes_test", cfg.scenes_test);
  cfg.persons_per_scene = j.value("persons_per_scene", cfg.persons_per_scene);
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  cfg.scene_extent = j.value("scene_extent", cfg.scene_extent);
  cfg.box_scale_min = j.value("box_scale_min", cfg.box_scale_min);
  cfg.box_scale_max = j.value("box_scale_max", cfg.box_scale_max);
}

void parse_detector(const json& j, oim::DetectorConfig& cfg) {
  check_keys(j, {"miss_rate", "false_alarm_rate", "jitter_sigma", "score"},
             "detector");
  cfg.miss_rate = j.value("miss_rate", cfg.miss_rate);
  cfg.false_alarm_rate = j.value("false_alarm_rate", cfg.false_alarm_rate);
  cfg.jitter_sigma = j.value("jitter_sigma", cfg.jitter_sigma);
  if (j.contains("score")) {
    const json& s = j.at("score");
    check_keys(s, {"true_base", "jitter_penalty", "noise_sigma",
                   "false_alarm_max"},
               "detector.score");
    cfg.score.true_base = s.value("true_base", cfg.score.true_base);
    cfg.score.jitter_penalty =
        s.value("jitter_penalty", cfg.score.jitter_penalty);
    cfg.score.noise_sigma = s.value("noise_sigma", cfg.score.noise_sigma);
    cfg.score.false_alarm_max =
        s.value("false_alarm_max", cfg.score.false_alarm_max);
  }
}

void parse_optional_size(const json& j, const char* key,
                         std::optional<std::size_t>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  out = j.at(key).get<std::size_t>();
}

void parse_train(const json& j, oim::TrainConfig& cfg) {
  check_keys(j,
             {"scenes_per_batch", "total_iters", "lr_base", "lr_drop_iter",
              "lr_drop_factor", "momentum", "out_dim", "loss",
              "pretrain_iters", "oim"},
             "train");
  cfg.scenes_per_batch = j.value("scenes_per_batch", cfg.scenes_per_batch);
  cfg.total_iters = j.value("total_iters", cfg.total_iters);
  cfg.lr_base = j.value("lr_base", cfg.lr_base);
  cfg.lr_drop_iter = j.value("lr_drop_iter", cfg.lr_drop_iter);
  cfg.lr_drop_factor = j.value("lr_drop_factor", cfg.lr_drop_factor);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.out_dim = j.value("out_dim", cfg.out_dim);
  if (j.contains("loss")) {
    cfg.loss_kind = oim::loss_kind_from_name(j.at("loss").get<std::string>());
  }
  cfg.pretrain_iters = j.value("pretrain_iters", cfg.pretrain_iters);
  if (j.contains("oim")) {
    const json& o = j.at("oim");
    check_keys(o, {"tau", "gamma", "queue_capacity", "subsample_labeled",
                   "subsample_unlabeled"},
               "train.oim");
    cfg.oim.tau = o.value("tau", cfg.oim.tau);
    cfg.oim.gamma = o.value("gamma", cfg.oim.gamma);
    cfg.oim.queue_capacity = o.value("queue_capacity", cfg.oim.queue_capacity);
    parse_optional_size(o, "subsample_labeled", cfg.oim.subsample_labeled);
    parse_optional_size(o, "subsample_unlabeled", cfg.oim.subsample_unlabeled);
  }
}

void parse_protocol(const json& j, ProtocolSettings& cfg) {
  check_keys(j, {"gallery_sizes", "cmc_ks", "iou_threshold", "seeds"},
             "protocol");
  if (j.contains("gallery_sizes")) {
    cfg.gallery_sizes = j.at("gallery_sizes").get<std::vector<std::size_t>>();
  }
  if (j.contains("cmc_ks")) {
    cfg.cmc_ks = j.at("cmc_ks").get<std::vector<std::size_t>>();
  }
  cfg.iou_threshold = j.value("iou_threshold", cfg.iou_threshold);
  cfg.seeds = j.value("seeds", cfg.seeds);
}

json synth_to_json(const oim::SynthConfig& cfg) {
  return {{"num_labeled", cfg.num_labeled},
          {"num_unlabeled_pool", cfg.num_unlabeled_pool},
          {"raw_dim", cfg.raw_dim},
          {"scenes_train", cfg.scenes_train},
          {"scenes_test", cfg.scenes_test},
          {"persons_per_scene", cfg.persons_per_scene},
          {"noise_sigma", cfg.noise_sigma},
          {"scene_extent", cfg.scene_extent},
          {"box_scale_min", cfg.box_scale_min},
          {"box_scale_max", cfg.box_scale_max}};
}

json detector_to_json(const oim::DetectorConfig& cfg) {
  return {{"miss_rate", cfg.miss_rate},
          {"false_alarm_rate", cfg.false_alarm_rate},
          {"jitter_sigma", cfg.jitter_sigma},
          {"score",
           {{"true_base", cfg.score.true_base},
            {"jitter_penalty", cfg.score.jitter_penalty},
            {"noise_sigma", cfg.score.noise_sigma},
            {"false_alarm_max", cfg.score.false_alarm_max}}}};
}

json train_to_json(const oim::TrainConfig& cfg) {
  json oim_section = {{"tau", cfg.oim.tau},
                      {"gamma", cfg.oim.gamma},
                      {"queue_capacity", cfg.oim.queue_capacity}};
  oim_section["subsample_labeled"] =
      cfg.oim.subsample_labeled ? json(*cfg.oim.subsample_labeled)
                                : json(nullptr);
  oim_section["subsample_unlabeled"] =
      cfg.oim.subsample_unlabeled ? json(*cfg.oim.subsample_unlabeled)
                                  : json(nullptr);
  return {{"scenes_per_batch", cfg.scenes_per_batch},
          {"total_iters", cfg.total_iters},
          {"lr_base", cfg.lr_base},
          {"lr_drop_iter", cfg.lr_drop_iter},
          {"lr_drop_factor", cfg.lr_drop_factor},
          {"momentum", cfg.momentum},
          {"out_dim", cfg.out_dim},
          {"loss", oim::loss_kind_name(cfg.loss_kind)},
          {"pretrain_iters", cfg.pretrain_iters},
          {"oim", std::move(oim_section)}};
}

json config_to_json(const ExperimentConfig& cfg) {
  return {{"seed", cfg.seed},
          {"out_dir", cfg.out_dir},
          {"synth", synth_to_json(cfg.synth)},
          {"detector", detector_to_json(cfg.detector)},
          {"train", train_to_json(cfg.train)},
          {"protocol",
           {{"gallery_sizes", cfg.protocol.gallery_sizes},
            {"cmc_ks", cfg.protocol.cmc_ks},
            {"iou_threshold", cfg.protocol.iou_threshold},
            {"seeds", cfg.protocol.seeds}}}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_report(const std::string& path, const json& report) {
  write_text(path, report.dump(2) + "\n");
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::logic_error("to_chars failed");
  return std::string(buf, ptr);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// mean training accuracy over the trailing `window` iterations, skipped
// (NaN) rows excluded
double trailing_accuracy(const std::vector<oim::MetricRow>& history,
                         std::size_t window) {
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t begin = history.size() > window ? history.size() - window : 0;
  for (std::size_t i = begin; i < history.size(); ++i) {
    if (std::isnan(history[i].train_accuracy)) continue;
    sum += history[i].train_accuracy;
    ++count;
  }
  if (count == 0) return 0.0;
  return sum / static_cast<double>(count);
}

oim::SynthConfig synth_for(const ExperimentConfig& config) {
  oim::SynthConfig synth = config.synth;
  synth.seed = world_seed(config);
  return synth;
}

// detections exist only for test scenes: that is where search runs, and
// keeping a single consumption order makes gen/eval agree bit for bit
std::vector<std::vector<oim::Detection>> simulate_test_detections(
    const oim::SynthWorld& world, const oim::DetectorConfig& detector,
    std::uint64_t seed) {
  oim::Rng rng(seed);
  std::vector<std::vector<oim::Detection>> per_scene(world.scenes.size());
  for (int scene_id : world.test_scenes) {
    per_scene[static_cast<std::size_t>(scene_id)] = simulate_detections(
        world.scenes[static_cast<std::size_t>(scene_id)], detector, rng);
  }
  return per_scene;
}

oim::Trainer train_model(const ExperimentConfig& config,
                         const oim::SynthWorld& world,
                         std::vector<double>* pretrain_losses = nullptr) {
  oim::TrainConfig train_cfg = config.train;
  train_cfg.seed = train_seed(config);
  oim::Trainer trainer(world, train_cfg);
  if (train_cfg.loss_kind == oim::LossKind::SoftmaxPretrained) {
    std::vector<double> losses =
        trainer.pretrain_classifier(train_cfg.pretrain_iters);
    if (pretrain_losses) *pretrain_losses = std::move(losses);
  }
  trainer.run(train_cfg.total_iters);
  return trainer;
}

json metrics_to_json(const oim::SearchMetrics& metrics) {
  json cmc = json::object();
  for (const auto& [k, value] : metrics.cmc) {
    cmc["top" + std::to_string(k)] = value;
  }
  return {{"map", metrics.map},
          {"cmc", std::move(cmc)},
          {"per_query_ap", metrics.per_query_ap}};
}

struct EvalPoint {
  std::size_t gallery_size = 0;
  std::size_t protocol_seed_index = 0;
  oim::SearchMetrics metrics;
};

EvalPoint eval_point(const ExperimentConfig& config,
                     const oim::SynthWorld& world,
                     const std::vector<std::vector<oim::Detection>>& detections,
                     const oim::EmbedFn& embed, std::size_t gallery_size,
                     std::size_t seed_index) {
  oim::Rng rng(protocol_seed(
      config, static_cast<std::uint64_t>(seed_index) * 1000003 + gallery_size));
  oim::SearchProtocol protocol = build_protocol(world, gallery_size, rng);
  std::vector<oim::QueryResult> results =
      run_protocol(world, detections, protocol, embed);
  return {gallery_size, seed_index,
          compute_search_metrics(results, config.protocol.cmc_ks,
                                 config.protocol.iou_threshold)};
}

json median_cmc(const std::vector<EvalPoint>& points,
                const std::vector<std::size_t>& ks) {
  json out = json::object();
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    std::vector<double> values;
    values.reserve(points.size());
    for (const EvalPoint& p : points) values.push_back(p.metrics.cmc[ki].second);
    out["top" + std::to_string(ks[ki])] = median(values);
  }
  return out;
}

double median_map(const std::vector<EvalPoint>& points) {
  std::vector<double> values;
  values.reserve(points.size());
  for (const EvalPoint& p : points) values.push_back(p.metrics.map);
  return median(values);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  check_keys(j, {"seed", "out_dir", "synth", "detector", "train", "protocol"},
             "top level");

  ExperimentConfig config;
  config.seed = j.value("seed", config.seed);
  config.out_dir = j.value("out_dir", config.out_dir);
  if (j.contains("synth")) parse_synth(j.at("synth"), config.synth);
  if (j.contains("detector")) parse_detector(j.at("detector"), config.detector);
  if (j.contains("train")) parse_train(j.at("train"), config.train);
  if (j.contains("protocol")) parse_protocol(j.at("protocol"), config.protocol);
  return config;
}

void apply_overrides(ExperimentConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.loss) {
    config.train.loss_kind = oim::loss_kind_from_name(*overrides.loss);
  }
  if (overrides.gallery_sizes) {
    config.protocol.gallery_sizes = *overrides.gallery_sizes;
  }
  if (overrides.seeds) config.protocol.seeds = *overrides.seeds;
}

std::uint64_t world_seed(const ExperimentConfig& config) {
  return oim::derive_seed(config.seed, 10);
}
std::uint64_t detector_seed(const ExperimentConfig& config) {
  return oim::derive_seed(config.seed, 20);
}
std::uint64_t train_seed(const ExperimentConfig& config) {
  return oim::derive_seed(config.seed, 30);
}
std::uint64_t protocol_seed(const ExperimentConfig& config,
                            std::size_t index) {
  return oim::derive_seed(config.seed, 40 + index);
}

ExperimentConfig config_for_run(const ExperimentConfig& config,
                                std::size_t index) {
  ExperimentConfig run = config;
  run.seed = oim::derive_seed(config.seed, 1000 + index);
  return run;
}

int run_gen(const ExperimentConfig& config) {
  Timer timer;
  std::filesystem::create_directories(config.out_dir);
  oim::SynthWorld world = gen_world(synth_for(config));
  auto detections =
      simulate_test_detections(world, config.detector, detector_seed(config));

  std::string world_path = config.out_dir + "/world.jsonl";
  std::string det_path = config.out_dir + "/detections.jsonl";
  save_world(world, world_path);
  save_detections(detections, det_path);

  std::size_t num_persons = 0;
  for (const auto& scene : world.scenes) num_persons += scene.persons.size();
  std::size_t num_dets = 0;
  for (const auto& dets : detections) num_dets += dets.size();

  json report = {{"config", config_to_json(config)},
                 {"world_file", world_path},
                 {"detections_file", det_path},
                 {"num_scenes", world.scenes.size()},
                 {"num_persons", num_persons},
                 {"num_test_detections", num_dets},
                 {"nearest_prototype_accuracy",
                  nearest_prototype_accuracy(world)},
                 {"timings", {{"total_s", timer.seconds()}}}};
  write_report(config.out_dir + "/gen_report.json", report);

  std::cout << "wrote " << world_path << " (" << world.scenes.size()
            << " scenes, " << num_persons << " persons) and " << det_path
            << " (" << num_dets << " detections)\n";
  return 0;
}

int run_train(const ExperimentConfig& config) {
  Timer timer;
  std::filesystem::create_directories(config.out_dir);
  oim::SynthWorld world = gen_world(synth_for(config));
  double gen_seconds = timer.seconds();

  Timer train_timer;
  std::vector<double> pretrain_losses;
  oim::Trainer trainer = train_model(config, world, &pretrain_losses);
  double train_seconds = train_timer.seconds();

  std::string metrics_path = config.out_dir + "/metrics.csv";
  std::string checkpoint_path = config.out_dir + "/checkpoint.bin";
  write_metrics_csv(trainer.state().history, metrics_path);
  checkpoint_save(trainer.state(), checkpoint_path);

  double final_accuracy = trailing_accuracy(trainer.state().history, 100);
  json report = {{"config", config_to_json(config)},
                 {"loss", oim::loss_kind_name(config.train.loss_kind)},
                 {"metrics_file", metrics_path},
                 {"checkpoint_file", checkpoint_path},
                 {"iterations", trainer.iteration()},
                 {"trailing_train_accuracy", final_accuracy},
                 {"timings",
                  {{"world_s", gen_seconds},
                   {"train_s", train_seconds},
                   {"total_s", timer.seconds()}}}};
  if (!pretrain_losses.empty()) report["pretrain_losses"] = pretrain_losses;
  write_report(config.out_dir + "/train_report.json", report);

  std::cout << "trained " << oim::loss_kind_name(config.train.loss_kind)
            << " for " << trainer.iteration()
            << " iterations, trailing train accuracy "
            << format_double(final_accuracy) << "\n";
  return 0;
}

int run_eval(const ExperimentConfig& config, const std::string& checkpoint) {
  Timer timer;
  std::filesystem::create_directories(config.out_dir);
  oim::TrainState state = oim::checkpoint_load(checkpoint);
  oim::SynthWorld world = gen_world(synth_for(config));
  oim::Trainer trainer(world, std::move(state));
  auto detections =
      simulate_test_detections(world, config.detector, detector_seed(config));
  oim::EmbedFn embed = [&trainer](const oim::Vec& raw) {
    return trainer.embed(raw);
  };

  json rows = json::array();
  json medians = json::array();
  for (std::size_t gallery_size : config.protocol.gallery_sizes) {
    std::vector<EvalPoint> points;
    for (std::size_t i = 0; i < config.protocol.seeds; ++i) {
      EvalPoint point =
          eval_point(config, world, detections, embed, gallery_size, i);
      rows.push_back({{"gallery_size", gallery_size},
                      {"protocol_seed_index", i},
                      {"metrics", metrics_to_json(point.metrics)}});
      points.push_back(std::move(point));
    }
    json median_row = {{"gallery_size", gallery_size},
                       {"map", median_map(points)},
                       {"cmc", median_cmc(points, config.protocol.cmc_ks)}};
    std::cout << "gallery " << gallery_size << ": median mAP "
              << format_double(median_row["map"].get<double>()) << "\n";
    medians.push_back(std::move(median_row));
  }

  json report = {{"config", config_to_json(config)},
                 {"checkpoint", checkpoint},
                 {"loss", oim::loss_kind_name(trainer.state().config.loss_kind)},
                 {"rows", std::move(rows)},
                 {"medians", std::move(medians)},
                 {"timings", {{"total_s", timer.seconds()}}}};
  write_report(config.out_dir + "/eval_report.json", report);
  return 0;
}

int run_gradcheck(const ExperimentConfig& config,
                  const oim::GradCheckOptions& options) {
  std::filesystem::create_directories(config.out_dir);
  Timer timer;
  oim::GradCheckReport report = oim::run_gradcheck(options);

  json entries = json::array();
  for (const oim::GradCheckEntry& entry : report.entries) {
    std::cout << (entry.passed ? "PASS" : "FAIL") << " " << entry.name
              << ": max relative error " << format_double(entry.max_rel_error)
              << " over " << entry.cases << " cases (tolerance "
              << format_double(entry.tolerance) << ")\n";
    entries.push_back({{"name", entry.name},
                       {"cases", entry.cases},
                       {"max_rel_error", entry.max_rel_error},
                       {"tolerance", entry.tolerance},
                       {"passed", entry.passed}});
  }
  json out = {{"entries", std::move(entries)},
              {"all_passed", report.all_passed()},
              {"timings", {{"total_s", timer.seconds()}}}};
  write_report(config.out_dir + "/gradcheck_report.json", out);
  return report.all_passed() ? 0 : 1;
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "subsample") return SweepAxis::Subsample;
  if (name == "recall") return SweepAxis::Recall;
  if (name == "gallery_size") return SweepAxis::GallerySize;
  if (name == "dimension") return SweepAxis::Dimension;
  throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

namespace {

struct SweepRow {
  std::string value_label;
  std::size_t seed_index = 0;
  double final_train_accuracy = 0.0;
  oim::SearchMetrics metrics;
  json extra = json::object();
};

json sweep_row_to_json(const SweepRow& row) {
  json j = {{"value", row.value_label},
            {"seed_index", row.seed_index},
            {"final_train_accuracy", row.final_train_accuracy},
            {"metrics", metrics_to_json(row.metrics)}};
  for (const auto& item : row.extra.items()) j[item.key()] = item.value();
  return j;
}

std::string sweep_csv(const std::vector<SweepRow>& rows,
                      const std::vector<std::size_t>& ks,
                      const std::vector<std::string>& extra_columns) {
  std::string out = "value,seed";
  for (std::size_t k : ks) out += ",cmc" + std::to_string(k);
  out += ",map,final_train_accuracy";
  for (const std::string& col : extra_columns) out += "," + col;
  out += "\n";
  for (const SweepRow& row : rows) {
    out += row.value_label;
    out += ',';
    out += std::to_string(row.seed_index);
    for (const auto& [k, v] : row.metrics.cmc) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += format_double(row.metrics.map);
    out += ',';
    out += format_double(row.final_train_accuracy);
    for (const std::string& col : extra_columns) {
      out += ',';
      out += format_double(row.extra.at(col).get<double>());
    }
    out += '\n';
  }
  return out;
}

json sweep_medians(const std::vector<SweepRow>& rows,
                   const std::vector<std::string>& value_order,
                   const std::vector<std::size_t>& ks) {
  json medians = json::array();
  for (const std::string& value : value_order) {
    std::vector<double> maps;
    std::vector<std::vector<double>> cmcs(ks.size());
    for (const SweepRow& row : rows) {
      if (row.value_label != value) continue;
      maps.push_back(row.metrics.map);
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        cmcs[ki].push_back(row.metrics.cmc[ki].second);
      }
    }
    json cmc = json::object();
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      cmc["top" + std::to_string(ks[ki])] = median(cmcs[ki]);
    }
    medians.push_back(
        {{"value", value}, {"map", median(maps)}, {"cmc", std::move(cmc)}});
  }
  return medians;
}

std::size_t parse_size_value(const std::string& value, const char* axis) {
  std::size_t parsed = 0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size() || parsed == 0) {
    throw std::invalid_argument(std::string(axis) + " axis value '" + value +
                                "' is not a positive integer");
  }
  return parsed;
}

double parse_recall_value(const std::string& value) {
  std::size_t consumed = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != value.size() || parsed <= 0.0 || parsed > 1.0) {
    throw std::invalid_argument("recall axis value '" + value +
                                "' is not in (0, 1]");
  }
  return parsed;
}

}  // namespace

int run_sweep(const ExperimentConfig& config, SweepAxis axis,
              const std::vector<std::string>& values) {
  if (values.empty()) {
    throw std::invalid_argument("sweep needs at least one --values entry");
  }
  Timer timer;
  std::filesystem::create_directories(config.out_dir);
  std::string axis_name;
  std::vector<SweepRow> rows;
  std::vector<std::string> extra_columns;
  std::size_t eval_gallery = config.protocol.gallery_sizes.empty()
                                 ? 20
                                 : config.protocol.gallery_sizes.front();

  switch (axis) {
    case SweepAxis::Subsample: {
      axis_name = "subsample";
      for (std::size_t s = 0; s < config.protocol.seeds; ++s) {
        ExperimentConfig run_cfg = config_for_run(config, s);
        for (const std::string& value : values) {
          ExperimentConfig point_cfg = run_cfg;
          if (value == "full") {
            point_cfg.train.oim.subsample_labeled.reset();
            point_cfg.train.oim.subsample_unlabeled.reset();
          } else {
            std::size_t keep = parse_size_value(value, "subsample");
            point_cfg.train.oim.subsample_labeled = keep;
            point_cfg.train.oim.subsample_unlabeled = keep;
          }
          oim::SynthWorld world = gen_world(synth_for(point_cfg));
          oim::Trainer trainer = train_model(point_cfg, world);
          write_metrics_csv(trainer.state().history,
                            config.out_dir + "/metrics_subsample_" + value +
                                "_seed" + std::to_string(s) + ".csv");
          auto detections = simulate_test_detections(
              world, point_cfg.detector, detector_seed(point_cfg));
          oim::EmbedFn embed = [&trainer](const oim::Vec& raw) {
            return trainer.embed(raw);
          };
          EvalPoint point = eval_point(point_cfg, world, detections, embed,
                                       eval_gallery, 0);
          rows.push_back({value, s,
                          trailing_accuracy(trainer.state().history, 100),
                          std::move(point.metrics)});
        }
      }
      break;
    }
    case SweepAxis::Dimension: {
      axis_name = "dimension";
      for (std::size_t s = 0; s < config.protocol.seeds; ++s) {
        ExperimentConfig run_cfg = config_for_run(config, s);
        for (const std::string& value : values) {
          ExperimentConfig point_cfg = run_cfg;
          point_cfg.train.out_dim = parse_size_value(value, "dimension");
          oim::SynthWorld world = gen_world(synth_for(point_cfg));
          oim::Trainer trainer = train_model(point_cfg, world);
          write_metrics_csv(trainer.state().history,
                            config.out_dir + "/metrics_dimension_" + value +
                                "_seed" + std::to_string(s) + ".csv");
          auto detections = simulate_test_detections(
              world, point_cfg.detector, detector_seed(point_cfg));
          oim::EmbedFn embed = [&trainer](const oim::Vec& raw) {
            return trainer.embed(raw);
          };
          EvalPoint point = eval_point(point_cfg, world, detections, embed,
                                       eval_gallery, 0);
          rows.push_back({value, s,
                          trailing_accuracy(trainer.state().history, 100),
                          std::move(point.metrics)});
        }
      }
      break;
    }
    case SweepAxis::GallerySize: {
      axis_name = "gallery_size";
      for (std::size_t s = 0; s < config.protocol.seeds; ++s) {
        ExperimentConfig run_cfg = config_for_run(config, s);
        oim::SynthWorld world = gen_world(synth_for(run_cfg));
        oim::Trainer trainer = train_model(run_cfg, world);
        write_metrics_csv(trainer.state().history,
                          config.out_dir + "/metrics_train_seed" +
                              std::to_string(s) + ".csv");
        auto detections = simulate_test_detections(world, run_cfg.detector,
                                                   detector_seed(run_cfg));
        oim::EmbedFn embed = [&trainer](const oim::Vec& raw) {
          return trainer.embed(raw);
        };
        double final_acc = trailing_accuracy(trainer.state().history, 100);
        for (const std::string& value : values) {
          std::size_t gallery = parse_size_value(value, "gallery_size");
          EvalPoint point =
              eval_point(run_cfg, world, detections, embed, gallery, 0);
          rows.push_back({value, s, final_acc, std::move(point.metrics)});
        }
      }
      break;
    }
    case SweepAxis::Recall: {
      axis_name = "recall";
      extra_columns = {"target_recall", "threshold", "recall", "precision"};
      for (std::size_t s = 0; s < config.protocol.seeds; ++s) {
        ExperimentConfig run_cfg = config_for_run(config, s);
        oim::SynthWorld world = gen_world(synth_for(run_cfg));
        oim::Trainer trainer = train_model(run_cfg, world);
        write_metrics_csv(trainer.state().history,
                          config.out_dir + "/metrics_train_seed" +
                              std::to_string(s) + ".csv");
        auto detections = simulate_test_detections(world, run_cfg.detector,
                                                   detector_seed(run_cfg));
        oim::EmbedFn embed = [&trainer](const oim::Vec& raw) {
          return trainer.embed(raw);
        };
        double final_acc = trailing_accuracy(trainer.state().history, 100);

        std::size_t total_persons = 0;
        for (int scene_id : world.test_scenes) {
          total_persons +=
              world.scenes[static_cast<std::size_t>(scene_id)].persons.size();
        }
        std::vector<double> true_scores;
        double min_score = std::numeric_limits<double>::infinity();
        for (const auto& dets : detections) {
          for (const oim::Detection& d : dets) {
            min_score = std::min(min_score, d.score);
            if (d.source_person >= 0) true_scores.push_back(d.score);
          }
        }
        std::sort(true_scores.begin(), true_scores.end(), std::greater<>());

        for (std::size_t vi = 0; vi < values.size(); ++vi) {
          double target = parse_recall_value(values[vi]);
          // threshold giving at least the target recall, when reachable
          std::size_t want = static_cast<std::size_t>(
              std::ceil(target * static_cast<double>(total_persons)));
          double threshold;
          if (want == 0) {
            want = 1;
          }
          if (want > true_scores.size()) {
            threshold = min_score - 1.0;  // keep everything: target unreachable
          } else {
            threshold = true_scores[want - 1];
          }

          std::vector<std::vector<oim::Detection>> kept(detections.size());
          std::size_t kept_true = 0;
          std::size_t kept_all = 0;
          for (std::size_t i = 0; i < detections.size(); ++i) {
            kept[i] = threshold_detections(detections[i], threshold);
            for (const oim::Detection& d : kept[i]) {
              ++kept_all;
              if (d.source_person >= 0) ++kept_true;
            }
          }
          double recall = static_cast<double>(kept_true) /
                          static_cast<double>(total_persons);
          double precision =
              kept_all == 0 ? 1.0
                            : static_cast<double>(kept_true) /
                                  static_cast<double>(kept_all);

          oim::Rng prng(protocol_seed(run_cfg, vi));
          oim::SearchProtocol protocol =
              build_protocol(world, eval_gallery, prng);
          auto results = run_protocol(world, kept, protocol, embed);
          oim::SearchMetrics metrics = compute_search_metrics(
              results, config.protocol.cmc_ks, config.protocol.iou_threshold);

          SweepRow row{values[vi], s, final_acc, std::move(metrics)};
          row.extra = {{"target_recall", target},
                       {"threshold", threshold},
                       {"recall", recall},
                       {"precision", precision}};
          rows.push_back(std::move(row));
        }
      }
      break;
    }
  }

  json rows_json = json::array();
  for (const SweepRow& row : rows) rows_json.push_back(sweep_row_to_json(row));
  json report = {{"config", config_to_json(config)},
                 {"axis", axis_name},
                 {"values", values},
                 {"eval_gallery_size", eval_gallery},
                 {"rows", std::move(rows_json)},
                 {"medians", sweep_medians(rows, values, config.protocol.cmc_ks)},
                 {"timings", {{"total_s", timer.seconds()}}}};
  write_report(config.out_dir + "/sweep_" + axis_name + "_report.json",
               report);
  write_text(config.out_dir + "/sweep_" + axis_name + "_curve.csv",
             sweep_csv(rows, config.protocol.cmc_ks, extra_columns));

  std::cout << "sweep " << axis_name << " over " << values.size()
            << " values x " << config.protocol.seeds << " seeds done in "
            << format_double(timer.seconds()) << "s\n";
  return 0;
}

}  // namespace oimtool
