#include "oim/records.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace oim {

namespace {

using nlohmann::json;

constexpr int kRecordVersion = 1;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return in;
}

json parse_line(const std::string& line, const std::string& path,
                std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                             e.what());
  }
}

void check_header(const json& header, const std::string& expected_type,
                  const std::string& path) {
  if (header.value("type", "") != expected_type) {
    throw std::runtime_error(path + ": expected a '" + expected_type +
                             "' header line");
  }
  int version = header.value("version", -1);
  if (version != kRecordVersion) {
    throw std::runtime_error(path + ": unsupported record version " +
                             std::to_string(version));
  }
}

json box_to_json(const BoundingBox& box) {
  return json::array({box.x1, box.y1, box.x2, box.y2});
}

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::runtime_error("box must be an array of four numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

std::string kind_to_string(PersonKind kind) {
  switch (kind) {
    case PersonKind::Labeled:
      return "labeled";
    case PersonKind::Unlabeled:
      return "unlabeled";
    case PersonKind::Background:
      return "background";
  }
  throw std::logic_error("unreachable person kind");
}

PersonKind kind_from_string(const std::string& s) {
  if (s == "labeled") return PersonKind::Labeled;
  if (s == "unlabeled") return PersonKind::Unlabeled;
  if (s == "background") return PersonKind::Background;
  throw std::runtime_error("unknown person kind '" + s + "'");
}

json config_to_json(const SynthConfig& cfg) {
  return {{"num_labeled", cfg.num_labeled},
          {"num_unlabeled_pool", cfg.num_unlabeled_pool},
          {"raw_dim", cfg.raw_dim},
          {"scenes_train", cfg.scenes_train},
          {"scenes_test", cfg.scenes_test},
          {"persons_per_scene", cfg.persons_per_scene},
          {"noise_sigma", cfg.noise_sigma},
          {"scene_extent", cfg.scene_extent},
          {"box_scale_min", cfg.box_scale_min},
          {"box_scale_max", cfg.box_scale_max},
          {"seed", cfg.seed}};
}

SynthConfig config_from_json(const json& j) {
  SynthConfig cfg;
  cfg.num_labeled = j.at("num_labeled").get<std::size_t>();
  cfg.num_unlabeled_pool = j.at("num_unlabeled_pool").get<std::size_t>();
  cfg.raw_dim = j.at("raw_dim").get<std::size_t>();
  cfg.scenes_train = j.at("scenes_train").get<std::size_t>();
  cfg.scenes_test = j.at("scenes_test").get<std::size_t>();
  cfg.persons_per_scene = j.at("persons_per_scene").get<double>();
  cfg.noise_sigma = j.at("noise_sigma").get<double>();
  cfg.scene_extent = j.at("scene_extent").get<double>();
  cfg.box_scale_min = j.at("box_scale_min").get<double>();
  cfg.box_scale_max = j.at("box_scale_max").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_world(const SynthWorld& world, const std::string& path) {
  std::ofstream out = open_out(path);

  json header = {{"type", "world_header"},
                 {"version", kRecordVersion},
                 {"config", config_to_json(world.config)},
                 {"labeled_prototypes", world.labeled_prototypes},
                 {"unlabeled_prototypes", world.unlabeled_prototypes},
                 {"train_scenes", world.train_scenes},
                 {"test_scenes", world.test_scenes},
                 {"train_identities", world.train_identities},
                 {"test_identities", world.test_identities}};
  out << header.dump() << '\n';

  for (const SynthScene& scene : world.scenes) {
    json persons = json::array();
    for (const Person& person : scene.persons) {
      persons.push_back({{"kind", kind_to_string(person.kind)},
                         {"identity", person.identity},
                         {"box", box_to_json(person.box)},
                         {"raw_feature", person.raw_feature}});
    }
    json record = {{"type", "scene"},
                   {"scene_id", scene.scene_id},
                   {"persons", std::move(persons)}};
    out << record.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

SynthWorld load_world(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty record file");
  }
  ++line_no;
  json header = parse_line(line, path, line_no);
  check_header(header, "world_header", path);

  SynthWorld world;
  world.config = config_from_json(header.at("config"));
  world.labeled_prototypes =
      header.at("labeled_prototypes").get<std::vector<Vec>>();
  world.unlabeled_prototypes =
      header.at("unlabeled_prototypes").get<std::vector<Vec>>();
  world.train_scenes = header.at("train_scenes").get<std::vector<int>>();
  world.test_scenes = header.at("test_scenes").get<std::vector<int>>();
  world.train_identities =
      header.at("train_identities").get<std::vector<int>>();
  world.test_identities = header.at("test_identities").get<std::vector<int>>();

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = parse_line(line, path, line_no);
    if (record.value("type", "") != "scene") {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected a 'scene' record");
    }
    SynthScene scene;
    scene.scene_id = record.at("scene_id").get<int>();
    if (scene.scene_id != static_cast<int>(world.scenes.size())) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": scene records must be contiguous from 0");
    }
    for (const json& pj : record.at("persons")) {
      Person person;
      person.kind = kind_from_string(pj.at("kind").get<std::string>());
      person.identity = pj.at("identity").get<int>();
      person.box = box_from_json(pj.at("box"));
      person.raw_feature = pj.at("raw_feature").get<Vec>();
      scene.persons.push_back(std::move(person));
    }
    world.scenes.push_back(std::move(scene));
  }

  std::size_t expected =
      world.config.scenes_train + world.config.scenes_test;
  if (world.scenes.size() != expected) {
    throw std::runtime_error(path + ": expected " + std::to_string(expected) +
                             " scenes, found " +
                             std::to_string(world.scenes.size()));
  }
  return world;
}

void save_detections(const std::vector<std::vector<Detection>>& per_scene,
                     const std::string& path) {
  std::ofstream out = open_out(path);
  json header = {{"type", "detections_header"},
                 {"version", kRecordVersion},
                 {"num_scenes", per_scene.size()}};
  out << header.dump() << '\n';
  for (const auto& dets : per_scene) {
    for (const Detection& d : dets) {
      json record = {{"type", "detection"},
                     {"scene_id", d.scene_id},
                     {"det_index", d.det_index},
                     {"box", box_to_json(d.box)},
                     {"score", d.score},
                     {"raw_feature", d.raw_feature},
                     {"source_person", d.source_person}};
      out << record.dump() << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::vector<Detection>> load_detections(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty record file");
  }
  ++line_no;
  json header = parse_line(line, path, line_no);
  check_header(header, "detections_header", path);

  std::vector<std::vector<Detection>> per_scene(
      header.at("num_scenes").get<std::size_t>());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = parse_line(line, path, line_no);
    if (record.value("type", "") != "detection") {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected a 'detection' record");
    }
    Detection d;
    d.scene_id = record.at("scene_id").get<int>();
    if (d.scene_id < 0 ||
        static_cast<std::size_t>(d.scene_id) >= per_scene.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": scene_id out of range");
    }
    d.det_index = record.at("det_index").get<int>();
    d.box = box_from_json(record.at("box"));
    d.score = record.at("score").get<double>();
    d.raw_feature = record.at("raw_feature").get<Vec>();
    d.source_person = record.at("source_person").get<int>();
    per_scene[static_cast<std::size_t>(d.scene_id)].push_back(std::move(d));
  }
  return per_scene;
}

}  // namespace oim
