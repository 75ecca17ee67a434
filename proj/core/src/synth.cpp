#include "oim/synth.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace oim {

namespace {

// Placement targets. Shares are fractions of the expected person slots in
// train scenes; the remainder is filled with background persons. Test
// identities are capped so every per-query gallery has few mandatory scenes.
constexpr double kTrainLabeledShare = 0.45;
constexpr double kUnlabeledShare = 0.35;
constexpr double kTestExtraMean = 2.0;
constexpr std::size_t kTestMaxInstances = 8;
constexpr std::size_t kForcedScenes = 2;

struct PendingPerson {
  PersonKind kind;
  int identity;
};

// Two distinct values in [0, n).
std::pair<std::size_t, std::size_t> distinct_pair(Rng& rng, std::size_t n) {
  std::size_t a = rng.uniform_index(n);
  std::size_t b = rng.uniform_index(n - 1);
  if (b >= a) ++b;
  return {a, b};
}

bool scene_has_identity(const std::vector<PendingPerson>& pending,
                        PersonKind kind, int identity) {
  for (const auto& p : pending) {
    if (p.kind == kind && p.identity == identity) return true;
  }
  return false;
}

// Places one identity into `forced` distinct scenes plus Poisson(extra_mean)
// extra scenes drawn with replacement; a scene already holding the identity
// absorbs the draw (identities appear at most once per scene).
void place_identity(std::vector<std::vector<PendingPerson>>& scenes,
                    const std::vector<int>& scene_ids, PersonKind kind,
                    int identity, std::size_t forced, double extra_mean,
                    std::size_t max_total, Rng& rng) {
  std::vector<std::size_t> chosen;
  if (forced == 2) {
    auto [a, b] = distinct_pair(rng, scene_ids.size());
    chosen = {a, b};
  } else if (forced == 1) {
    chosen = {rng.uniform_index(scene_ids.size())};
  }
  std::size_t extra = rng.poisson(extra_mean);
  if (forced + extra > max_total) extra = max_total - forced;
  for (std::size_t e = 0; e < extra; ++e) {
    chosen.push_back(rng.uniform_index(scene_ids.size()));
  }
  for (std::size_t slot : chosen) {
    auto& pending = scenes[static_cast<std::size_t>(scene_ids[slot])];
    if (!scene_has_identity(pending, kind, identity)) {
      pending.push_back({kind, identity});
    }
  }
}

BoundingBox random_box(Rng& rng, double extent, double side_min,
                       double side_max) {
  double w = rng.uniform(side_min, side_max);
  double h = rng.uniform(side_min, side_max);
  double x1 = rng.uniform(0.0, extent - w);
  double y1 = rng.uniform(0.0, extent - h);
  return {x1, y1, x1 + w, y1 + h};
}

Vec noisy_feature(const Vec& prototype, double sigma, Rng& rng) {
  Vec f = prototype;
  for (double& v : f) v += sigma * rng.normal();
  normalize(f);
  return f;
}

}  // namespace

void SynthConfig::validate() const {
  if (raw_dim == 0) throw std::invalid_argument("raw_dim must be positive");
  if (persons_per_scene < 0.0) {
    throw std::invalid_argument("persons_per_scene must be non-negative");
  }
  if (noise_sigma < 0.0) {
    throw std::invalid_argument("noise_sigma must be non-negative");
  }
  if (scene_extent <= 0.0) {
    throw std::invalid_argument("scene_extent must be positive");
  }
  if (box_scale_min <= 0.0 || box_scale_max < box_scale_min) {
    throw std::invalid_argument("box scale range must satisfy 0 < min <= max");
  }
  if (box_scale_max > scene_extent) {
    throw std::invalid_argument("box_scale_max must not exceed scene_extent");
  }
  std::size_t n_train_ids = (num_labeled + 1) / 2;
  std::size_t n_test_ids = num_labeled - n_train_ids;
  if (n_train_ids > 0 && scenes_train < kForcedScenes) {
    throw std::invalid_argument(
        "scenes_train must be at least 2 when labeled identities exist");
  }
  if (n_test_ids > 0 && scenes_test < kForcedScenes) {
    throw std::invalid_argument(
        "scenes_test must be at least 2 when test identities exist");
  }
  if (num_unlabeled_pool > 0 && scenes_train == 0) {
    throw std::invalid_argument(
        "unlabeled identities require at least one train scene");
  }
}

int SynthWorld::train_class_of(int labeled_id) const {
  for (std::size_t i = 0; i < train_identities.size(); ++i) {
    if (train_identities[i] == labeled_id) return static_cast<int>(i);
  }
  return -1;
}

bool SynthWorld::is_test_scene(int scene_id) const {
  return std::binary_search(test_scenes.begin(), test_scenes.end(), scene_id);
}

SynthWorld gen_world(const SynthConfig& cfg) {
  cfg.validate();

  SynthWorld world;
  world.config = cfg;

  Rng proto_rng(derive_seed(cfg.seed, 0));
  Rng place_rng(derive_seed(cfg.seed, 1));
  Rng scene_rng(derive_seed(cfg.seed, 2));

  world.labeled_prototypes.reserve(cfg.num_labeled);
  for (std::size_t i = 0; i < cfg.num_labeled; ++i) {
    world.labeled_prototypes.push_back(proto_rng.unit_vector(cfg.raw_dim));
  }
  world.unlabeled_prototypes.reserve(cfg.num_unlabeled_pool);
  for (std::size_t i = 0; i < cfg.num_unlabeled_pool; ++i) {
    world.unlabeled_prototypes.push_back(proto_rng.unit_vector(cfg.raw_dim));
  }

  std::size_t n_train_ids = (cfg.num_labeled + 1) / 2;
  for (std::size_t i = 0; i < cfg.num_labeled; ++i) {
    if (i < n_train_ids) {
      world.train_identities.push_back(static_cast<int>(i));
    } else {
      world.test_identities.push_back(static_cast<int>(i));
    }
  }

  std::size_t total_scenes = cfg.scenes_train + cfg.scenes_test;
  for (std::size_t s = 0; s < total_scenes; ++s) {
    if (s < cfg.scenes_train) {
      world.train_scenes.push_back(static_cast<int>(s));
    } else {
      world.test_scenes.push_back(static_cast<int>(s));
    }
  }

  std::vector<std::vector<PendingPerson>> pending(total_scenes);

  double train_slots =
      cfg.persons_per_scene * static_cast<double>(cfg.scenes_train);
  if (!world.train_identities.empty()) {
    double per_id =
        kTrainLabeledShare * train_slots /
        static_cast<double>(world.train_identities.size());
    double extra_mean = std::max(0.0, per_id - double(kForcedScenes));
    for (int id : world.train_identities) {
      place_identity(pending, world.train_scenes, PersonKind::Labeled, id,
                     kForcedScenes, extra_mean, cfg.scenes_train, place_rng);
    }
  }
  for (int id : world.test_identities) {
    place_identity(pending, world.test_scenes, PersonKind::Labeled, id,
                   kForcedScenes, kTestExtraMean,
                   std::min(kTestMaxInstances, cfg.scenes_test), place_rng);
  }
  if (cfg.num_unlabeled_pool > 0) {
    double per_id = kUnlabeledShare * train_slots /
                    static_cast<double>(cfg.num_unlabeled_pool);
    double extra_mean = std::max(0.0, per_id - 1.0);
    for (std::size_t i = 0; i < cfg.num_unlabeled_pool; ++i) {
      place_identity(pending, world.train_scenes, PersonKind::Unlabeled,
                     static_cast<int>(i), 1, extra_mean, cfg.scenes_train,
                     place_rng);
    }
  }

  for (std::size_t s = 0; s < total_scenes; ++s) {
    std::size_t target = place_rng.poisson(cfg.persons_per_scene);
    while (pending[s].size() < target) {
      pending[s].push_back({PersonKind::Background, -1});
    }
  }

  world.scenes.reserve(total_scenes);
  for (std::size_t s = 0; s < total_scenes; ++s) {
    SynthScene scene;
    scene.scene_id = static_cast<int>(s);
    scene.persons.reserve(pending[s].size());
    for (const PendingPerson& pp : pending[s]) {
      Person person;
      person.kind = pp.kind;
      person.identity = pp.identity;
      person.box = random_box(scene_rng, cfg.scene_extent, cfg.box_scale_min,
                              cfg.box_scale_max);
      switch (pp.kind) {
        case PersonKind::Labeled:
          person.raw_feature = noisy_feature(
              world.labeled_prototypes[static_cast<std::size_t>(pp.identity)],
              cfg.noise_sigma, scene_rng);
          break;
        case PersonKind::Unlabeled:
          person.raw_feature = noisy_feature(
              world
                  .unlabeled_prototypes[static_cast<std::size_t>(pp.identity)],
              cfg.noise_sigma, scene_rng);
          break;
        case PersonKind::Background:
          person.raw_feature = scene_rng.unit_vector(cfg.raw_dim);
          break;
      }
      scene.persons.push_back(std::move(person));
    }
    world.scenes.push_back(std::move(scene));
  }

  return world;
}

double nearest_prototype_accuracy(const SynthWorld& world) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const SynthScene& scene : world.scenes) {
    for (const Person& person : scene.persons) {
      if (person.kind == PersonKind::Background) continue;
      ++total;
      double best = -2.0;
      PersonKind best_kind = PersonKind::Background;
      int best_id = -1;
      for (std::size_t i = 0; i < world.labeled_prototypes.size(); ++i) {
        double sim = dot(person.raw_feature, world.labeled_prototypes[i]);
        if (sim > best) {
          best = sim;
          best_kind = PersonKind::Labeled;
          best_id = static_cast<int>(i);
        }
      }
      for (std::size_t i = 0; i < world.unlabeled_prototypes.size(); ++i) {
        double sim = dot(person.raw_feature, world.unlabeled_prototypes[i]);
        if (sim > best) {
          best = sim;
          best_kind = PersonKind::Unlabeled;
          best_id = static_cast<int>(i);
        }
      }
      if (best_kind == person.kind && best_id == person.identity) ++correct;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(total);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

void DetectorConfig::validate() const {
  if (miss_rate < 0.0 || miss_rate > 1.0) {
    throw std::invalid_argument("miss_rate must lie in [0, 1]");
  }
  if (false_alarm_rate < 0.0) {
    throw std::invalid_argument("false_alarm_rate must be non-negative");
  }
  if (jitter_sigma < 0.0) {
    throw std::invalid_argument("jitter_sigma must be non-negative");
  }
  if (score.noise_sigma < 0.0 || score.false_alarm_max < 0.0) {
    throw std::invalid_argument("score noise parameters must be non-negative");
  }
}

std::vector<Detection> simulate_detections(const SynthScene& scene,
                                           const DetectorConfig& det,
                                           Rng& rng) {
  det.validate();
  std::vector<Detection> out;

  for (std::size_t i = 0; i < scene.persons.size(); ++i) {
    const Person& person = scene.persons[i];
    if (rng.uniform() < det.miss_rate) continue;

    Detection d;
    d.scene_id = scene.scene_id;
    d.source_person = static_cast<int>(i);
    d.box = person.box;
    if (det.jitter_sigma > 0.0) {
      double sx = det.jitter_sigma * person.box.width();
      double sy = det.jitter_sigma * person.box.height();
      double x1 = person.box.x1 + sx * rng.normal();
      double x2 = person.box.x2 + sx * rng.normal();
      double y1 = person.box.y1 + sy * rng.normal();
      double y2 = person.box.y2 + sy * rng.normal();
      d.box.x1 = std::min(x1, x2);
      d.box.x2 = std::max(x1, x2);
      d.box.y1 = std::min(y1, y2);
      d.box.y2 = std::max(y1, y2);
      // degenerate after jitter: keep a sliver so the box stays valid
      if (d.box.x2 - d.box.x1 < 1e-9) d.box.x2 = d.box.x1 + 1e-9;
      if (d.box.y2 - d.box.y1 < 1e-9) d.box.y2 = d.box.y1 + 1e-9;
      d.raw_feature = noisy_feature(person.raw_feature, det.jitter_sigma, rng);
    } else {
      d.raw_feature = person.raw_feature;
    }
    // localization error lowers the score: jitter magnitude is the overlap
    // lost against the true box
    double jitter_mag = 1.0 - iou(person.box, d.box);
    d.score = det.score.true_base - det.score.jitter_penalty * jitter_mag +
              det.score.noise_sigma * rng.normal();
    out.push_back(std::move(d));
  }

  // False alarm geometry is inferred from the scene's own persons; an empty
  // scene gives no size reference, so it produces no false alarms.
  if (det.false_alarm_rate > 0.0 && !scene.persons.empty()) {
    double extent = 0.0;
    double side_lo = scene.persons.front().box.width();
    double side_hi = side_lo;
    for (const Person& p : scene.persons) {
      extent = std::max({extent, p.box.x2, p.box.y2});
      side_lo = std::min({side_lo, p.box.width(), p.box.height()});
      side_hi = std::max({side_hi, p.box.width(), p.box.height()});
    }
    extent = std::max(extent, side_hi);
    std::size_t dim = scene.persons.front().raw_feature.size();
    std::size_t n_false = rng.poisson(det.false_alarm_rate);
    for (std::size_t k = 0; k < n_false; ++k) {
      Detection d;
      d.scene_id = scene.scene_id;
      d.source_person = -1;
      d.box = random_box(rng, extent, side_lo, side_hi);
      d.raw_feature = rng.unit_vector(dim);
      d.score = rng.uniform(0.0, det.score.false_alarm_max);
      out.push_back(std::move(d));
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].det_index = static_cast<int>(i);
  }
  return out;
}

std::vector<Detection> threshold_detections(const std::vector<Detection>& dets,
                                            double threshold) {
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    if (d.score >= threshold) kept.push_back(d);
  }
  return kept;
}

}  // namespace oim
