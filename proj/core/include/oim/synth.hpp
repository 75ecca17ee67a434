#ifndef OIM_SYNTH_HPP_
#define OIM_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "oim/rng.hpp"
#include "oim/vecmath.hpp"

namespace oim {

struct SynthConfig {
  std::size_t num_labeled = 32;        // total labeled identities, split train/test
  std::size_t num_unlabeled_pool = 32; // unlabeled identities (train scenes only)
  std::size_t raw_dim = 64;
  std::size_t scenes_train = 120;
  std::size_t scenes_test = 180;
  double persons_per_scene = 6.0;      // mean person count per scene
  double noise_sigma = 0.1;            // within-identity raw feature noise
  double scene_extent = 100.0;         // scenes span [0, extent]^2
  double box_scale_min = 8.0;          // box side length range
  double box_scale_max = 20.0;
  std::uint64_t seed = 1;

  void validate() const;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// Corner-format box, x2 > x1 and y2 > y1.
struct BoundingBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x2 > x1 && y2 > y1; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Intersection area over union area; 0 for disjoint or degenerate boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

enum class PersonKind { Labeled, Unlabeled, Background };

struct Person {
  BoundingBox box;
  PersonKind kind = PersonKind::Background;
  int identity = -1;  // labeled id or unlabeled pool id; -1 for background
  Vec raw_feature;

  friend bool operator==(const Person&, const Person&) = default;
};

struct SynthScene {
  int scene_id = 0;
  std::vector<Person> persons;

  friend bool operator==(const SynthScene&, const SynthScene&) = default;
};

// Generated stand-in for the dataset: identity prototypes on the unit
// sphere, scenes of labeled/unlabeled/background persons, and a train/test
// partition of both scenes and labeled identities.
struct SynthWorld {
  SynthConfig config;
  std::vector<Vec> labeled_prototypes;
  std::vector<Vec> unlabeled_prototypes;
  std::vector<SynthScene> scenes;            // indexed by scene_id
  std::vector<int> train_scenes;
  std::vector<int> test_scenes;
  std::vector<int> train_identities;         // labeled ids, disjoint from test
  std::vector<int> test_identities;

  // index of a labeled identity within train_identities, or -1
  int train_class_of(int labeled_id) const;
  bool is_test_scene(int scene_id) const;

  friend bool operator==(const SynthWorld&, const SynthWorld&) = default;
};

SynthWorld gen_world(const SynthConfig& cfg);

// Fraction of labeled/unlabeled instances whose raw feature is closest (by
// inner product) to its own identity prototype. Sanity check that the world
// is separable enough to train on.
double nearest_prototype_accuracy(const SynthWorld& world);

struct ScoreModel {
  double true_base = 1.0;        // score of an unjittered true detection
  double jitter_penalty = 1.0;   // score drop per unit of relative jitter
  double noise_sigma = 0.05;     // Gaussian noise on true-detection scores
  double false_alarm_max = 0.6;  // false alarms score uniform in [0, this]

  friend bool operator==(const ScoreModel&, const ScoreModel&) = default;
};

struct DetectorConfig {
  double miss_rate = 0.1;         // probability a true person is dropped
  double false_alarm_rate = 0.5;  // expected false alarms per scene (Poisson)
  double jitter_sigma = 0.05;     // corner noise as a fraction of box size
  ScoreModel score;

  void validate() const;
};

struct Detection {
  int scene_id = 0;
  int det_index = 0;        // position within the scene's detection list
  BoundingBox box;
  double score = 0.0;
  Vec raw_feature;
  int source_person = -1;   // index into the scene's persons; -1 = false alarm

  friend bool operator==(const Detection&, const Detection&) = default;
};

std::vector<Detection> simulate_detections(const SynthScene& scene,
                                           const DetectorConfig& det, Rng& rng);

// Keeps detections with score >= threshold.
std::vector<Detection> threshold_detections(const std::vector<Detection>& dets,
                                            double threshold);

}  // namespace oim

#endif  // OIM_SYNTH_HPP_
