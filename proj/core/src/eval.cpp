#include "oim/eval.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace oim {

namespace {

struct IdentityInstances {
  std::vector<std::pair<int, int>> instances;  // (scene_id, person_index)
};

}  // namespace

SearchProtocol build_protocol(const SynthWorld& world,
                              std::size_t gallery_size, Rng& rng) {
  if (gallery_size == 0) {
    throw std::invalid_argument("gallery_size must be at least 1");
  }

  SearchProtocol protocol;
  protocol.gallery_size = gallery_size;

  for (int identity : world.test_identities) {
    std::vector<std::pair<int, int>> instances;
    for (int scene_id : world.test_scenes) {
      const SynthScene& scene = world.scenes[static_cast<std::size_t>(scene_id)];
      for (std::size_t p = 0; p < scene.persons.size(); ++p) {
        if (scene.persons[p].kind == PersonKind::Labeled &&
            scene.persons[p].identity == identity) {
          instances.emplace_back(scene_id, static_cast<int>(p));
        }
      }
    }
    if (instances.size() < 2) continue;  // nothing to search for

    std::size_t pick = rng.uniform_index(instances.size());
    SearchQuery query;
    query.identity = identity;
    query.scene_id = instances[pick].first;
    query.person_index = instances[pick].second;

    std::vector<int> gallery;
    std::vector<int> filler_pool;
    for (int scene_id : world.test_scenes) {
      bool holds_identity = false;
      for (const auto& [inst_scene, inst_person] : instances) {
        if (inst_scene == scene_id) {
          holds_identity = true;
          break;
        }
      }
      if (scene_id == query.scene_id) continue;
      if (holds_identity) {
        gallery.push_back(scene_id);
      } else {
        filler_pool.push_back(scene_id);
      }
    }

    if (gallery.size() > gallery_size) {
      throw std::invalid_argument(
          "gallery_size " + std::to_string(gallery_size) +
          " cannot cover the " + std::to_string(gallery.size()) +
          " scenes holding identity " + std::to_string(identity));
    }

    std::size_t n_fill =
        std::min(gallery_size - gallery.size(), filler_pool.size());
    rng.shuffle(filler_pool);
    gallery.insert(gallery.end(), filler_pool.begin(),
                   filler_pool.begin() + static_cast<std::ptrdiff_t>(n_fill));
    std::sort(gallery.begin(), gallery.end());

    protocol.queries.push_back(query);
    protocol.galleries.push_back(std::move(gallery));
  }

  return protocol;
}

QueryResult rank_gallery(
    std::span<const double> query_feature,
    const std::vector<std::pair<Detection, Vec>>& gallery) {
  QueryResult result;
  result.ranked.reserve(gallery.size());
  for (const auto& [detection, feature] : gallery) {
    if (feature.size() != query_feature.size()) {
      throw std::invalid_argument("gallery feature dimension mismatch");
    }
    result.ranked.push_back({detection, dot(query_feature, feature)});
  }
  std::sort(result.ranked.begin(), result.ranked.end(),
            [](const RankedDetection& a, const RankedDetection& b) {
              if (a.similarity != b.similarity) {
                return a.similarity > b.similarity;
              }
              if (a.detection.scene_id != b.detection.scene_id) {
                return a.detection.scene_id < b.detection.scene_id;
              }
              return a.detection.det_index < b.detection.det_index;
            });
  return result;
}

namespace {

bool overlaps_any_gt(const RankedDetection& rd,
                     const std::vector<GroundTruth>& gts, double threshold) {
  for (const GroundTruth& gt : gts) {
    if (gt.scene_id != rd.detection.scene_id) continue;
    if (iou(rd.detection.box, gt.box) >= threshold) return true;
  }
  return false;
}

}  // namespace

double cmc_topk(const std::vector<QueryResult>& results, std::size_t k,
                double iou_threshold) {
  if (results.empty()) {
    throw std::invalid_argument("cmc_topk needs at least one query result");
  }
  if (k == 0) throw std::invalid_argument("top-K rank must be at least 1");

  std::size_t hits = 0;
  for (const QueryResult& result : results) {
    std::size_t depth = std::min(k, result.ranked.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (overlaps_any_gt(result.ranked[i], result.ground_truths,
                          iou_threshold)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double average_precision(const QueryResult& result, double iou_threshold) {
  if (result.ground_truths.empty()) {
    throw std::invalid_argument("average_precision needs ground truths");
  }

  std::vector<bool> matched(result.ground_truths.size(), false);
  // the PR area is accumulated in extended precision and rounded to double
  // once at the end, so small rational results (1/2, 5/6, ...) come out exact
  long double total_gt =
      static_cast<long double>(result.ground_truths.size());

  long double ap = 0.0L;
  long double prev_recall = 0.0L;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const RankedDetection& rd = result.ranked[i];
    // best-overlap unmatched ground truth in this detection's scene
    std::size_t best_gt = result.ground_truths.size();
    double best_iou = 0.0;
    for (std::size_t g = 0; g < result.ground_truths.size(); ++g) {
      if (matched[g]) continue;
      const GroundTruth& gt = result.ground_truths[g];
      if (gt.scene_id != rd.detection.scene_id) continue;
      double overlap = iou(rd.detection.box, gt.box);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best_iou = overlap;
        best_gt = g;
      }
    }
    if (best_gt == result.ground_truths.size()) continue;  // false positive
    matched[best_gt] = true;
    ++tp;
    long double recall = static_cast<long double>(tp) / total_gt;
    long double precision =
        static_cast<long double>(tp) / static_cast<long double>(i + 1);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return static_cast<double>(ap);
}

double mean_ap(const std::vector<QueryResult>& results, double iou_threshold) {
  if (results.empty()) {
    throw std::invalid_argument("mean_ap needs at least one query result");
  }
  double sum = 0.0;
  for (const QueryResult& result : results) {
    sum += average_precision(result, iou_threshold);
  }
  return sum / static_cast<double>(results.size());
}

std::vector<QueryResult> run_protocol(
    const SynthWorld& world,
    const std::vector<std::vector<Detection>>& scene_detections,
    const SearchProtocol& protocol, const EmbedFn& embed) {
  if (protocol.queries.size() != protocol.galleries.size()) {
    throw std::invalid_argument("protocol queries/galleries size mismatch");
  }
  if (scene_detections.size() != world.scenes.size()) {
    throw std::invalid_argument(
        "scene_detections must have one entry per scene");
  }

  // each scene's detections are embedded at most once
  std::unordered_map<int, std::vector<Vec>> embedded;
  auto scene_embeddings = [&](int scene_id) -> const std::vector<Vec>& {
    auto it = embedded.find(scene_id);
    if (it != embedded.end()) return it->second;
    const auto& dets = scene_detections[static_cast<std::size_t>(scene_id)];
    std::vector<Vec> feats;
    feats.reserve(dets.size());
    for (const Detection& d : dets) feats.push_back(embed(d.raw_feature));
    return embedded.emplace(scene_id, std::move(feats)).first->second;
  };

  std::vector<QueryResult> results;
  results.reserve(protocol.queries.size());
  for (std::size_t q = 0; q < protocol.queries.size(); ++q) {
    const SearchQuery& query = protocol.queries[q];
    const SynthScene& query_scene =
        world.scenes[static_cast<std::size_t>(query.scene_id)];
    const Person& query_person =
        query_scene.persons[static_cast<std::size_t>(query.person_index)];
    Vec query_feature = embed(query_person.raw_feature);

    std::vector<std::pair<Detection, Vec>> gallery;
    std::vector<GroundTruth> ground_truths;
    for (int scene_id : protocol.galleries[q]) {
      const auto& dets = scene_detections[static_cast<std::size_t>(scene_id)];
      const auto& feats = scene_embeddings(scene_id);
      for (std::size_t i = 0; i < dets.size(); ++i) {
        gallery.emplace_back(dets[i], feats[i]);
      }
      const SynthScene& scene = world.scenes[static_cast<std::size_t>(scene_id)];
      for (const Person& person : scene.persons) {
        if (person.kind == PersonKind::Labeled &&
            person.identity == query.identity) {
          ground_truths.push_back({scene_id, person.box});
        }
      }
    }

    QueryResult result = rank_gallery(query_feature, gallery);
    result.ground_truths = std::move(ground_truths);
    results.push_back(std::move(result));
  }
  return results;
}

SearchMetrics compute_search_metrics(const std::vector<QueryResult>& results,
                                     const std::vector<std::size_t>& ks,
                                     double iou_threshold) {
  SearchMetrics metrics;
  metrics.per_query_ap.reserve(results.size());
  for (const QueryResult& result : results) {
    metrics.per_query_ap.push_back(average_precision(result, iou_threshold));
  }
  metrics.map = mean_ap(results, iou_threshold);
  for (std::size_t k : ks) {
    metrics.cmc.emplace_back(k, cmc_topk(results, k, iou_threshold));
  }
  return metrics;
}

}  // namespace oim
