#ifndef OIM_EVAL_HPP_
#define OIM_EVAL_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "oim/rng.hpp"
#include "oim/synth.hpp"
#include "oim/vecmath.hpp"

namespace oim {

struct SearchQuery {
  int identity = -1;      // labeled identity being searched
  int scene_id = -1;      // scene holding the query instance
  int person_index = -1;  // index into that scene's persons

  friend bool operator==(const SearchQuery&, const SearchQuery&) = default;
};

// One query per test identity. galleries[i] lists the scene ids to search
// for queries[i]: every test scene holding another instance of the identity,
// plus random filler scenes that do not contain it. The query's own scene is
// never in its gallery, so the gallery never holds the query instance itself.
struct SearchProtocol {
  std::vector<SearchQuery> queries;
  std::vector<std::vector<int>> galleries;
  std::size_t gallery_size = 0;

  friend bool operator==(const SearchProtocol&, const SearchProtocol&) = default;
};

// Requires gallery_size to cover every query's mandatory scenes; a request
// larger than the available filler pool is filled to the pool and no further.
// Identities with fewer than two test instances are not queried.
SearchProtocol build_protocol(const SynthWorld& world,
                              std::size_t gallery_size, Rng& rng);

struct GroundTruth {
  int scene_id = -1;
  BoundingBox box;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct RankedDetection {
  Detection detection;
  double similarity = 0.0;

  friend bool operator==(const RankedDetection&, const RankedDetection&) = default;
};

struct QueryResult {
  std::vector<RankedDetection> ranked;  // descending similarity
  std::vector<GroundTruth> ground_truths;

  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

// Inner-product ranking, descending; equal similarities are ordered by
// (scene_id, det_index). ground_truths is left empty for the caller to fill.
QueryResult rank_gallery(
    std::span<const double> query_feature,
    const std::vector<std::pair<Detection, Vec>>& gallery);

// Fraction of queries whose top-K ranked detections include one overlapping
// any ground truth of the query at IoU >= iou_threshold.
double cmc_topk(const std::vector<QueryResult>& results, std::size_t k,
                double iou_threshold = 0.5);

// Greedy matching down the ranking: a detection is a true positive if it
// overlaps a not-yet-matched ground truth in its scene at IoU >= threshold,
// otherwise a false positive. Area under the precision-recall curve by
// rectangular accumulation at each recall step; ground truths that no
// detection matches leave the recall short.
double average_precision(const QueryResult& result,
                         double iou_threshold = 0.5);

// Plain left-to-right mean of per-query average precision.
double mean_ap(const std::vector<QueryResult>& results,
               double iou_threshold = 0.5);

using EmbedFn = std::function<Vec(const Vec& raw_feature)>;

// Ranks every query of the protocol. scene_detections[scene_id] holds the
// detector output per scene; each detection is embedded once. The query
// feature is the embedded raw feature of the query person itself.
std::vector<QueryResult> run_protocol(
    const SynthWorld& world,
    const std::vector<std::vector<Detection>>& scene_detections,
    const SearchProtocol& protocol, const EmbedFn& embed);

struct SearchMetrics {
  double map = 0.0;
  std::vector<double> per_query_ap;
  std::vector<std::pair<std::size_t, double>> cmc;  // (K, top-K match rate)
};

SearchMetrics compute_search_metrics(const std::vector<QueryResult>& results,
                                     const std::vector<std::size_t>& ks,
                                     double iou_threshold = 0.5);

}  // namespace oim

#endif  // OIM_EVAL_HPP_
