#include "rvkit/panoptic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rvkit/error.h"

namespace rvkit {
namespace {

double RawAzimuth(const Point3& p) {
  if (p.x == 0.0 && p.y == 0.0) {
    throw DegenerateInputError("view distance needs points off the z-axis");
  }
  return std::atan2(p.y, p.x);
}

double ViewDistanceWithAzimuths(const Point3& a, double azimuth_a,
                                const Point3& b, double azimuth_b,
                                double lambda) {
  const double mean = 0.5 * (azimuth_a + azimuth_b);
  const double c = std::cos(mean);
  const double s = std::sin(mean);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double radial = c * dx + s * dy;
  const double lateral = -s * dx + c * dy;
  const double vertical = a.z - b.z;
  return std::sqrt(lambda * radial * radial + lateral * lateral +
                   vertical * vertical);
}

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int Find(int i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void Union(int a, int b) {
    a = Find(a);
    b = Find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

void PanopticConfig::Validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("panoptic.lambda must lie in [0, 1]");
  }
  if (!(cluster_eps > 0.0)) throw ConfigError("panoptic.cluster_eps must be > 0");
  if (heatmap_nms_window < 1 || heatmap_nms_window % 2 == 0) {
    throw ConfigError("panoptic.heatmap_nms_window must be a positive odd number");
  }
  if (tau_c < 0.0 || tau_c > 1.0 || tau_s < 0.0 || tau_s > 1.0) {
    throw ConfigError("panoptic thresholds must lie in [0, 1]");
  }
}

Grid<int32_t> SemanticSegment(const PredictionMaps& pred,
                              const Grid<uint8_t>& valid, double tau_s) {
  pred.RequireShape(valid.rows(), valid.cols());
  Grid<int32_t> out(valid.rows(), valid.cols());
  const int classes = pred.num_classes();
  for (int pix = 0; pix < out.pixel_count(); ++pix) {
    if (!valid.at(pix)) continue;
    int best = 0;
    float best_score = 0.0f;
    for (int k = 0; k < classes; ++k) {
      const float s = pred.semantic_scores.at(pix, k);
      if (best == 0 || s > best_score) {
        best = k + 1;
        best_score = s;
      }
    }
    out.at(pix) = best > 0 && best_score > tau_s ? best : 0;
  }
  return out;
}

Point3 OffsetPoint(const Point3& p, double omega_y, double omega_z,
                   OffsetConvention convention) {
  const double alpha = AzimuthOf(p);
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  if (convention == OffsetConvention::kPrinted) {
    return {p.x + c * omega_y, p.y + s * omega_y, p.z + omega_z};
  }
  return {p.x - s * omega_y, p.y + c * omega_y, p.z + omega_z};
}

Grid<float> HeatmapNms(const Grid<float>& heatmap, const Grid<uint8_t>& mask,
                       int window) {
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("heatmap NMS window must be a positive odd number, got " +
                      std::to_string(window));
  }
  RequireSamePixels(heatmap, mask, "heatmap vs mask");
  const int m = heatmap.rows();
  const int n = heatmap.cols();
  const int half = window / 2;
  Grid<float> out(m, n);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) {
      if (!mask(r, c)) continue;
      const float v = heatmap(r, c);
      const int index = r * n + c;
      bool keep = true;
      for (int rr = std::max(0, r - half); keep && rr <= std::min(m - 1, r + half); ++rr) {
        for (int cc = std::max(0, c - half); cc <= std::min(n - 1, c + half); ++cc) {
          if ((rr == r && cc == c) || !mask(rr, cc)) continue;
          const float u = heatmap(rr, cc);
          if (u > v || (u == v && rr * n + cc < index)) {
            keep = false;
            break;
          }
        }
      }
      if (keep) out(r, c) = v;
    }
  }
  return out;
}

double ViewDistance(const Point3& a, const Point3& b, double lambda) {
  return ViewDistanceWithAzimuths(a, RawAzimuth(a), b, RawAzimuth(b), lambda);
}

PointClustering ClusterOffsetPoints(std::span<const Point3> offset_points,
                                    std::span<const int> seed_indices,
                                    double lambda, double eps) {
  const int count = static_cast<int>(offset_points.size());
  PointClustering out;
  out.labels.assign(count, -1);
  if (seed_indices.empty()) return out;

  std::vector<double> azimuth(count);
  for (int i = 0; i < count; ++i) azimuth[i] = RawAzimuth(offset_points[i]);

  std::vector<int> seeds(seed_indices.begin(), seed_indices.end());
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  const int s = static_cast<int>(seeds.size());
  DisjointSets sets(s);
  for (int i = 0; i < s; ++i) {
    for (int j = i + 1; j < s; ++j) {
      const int a = seeds[i];
      const int b = seeds[j];
      if (ViewDistanceWithAzimuths(offset_points[a], azimuth[a],
                                   offset_points[b], azimuth[b],
                                   lambda) <= eps) {
        sets.Union(i, j);
      }
    }
  }

  // Provisional cluster per disjoint-set root.
  std::vector<int> cluster_of_seed(s);
  std::vector<int> root_cluster(s, -1);
  int clusters = 0;
  for (int i = 0; i < s; ++i) {
    const int root = sets.Find(i);
    if (root_cluster[root] < 0) root_cluster[root] = clusters++;
    cluster_of_seed[i] = root_cluster[root];
  }

  std::vector<int> provisional(count, -1);
  for (int i = 0; i < s; ++i) provisional[seeds[i]] = cluster_of_seed[i];
  for (int p = 0; p < count; ++p) {
    if (provisional[p] >= 0) continue;
    double best = std::numeric_limits<double>::infinity();
    int best_cluster = -1;
    for (int i = 0; i < s; ++i) {
      const int q = seeds[i];
      const double d = ViewDistanceWithAzimuths(
          offset_points[p], azimuth[p], offset_points[q], azimuth[q], lambda);
      if (d < best || (d == best && cluster_of_seed[i] < best_cluster)) {
        best = d;
        best_cluster = cluster_of_seed[i];
      }
    }
    provisional[p] = best_cluster;
  }

  // Renumber by lowest member index.
  std::vector<int> canonical(clusters, -1);
  int next = 0;
  for (int p = 0; p < count; ++p) {
    int& id = canonical[provisional[p]];
    if (id < 0) id = next++;
    out.labels[p] = id;
  }
  out.seeds.assign(clusters, {});
  for (int i = 0; i < s; ++i) {
    out.seeds[canonical[cluster_of_seed[i]]].push_back(seeds[i]);
  }
  return out;
}

ClassClustering ClusterInstances(const RangeImage& image,
                                 const PredictionMaps& pred,
                                 const Grid<int32_t>& semantic,
                                 const PanopticConfig& cfg, int class_id) {
  cfg.Validate();
  pred.RequireShape(image.rows(), image.cols());
  RequireSamePixels(semantic, image.valid, "semantic plane vs image");
  ClassClustering out;
  Grid<uint8_t> mask(image.rows(), image.cols());
  for (int pix = 0; pix < mask.pixel_count(); ++pix) {
    if (image.is_valid(pix) && semantic.at(pix) == class_id) {
      mask.at(pix) = 1;
      out.pixels.push_back(pix);
    }
  }
  if (out.pixels.empty()) return out;

  std::vector<Point3> offsets;
  offsets.reserve(out.pixels.size());
  for (int pix : out.pixels) {
    offsets.push_back(OffsetPoint(image.point(pix), pred.p_branch.at(pix, kOmegaY),
                                  pred.p_branch.at(pix, kOmegaZ),
                                  cfg.offset_convention));
  }
  const Grid<float> peaks = HeatmapNms(pred.centerness, mask, cfg.heatmap_nms_window);
  std::vector<int> seeds;
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    if (peaks.at(out.pixels[i]) > cfg.tau_c) seeds.push_back(static_cast<int>(i));
  }
  out.unseeded = seeds.empty();
  out.clustering = ClusterOffsetPoints(offsets, seeds, cfg.lambda, cfg.cluster_eps);
  return out;
}

ClassClustering ClusterInstances(const RangeImage& image,
                                 const PredictionMaps& pred,
                                 const PanopticConfig& cfg, int class_id) {
  return ClusterInstances(image, pred, SemanticSegment(pred, image.valid, cfg.tau_s),
                          cfg, class_id);
}

PanopticResult PanopticSegment(const RangeImage& image,
                               const PredictionMaps& pred,
                               const PanopticConfig& cfg,
                               const std::vector<int>& thing_classes) {
  cfg.Validate();
  PanopticResult result;
  result.semantic = SemanticSegment(pred, image.valid, cfg.tau_s);
  result.instance = Grid<int32_t>(image.rows(), image.cols(), 1, -1);
  std::vector<int> things = thing_classes;
  if (things.empty()) {
    for (int k = 1; k <= pred.num_classes(); ++k) things.push_back(k);
  }
  std::sort(things.begin(), things.end());
  int next_id = 0;
  for (int class_id : things) {
    ClassClustering cc = ClusterInstances(image, pred, result.semantic, cfg, class_id);
    if (cc.unseeded && !cc.pixels.empty()) ++result.unseeded_classes;
    const int base = next_id;
    for (size_t i = 0; i < cc.pixels.size(); ++i) {
      const int label = cc.clustering.labels[i];
      if (label >= 0) result.instance.at(cc.pixels[i]) = base + label;
    }
    for (size_t k = 0; k < cc.clustering.seeds.size(); ++k) {
      InstanceCluster cluster;
      cluster.instance_id = base + static_cast<int>(k);
      cluster.class_id = class_id;
      for (int idx : cc.clustering.seeds[k]) cluster.seed_pixels.push_back(cc.pixels[idx]);
      result.clusters.push_back(std::move(cluster));
    }
    next_id += static_cast<int>(cc.clustering.seeds.size());
  }
  return result;
}

Point3 ObjectCenter(std::span<const Point3> members) {
  if (members.empty()) throw ConstraintError("object center needs at least one point");
  Point3 sum;
  for (const Point3& p : members) sum = sum + p;
  return (1.0 / static_cast<double>(members.size())) * sum;
}

}  // namespace rvkit
