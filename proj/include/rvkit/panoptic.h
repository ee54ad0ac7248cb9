#ifndef RVKIT_PANOPTIC_H_
#define RVKIT_PANOPTIC_H_

#include <cstdint>
#include <span>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/grid.h"
#include "rvkit/maps.h"
#include "rvkit/range_image.h"

namespace rvkit {

// Direction used to apply the lateral offset when building offset points.
enum class OffsetConvention {
  // (-sin a, cos a): exact inverse of the lateral offset encoding.
  kInverse,
  // (cos a, sin a): the form printed in the clustering pseudo-code.
  kPrinted,
};

struct PanopticConfig {
  double tau_c = 0.7;
  double tau_s = 0.3;
  double lambda = 0.01;
  double cluster_eps = 0.5;
  int heatmap_nms_window = 3;
  OffsetConvention offset_convention = OffsetConvention::kInverse;

  void Validate() const;
};

struct InstanceCluster {
  int instance_id = -1;
  int class_id = 0;
  std::vector<int> seed_pixels;
};

struct PanopticResult {
  Grid<int32_t> semantic;  // 0 = background
  Grid<int32_t> instance;  // -1 = stuff, background or unassigned
  std::vector<InstanceCluster> clusters;
  // Thing classes with foreground pixels but no seed.
  int unseeded_classes = 0;
};

// Per-pixel argmax over class scores; background unless the best score
// exceeds tau_s. Ties go to the lowest class id.
Grid<int32_t> SemanticSegment(const PredictionMaps& pred,
                              const Grid<uint8_t>& valid, double tau_s);

// Shifts a point by its predicted lateral and vertical offsets.
Point3 OffsetPoint(const Point3& p, double omega_y, double omega_z,
                   OffsetConvention convention = OffsetConvention::kInverse);

// Keeps a pixel's value iff it beats every masked pixel in its window; an
// equal neighbor only loses to the lower row-major index. Unmasked and
// suppressed pixels become 0. Throws ConfigError for an even window.
Grid<float> HeatmapNms(const Grid<float>& heatmap, const Grid<uint8_t>& mask,
                       int window);

// Distance in the frame aligned with the mean azimuth of the two points,
// with the squared radial component scaled by lambda.
double ViewDistance(const Point3& a, const Point3& b, double lambda);

// Clustering of offset points. Seeds are linked by single linkage when
// their view distance is at most eps; every other point joins the cluster
// holding its nearest seed. Labels are numbered by the lowest point index
// in each cluster; all labels are -1 when there are no seeds.
struct PointClustering {
  std::vector<int> labels;
  std::vector<std::vector<int>> seeds;  // per cluster, ascending
};

PointClustering ClusterOffsetPoints(std::span<const Point3> offset_points,
                                    std::span<const int> seed_indices,
                                    double lambda, double eps);

struct ClassClustering {
  std::vector<int> pixels;  // class pixels, row-major
  PointClustering clustering;
  bool unseeded = false;
};

// Instance clustering for one class over the pixels whose semantic label
// equals `class_id`.
ClassClustering ClusterInstances(const RangeImage& image,
                                 const PredictionMaps& pred,
                                 const Grid<int32_t>& semantic,
                                 const PanopticConfig& cfg, int class_id);
ClassClustering ClusterInstances(const RangeImage& image,
                                 const PredictionMaps& pred,
                                 const PanopticConfig& cfg, int class_id);

// Semantic readout for all classes plus instance clustering per thing
// class. An empty `thing_classes` treats every class as a thing.
PanopticResult PanopticSegment(const RangeImage& image,
                               const PredictionMaps& pred,
                               const PanopticConfig& cfg,
                               const std::vector<int>& thing_classes = {});

// Mean of the member coordinates, used as the object center when no box is
// annotated. Throws ConstraintError for an empty list.
Point3 ObjectCenter(std::span<const Point3> members);

}  // namespace rvkit

#endif  // RVKIT_PANOPTIC_H_
