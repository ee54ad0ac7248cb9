#ifndef RVKIT_METRICS_H_
#define RVKIT_METRICS_H_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/postprocess.h"

namespace rvkit {

enum class IouKind { kBev, k3d };

struct MatchPair {
  int det = -1;
  int gt = -1;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_dets;
  std::vector<int> unmatched_gts;
};

// Greedy matching in descending score order: each detection claims the
// unclaimed same-class ground truth with the highest IoU, if that IoU is at
// least `iou_threshold`.
MatchResult MatchDetections(std::span<const Detection> dets,
                            std::span<const Box3D> gts, double iou_threshold,
                            IouKind kind = IouKind::k3d);

struct FrameDetections {
  std::vector<Detection> dets;
  std::vector<Box3D> gts;
};

struct ApResult {
  double ap = 0.0;
  // False when there is neither ground truth nor any detection.
  bool defined = false;
  int num_gt = 0;
  int num_det = 0;
  int true_positives = 0;
};

// All-point interpolated area under the precision-recall curve. Matching
// runs per frame; the ranked list is pooled over frames.
ApResult AveragePrecision(std::span<const FrameDetections> frames,
                          double iou_threshold, IouKind kind = IouKind::k3d);
ApResult AveragePrecision(std::span<const Detection> dets,
                          std::span<const Box3D> gts, double iou_threshold,
                          IouKind kind = IouKind::k3d);

// Per-pixel panoptic label. Pixels with instance_id < 0 belong to no
// segment.
struct SegmentLabel {
  int32_t class_id = 0;
  int32_t instance_id = -1;
};

struct PanopticScores {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  double iou_sum = 0.0;
  // False when there are no segments at all.
  bool defined = false;
};

// Accumulates segment matches over frames. Segments match when they share
// a class and their point-set IoU exceeds 0.5.
class PanopticAccumulator {
 public:
  // Throws ShapeError unless both labelings cover the same pixels.
  void Add(std::span<const SegmentLabel> pred,
           std::span<const SegmentLabel> gt);
  PanopticScores Scores(int class_id) const;
  // Pooled over all classes.
  PanopticScores Overall() const;
  std::vector<int> classes() const;

 private:
  struct Counts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double iou_sum = 0.0;
  };
  static PanopticScores Finish(const Counts& c);
  std::map<int, Counts> per_class_;
};

PanopticScores PanopticQuality(std::span<const SegmentLabel> pred,
                               std::span<const SegmentLabel> gt);

}  // namespace rvkit

#endif  // RVKIT_METRICS_H_
