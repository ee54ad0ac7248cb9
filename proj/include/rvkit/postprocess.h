#ifndef RVKIT_POSTPROCESS_H_
#define RVKIT_POSTPROCESS_H_

#include <map>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/maps.h"
#include "rvkit/range_image.h"

namespace rvkit {

enum class NmsMode { kBev, k3d };

struct DetectConfig {
  double semantic_threshold = 0.3;
  double centerness_threshold = 0.5;
  double nms_iou = 0.7;
  std::map<int, double> nms_iou_per_class;
  NmsMode nms_mode = NmsMode::kBev;

  double NmsIouFor(int class_id) const;
  void Validate() const;
};

struct Detection {
  Box3D box;
  int class_id = 0;
  double score = 0.0;
  int row = -1;
  int col = -1;
};

// Pixel indices kept for each class; element k - 1 holds class k.
using ForegroundSelection = std::vector<std::vector<int>>;

// A pixel is kept for class k when it is valid, its class-k score exceeds
// the semantic threshold and its center-ness exceeds the center-ness
// threshold.
ForegroundSelection SelectForeground(const PredictionMaps& pred,
                                     const RangeImage& image,
                                     const DetectConfig& cfg);

// One box per selected pixel, scored by semantic score times center-ness.
std::vector<Detection> DecodeDetections(const ForegroundSelection& selected,
                                        const PredictionMaps& pred,
                                        const RangeImage& image);

// Greedy per-class suppression. Output is ordered by score, then pixel
// index, then class.
std::vector<Detection> Nms(std::vector<Detection> dets,
                           const DetectConfig& cfg);

std::vector<Detection> Detect(const RangeImage& image,
                              const PredictionMaps& pred,
                              const DetectConfig& cfg);

}  // namespace rvkit

#endif  // RVKIT_POSTPROCESS_H_
