#include "rvkit/postprocess.h"

#include <algorithm>
#include <cmath>

#include "rvkit/error.h"
#include "rvkit/targets.h"

namespace rvkit {
namespace {

// Score descending, then pixel index, then class.
bool RanksBefore(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.row != b.row) return a.row < b.row;
  if (a.col != b.col) return a.col < b.col;
  return a.class_id < b.class_id;
}

double Overlap(const Box3D& a, const Box3D& b, NmsMode mode) {
  return mode == NmsMode::kBev ? BevIou(a, b) : Iou3d(a, b);
}

}  // namespace

double DetectConfig::NmsIouFor(int class_id) const {
  const auto it = nms_iou_per_class.find(class_id);
  return it == nms_iou_per_class.end() ? nms_iou : it->second;
}

void DetectConfig::Validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(semantic_threshold) || !in_unit(centerness_threshold) ||
      !in_unit(nms_iou)) {
    throw ConfigError("detect thresholds must lie in [0, 1]");
  }
  for (const auto& [cls, iou] : nms_iou_per_class) {
    if (!in_unit(iou)) {
      throw ConfigError("detect.nms_iou_per_class[" + std::to_string(cls) +
                        "] must lie in [0, 1]");
    }
  }
}

ForegroundSelection SelectForeground(const PredictionMaps& pred,
                                     const RangeImage& image,
                                     const DetectConfig& cfg) {
  pred.RequireShape(image.rows(), image.cols());
  const int classes = pred.num_classes();
  ForegroundSelection selected(classes);
  for (int pix = 0; pix < image.valid.pixel_count(); ++pix) {
    if (!image.is_valid(pix)) continue;
    if (!(pred.centerness.at(pix) > cfg.centerness_threshold)) continue;
    for (int k = 0; k < classes; ++k) {
      if (pred.semantic_scores.at(pix, k) > cfg.semantic_threshold) {
        selected[k].push_back(pix);
      }
    }
  }
  return selected;
}

std::vector<Detection> DecodeDetections(const ForegroundSelection& selected,
                                        const PredictionMaps& pred,
                                        const RangeImage& image) {
  pred.RequireShape(image.rows(), image.cols());
  std::vector<Detection> dets;
  const int cols = image.cols();
  for (size_t k = 0; k < selected.size(); ++k) {
    const int class_id = static_cast<int>(k) + 1;
    for (int pix : selected[k]) {
      RegressionTarget t;
      t.omega_y = pred.p_branch.at(pix, kOmegaY);
      t.omega_z = pred.p_branch.at(pix, kOmegaZ);
      t.log_h = pred.p_branch.at(pix, kLogH);
      t.omega_x = pred.q_branch.at(pix, kOmegaX);
      t.log_l = pred.q_branch.at(pix, kLogL);
      t.log_w = pred.q_branch.at(pix, kLogW);
      t.cos_phi = pred.q_branch.at(pix, kCosPhi);
      t.sin_phi = pred.q_branch.at(pix, kSinPhi);
      Detection d;
      d.box = DecodeBox(image.point(pix), t);
      d.box.class_id = class_id;
      d.class_id = class_id;
      d.score = std::clamp(static_cast<double>(pred.semantic_scores.at(pix, k)) *
                               pred.centerness.at(pix),
                           0.0, 1.0);
      d.row = pix / cols;
      d.col = pix % cols;
      dets.push_back(d);
    }
  }
  return dets;
}

std::vector<Detection> Nms(std::vector<Detection> dets,
                           const DetectConfig& cfg) {
  std::stable_sort(dets.begin(), dets.end(), RanksBefore);
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    const double limit = cfg.NmsIouFor(d.class_id);
    const double reach = 0.5 * std::hypot(d.box.l, d.box.w);
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id != d.class_id) continue;
      const double other = 0.5 * std::hypot(k.box.l, k.box.w);
      if (std::hypot(k.box.cx - d.box.cx, k.box.cy - d.box.cy) > reach + other) {
        continue;
      }
      if (Overlap(k.box, d.box, cfg.nms_mode) > limit) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> Detect(const RangeImage& image,
                              const PredictionMaps& pred,
                              const DetectConfig& cfg) {
  cfg.Validate();
  return Nms(DecodeDetections(SelectForeground(pred, image, cfg), pred, image),
             cfg);
}

}  // namespace rvkit
