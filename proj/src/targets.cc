#include "rvkit/targets.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <tuple>

#include "rvkit/error.h"

namespace rvkit {

double RegressionTarget::element(Element e) const {
  switch (e) {
    case Element::kOmegaX: return omega_x;
    case Element::kOmegaY: return omega_y;
    case Element::kOmegaZ: return omega_z;
    case Element::kLogL: return log_l;
    case Element::kLogW: return log_w;
    case Element::kLogH: return log_h;
    case Element::kCosPhi: return cos_phi;
    case Element::kSinPhi: return sin_phi;
  }
  return 0.0;
}

void LossConfig::Validate() const {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("loss.tau must lie in [0, 1]");
  if (lambda_s < 0.0 || lambda_r < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (focal_alpha < 0.0 || focal_alpha > 1.0 || focal_gamma < 0.0) {
    throw ConfigError("focal loss parameters out of range");
  }
  if (balanced_alpha <= 0.0 || balanced_gamma <= 0.0) {
    throw ConfigError("balanced L1 parameters must be positive");
  }
}

TargetMaps TargetMaps::Empty(int rows, int cols) {
  TargetMaps t;
  t.semantic = Grid<int32_t>(rows, cols);
  t.centerness = Grid<float>(rows, cols);
  t.p_branch = Grid<float>(rows, cols, kPBranchDepth);
  t.q_branch = Grid<float>(rows, cols, kQBranchDepth);
  t.box_id = Grid<int32_t>(rows, cols, 1, -1);
  t.p_mask = Grid<uint8_t>(rows, cols);
  t.q_mask = Grid<uint8_t>(rows, cols);
  return t;
}

RegressionTarget TargetMaps::target(int pixel) const {
  RegressionTarget t;
  t.omega_y = p_branch.at(pixel, kOmegaY);
  t.omega_z = p_branch.at(pixel, kOmegaZ);
  t.log_h = p_branch.at(pixel, kLogH);
  t.omega_x = q_branch.at(pixel, kOmegaX);
  t.log_l = q_branch.at(pixel, kLogL);
  t.log_w = q_branch.at(pixel, kLogW);
  t.cos_phi = q_branch.at(pixel, kCosPhi);
  t.sin_phi = q_branch.at(pixel, kSinPhi);
  return t;
}

Grid<int32_t> TargetMaps::MemberCounts() const {
  std::vector<std::pair<int32_t, int32_t>> counts;  // sorted (id, count)
  std::vector<int32_t> ids;
  for (int32_t id : box_id.values()) {
    if (id >= 0) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  for (size_t i = 0; i < ids.size();) {
    size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    counts.emplace_back(ids[i], static_cast<int32_t>(j - i));
    i = j;
  }
  Grid<int32_t> out(rows(), cols());
  for (int pix = 0; pix < out.pixel_count(); ++pix) {
    const int32_t id = box_id.at(pix);
    if (id < 0) continue;
    const auto it = std::lower_bound(
        counts.begin(), counts.end(), std::make_pair(id, int32_t{0}));
    out.at(pix) = it->second;
  }
  return out;
}

double ProjectedDistance(const Point3& p, const Point3& c) {
  const double horizontal2 = p.x * p.x + p.y * p.y;
  if (horizontal2 == 0.0) {
    throw DegenerateInputError("projected distance needs a point off the z-axis");
  }
  const double cos2 = p.x * p.x / horizontal2;
  const double dx = p.x - c.x;
  const double dy = p.y - c.y;
  const double dz = p.z - c.z;
  return std::sqrt((dx * dx + dy * dy) * cos2 + dz * dz);
}

std::vector<double> CenternessTargets(const Box3D& box,
                                      std::span<const Point3> members) {
  if (members.empty()) {
    throw ConstraintError("center-ness needs at least one member point");
  }
  const Point3 center = box.center();
  double corner_max = 0.0;
  for (const Point3& corner : BoxCorners(box)) {
    corner_max = std::max(corner_max, ProjectedDistance(corner, center));
  }
  std::vector<double> normalized(members.size());
  double min_normalized = 1.0;
  for (size_t i = 0; i < members.size(); ++i) {
    const double d = ProjectedDistance(members[i], center);
    normalized[i] = corner_max > 0.0 ? std::min(1.0, d / corner_max) : 0.0;
    min_normalized = std::min(min_normalized, normalized[i]);
  }
  std::vector<double> scores(members.size(), 1.0);
  const double denom = 1.0 - min_normalized;
  if (denom <= 0.0) return scores;  // every member sits at the clamp
  for (size_t i = 0; i < members.size(); ++i) {
    scores[i] = normalized[i] == min_normalized
                    ? 1.0
                    : std::clamp((1.0 - normalized[i]) / denom, 0.0, 1.0);
  }
  return scores;
}

std::vector<double> GaussianTargets(const Box3D& box,
                                    std::span<const Point3> members,
                                    const GaussianAssignConfig& cfg) {
  if (members.empty()) {
    throw ConstraintError("Gaussian assignment needs at least one member point");
  }
  if (!(cfg.sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  const Point3 center = box.center();
  std::vector<double> d2(members.size());
  double min_d2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < members.size(); ++i) {
    const double d = Distance(members[i], center);
    d2[i] = d * d;
    min_d2 = std::min(min_d2, d2[i]);
  }
  std::vector<double> scores(members.size());
  const double two_var = 2.0 * cfg.sigma * cfg.sigma;
  for (size_t i = 0; i < members.size(); ++i) {
    scores[i] = std::exp((min_d2 - d2[i]) / two_var);
  }
  return scores;
}

RegressionTarget EncodeRegression(const Point3& p, const Box3D& box) {
  const double alpha = AzimuthOf(p);
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  const double dx = box.cx - p.x;
  const double dy = box.cy - p.y;
  RegressionTarget t;
  t.omega_x = c * dx + s * dy;
  t.omega_y = -s * dx + c * dy;
  t.omega_z = box.cz - p.z;
  t.log_l = std::log(box.l);
  t.log_w = std::log(box.w);
  t.log_h = std::log(box.h);
  const double phi = WrapAngle(box.yaw - alpha);
  t.cos_phi = std::cos(phi);
  t.sin_phi = std::sin(phi);
  return t;
}

Box3D DecodeBox(const Point3& p, const RegressionTarget& t) {
  const double alpha = AzimuthOf(p);
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  Box3D b;
  b.cx = p.x + c * t.omega_x - s * t.omega_y;
  b.cy = p.y + s * t.omega_x + c * t.omega_y;
  b.cz = p.z + t.omega_z;
  b.l = std::exp(t.log_l);
  b.w = std::exp(t.log_w);
  b.h = std::exp(t.log_h);
  b.yaw = WrapAngle(std::atan2(t.sin_phi, t.cos_phi) + alpha);
  return b;
}

TargetMaps BuildTargetMaps(const RangeImage& image,
                           std::span<const Box3D> boxes,
                           const LossConfig& cfg, double membership_margin) {
  cfg.Validate();
  std::set<int> seen_ids;
  for (const Box3D& b : boxes) {
    if (b.instance_id < 0) throw ConstraintError("box instance ids must be >= 0");
    if (!seen_ids.insert(b.instance_id).second) {
      throw ConstraintError("duplicate box instance id " +
                            std::to_string(b.instance_id));
    }
  }

  const int m = image.rows();
  const int n = image.cols();
  TargetMaps tgt = TargetMaps::Empty(m, n);
  std::vector<std::vector<int>> members(boxes.size());
  std::vector<double> reach(boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) {
    reach[i] = 0.5 * std::hypot(boxes[i].l, boxes[i].w) + membership_margin;
  }

  for (int pix = 0; pix < m * n; ++pix) {
    if (!image.is_valid(pix)) continue;
    const Point3 p = image.point(pix);
    int best = -1;
    std::tuple<double, double, int> best_key;
    for (size_t i = 0; i < boxes.size(); ++i) {
      const Box3D& b = boxes[i];
      if (std::hypot(p.x - b.cx, p.y - b.cy) > reach[i]) continue;
      if (!PointInBox(p, b, membership_margin)) continue;
      const std::tuple<double, double, int> key{
          ProjectedDistance(p, b.center()), b.bev_area(), b.instance_id};
      if (best < 0 || key < best_key) {
        best = static_cast<int>(i);
        best_key = key;
      }
    }
    if (best >= 0) members[best].push_back(pix);
  }

  std::vector<Point3> points;
  for (size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& b = boxes[i];
    const std::vector<int>& pixels = members[i];
    if (pixels.empty()) continue;
    points.clear();
    for (int pix : pixels) points.push_back(image.point(pix));
    const std::vector<double> scores = CenternessTargets(b, points);
    for (size_t j = 0; j < pixels.size(); ++j) {
      const int pix = pixels[j];
      const RegressionTarget t = EncodeRegression(points[j], b);
      const float c = static_cast<float>(scores[j]);
      tgt.semantic.at(pix) = b.class_id;
      tgt.box_id.at(pix) = b.instance_id;
      tgt.centerness.at(pix) = c;
      tgt.p_branch.at(pix, kOmegaY) = static_cast<float>(t.omega_y);
      tgt.p_branch.at(pix, kOmegaZ) = static_cast<float>(t.omega_z);
      tgt.p_branch.at(pix, kLogH) = static_cast<float>(t.log_h);
      tgt.q_branch.at(pix, kOmegaX) = static_cast<float>(t.omega_x);
      tgt.q_branch.at(pix, kLogL) = static_cast<float>(t.log_l);
      tgt.q_branch.at(pix, kLogW) = static_cast<float>(t.log_w);
      tgt.q_branch.at(pix, kCosPhi) = static_cast<float>(t.cos_phi);
      tgt.q_branch.at(pix, kSinPhi) = static_cast<float>(t.sin_phi);
      tgt.p_mask.at(pix) = c > 0.0f;
      tgt.q_mask.at(pix) = c > cfg.tau;
    }
  }
  return tgt;
}

double FocalLoss(double pred, bool target, double alpha, double gamma) {
  const double p = std::clamp(pred, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double pt = target ? p : 1.0 - p;
  const double at = target ? alpha : 1.0 - alpha;
  return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

double BalancedL1(double residual, double alpha, double gamma) {
  const double x = std::abs(residual);
  const double b = std::exp(gamma / alpha) - 1.0;
  if (x < 1.0) {
    return alpha / b * (b * x + 1.0) * std::log(b * x + 1.0) - alpha * x;
  }
  return gamma * x + gamma / b - alpha;
}

namespace {

void RequireMatchingShapes(const PredictionMaps& pred, const TargetMaps& tgt) {
  pred.RequireShape(tgt.rows(), tgt.cols());
}

double PredictedElement(const PredictionMaps& pred, int pix, int e) {
  const ElementSlot slot = kElementSlots[e];
  return slot.p_branch ? pred.p_branch.at(pix, slot.channel)
                       : pred.q_branch.at(pix, slot.channel);
}

double TargetElement(const TargetMaps& tgt, int pix, int e) {
  const ElementSlot slot = kElementSlots[e];
  return slot.p_branch ? tgt.p_branch.at(pix, slot.channel)
                       : tgt.q_branch.at(pix, slot.channel);
}

}  // namespace

double ClassificationLoss(const PredictionMaps& pred, const TargetMaps& tgt,
                          const Grid<uint8_t>& valid, const LossConfig& cfg) {
  RequireMatchingShapes(pred, tgt);
  RequireSamePixels(valid, tgt.semantic, "valid mask vs targets");
  const Grid<int32_t> counts = tgt.MemberCounts();
  const int classes = pred.num_classes();
  double loss = 0.0;
  for (int pix = 0; pix < tgt.semantic.pixel_count(); ++pix) {
    if (!valid.at(pix)) continue;
    const int label = tgt.semantic.at(pix);
    if (label > classes) {
      throw ShapeError("target class " + std::to_string(label) +
                       " exceeds " + std::to_string(classes) +
                       " predicted class channels");
    }
    for (int k = 1; k <= classes; ++k) {
      loss += FocalLoss(pred.semantic_scores.at(pix, k - 1), label == k,
                        cfg.focal_alpha, cfg.focal_gamma);
    }
    const double c = tgt.centerness.at(pix);
    if (c > 0.0) {
      loss += cfg.lambda_s / counts.at(pix) *
              BalancedL1(pred.centerness.at(pix) - c, cfg.balanced_alpha,
                         cfg.balanced_gamma);
    }
  }
  return loss;
}

double RegressionLoss(const PredictionMaps& pred, const TargetMaps& tgt,
                      const LossConfig& cfg) {
  RequireMatchingShapes(pred, tgt);
  const Grid<int32_t> counts = tgt.MemberCounts();
  double loss = 0.0;
  for (int pix = 0; pix < tgt.semantic.pixel_count(); ++pix) {
    const bool p_on = tgt.p_mask.at(pix) != 0;
    const bool q_on = tgt.q_mask.at(pix) != 0;
    if (!p_on && !q_on) continue;
    const double weight = cfg.lambda_r / counts.at(pix);
    for (int e = 0; e < kElementCount; ++e) {
      if (!(kElementSlots[e].p_branch ? p_on : q_on)) continue;
      loss += weight * BalancedL1(PredictedElement(pred, pix, e) -
                                      TargetElement(tgt, pix, e),
                                  cfg.balanced_alpha, cfg.balanced_gamma);
    }
  }
  return loss;
}

void RegressionErrorAccumulator::Add(const PredictionMaps& pred,
                                     const TargetMaps& tgt) {
  RequireMatchingShapes(pred, tgt);
  for (int pix = 0; pix < tgt.semantic.pixel_count(); ++pix) {
    if (tgt.box_id.at(pix) < 0) continue;
    const int split = tgt.centerness.at(pix) >= tau_
                          ? RegressionErrorReport::kCentric
                          : RegressionErrorReport::kEdge;
    ++counts_[RegressionErrorReport::kAll];
    ++counts_[split];
    for (int e = 0; e < kElementCount; ++e) {
      const double err =
          std::abs(PredictedElement(pred, pix, e) - TargetElement(tgt, pix, e));
      sums_[RegressionErrorReport::kAll][e] += err;
      sums_[split][e] += err;
    }
  }
}

RegressionErrorReport RegressionErrorAccumulator::Report() const {
  RegressionErrorReport report;
  report.empty = counts_[RegressionErrorReport::kAll] == 0;
  report.pixel_count = counts_;
  for (int row = 0; row < 3; ++row) {
    for (int e = 0; e < kElementCount; ++e) {
      report.mean_abs_error[row][e] =
          counts_[row] > 0 ? sums_[row][e] / counts_[row] : 0.0;
    }
  }
  return report;
}

RegressionErrorReport RegressionErrors(const PredictionMaps& pred,
                                       const TargetMaps& tgt, double tau) {
  RegressionErrorAccumulator acc(tau);
  acc.Add(pred, tgt);
  return acc.Report();
}

}  // namespace rvkit
