#include "rvkit/metrics.h"

#include <algorithm>
#include <numeric>
#include <utility>

#include "rvkit/error.h"

namespace rvkit {
namespace {

double BoxIou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::kBev ? BevIou(a, b) : Iou3d(a, b);
}

std::vector<int> ScoreOrder(std::span<const Detection> dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

}  // namespace

MatchResult MatchDetections(std::span<const Detection> dets,
                            std::span<const Box3D> gts, double iou_threshold,
                            IouKind kind) {
  MatchResult result;
  std::vector<bool> claimed(gts.size(), false);
  for (int d : ScoreOrder(dets)) {
    int best = -1;
    double best_iou = -1.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g] || gts[g].class_id != dets[d].class_id) continue;
      const double iou = BoxIou(dets[d].box, gts[g], kind);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      claimed[best] = true;
      result.pairs.push_back({d, best, best_iou});
    } else {
      result.unmatched_dets.push_back(d);
    }
  }
  for (size_t g = 0; g < gts.size(); ++g) {
    if (!claimed[g]) result.unmatched_gts.push_back(static_cast<int>(g));
  }
  return result;
}

ApResult AveragePrecision(std::span<const FrameDetections> frames,
                          double iou_threshold, IouKind kind) {
  ApResult result;
  // (score, is true positive), in frame order then per-frame score order.
  std::vector<std::pair<double, bool>> ranked;
  for (const FrameDetections& frame : frames) {
    result.num_gt += static_cast<int>(frame.gts.size());
    result.num_det += static_cast<int>(frame.dets.size());
    const MatchResult match = MatchDetections(frame.dets, frame.gts, iou_threshold, kind);
    std::vector<bool> tp(frame.dets.size(), false);
    for (const MatchPair& p : match.pairs) tp[p.det] = true;
    for (int d : ScoreOrder(frame.dets)) ranked.emplace_back(frame.dets[d].score, tp[d]);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (result.num_gt == 0) {
    result.defined = result.num_det > 0;
    return result;
  }
  result.defined = true;

  std::vector<double> precision;
  std::vector<double> recall;
  int tp = 0;
  int fp = 0;
  for (const auto& [score, is_tp] : ranked) {
    is_tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / result.num_gt);
  }
  result.true_positives = tp;
  // Precision envelope, then sum over recall steps.
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  result.ap = std::clamp(ap, 0.0, 1.0);
  return result;
}

ApResult AveragePrecision(std::span<const Detection> dets,
                          std::span<const Box3D> gts, double iou_threshold,
                          IouKind kind) {
  const FrameDetections frame{{dets.begin(), dets.end()}, {gts.begin(), gts.end()}};
  return AveragePrecision(std::span<const FrameDetections>(&frame, 1), iou_threshold, kind);
}

void PanopticAccumulator::Add(std::span<const SegmentLabel> pred,
                              std::span<const SegmentLabel> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("panoptic labelings cover " + std::to_string(pred.size()) +
                     " vs " + std::to_string(gt.size()) + " pixels");
  }
  using Key = std::pair<int32_t, int32_t>;  // (class, instance)
  std::map<Key, long long> pred_area;
  std::map<Key, long long> gt_area;
  std::map<std::pair<Key, Key>, long long> overlap;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool has_pred = pred[i].instance_id >= 0;
    const bool has_gt = gt[i].instance_id >= 0;
    const Key pk{pred[i].class_id, pred[i].instance_id};
    const Key gk{gt[i].class_id, gt[i].instance_id};
    if (has_pred) ++pred_area[pk];
    if (has_gt) ++gt_area[gk];
    if (has_pred && has_gt && pk.first == gk.first) ++overlap[{pk, gk}];
  }
  std::map<Key, bool> pred_matched;
  std::map<Key, bool> gt_matched;
  for (const auto& [pair, inter] : overlap) {
    const long long uni = pred_area[pair.first] + gt_area[pair.second] - inter;
    // Integer form of inter / union > 0.5.
    if (2 * inter <= uni) continue;
    Counts& c = per_class_[pair.first.first];
    ++c.tp;
    c.iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
    pred_matched[pair.first] = true;
    gt_matched[pair.second] = true;
  }
  for (const auto& [key, area] : pred_area) {
    if (!pred_matched.count(key)) ++per_class_[key.first].fp;
  }
  for (const auto& [key, area] : gt_area) {
    if (!gt_matched.count(key)) ++per_class_[key.first].fn;
  }
}

PanopticScores PanopticAccumulator::Finish(const Counts& c) {
  PanopticScores s;
  s.tp = c.tp;
  s.fp = c.fp;
  s.fn = c.fn;
  s.iou_sum = c.iou_sum;
  s.defined = c.tp + c.fp + c.fn > 0;
  if (c.tp == 0) return s;
  s.sq = c.iou_sum / static_cast<double>(c.tp);
  s.rq = static_cast<double>(c.tp) /
         (static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp) +
          0.5 * static_cast<double>(c.fn));
  s.pq = s.sq * s.rq;
  return s;
}

PanopticScores PanopticAccumulator::Scores(int class_id) const {
  const auto it = per_class_.find(class_id);
  return it == per_class_.end() ? PanopticScores{} : Finish(it->second);
}

PanopticScores PanopticAccumulator::Overall() const {
  Counts total;
  for (const auto& [cls, c] : per_class_) {
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
    total.iou_sum += c.iou_sum;
  }
  return Finish(total);
}

std::vector<int> PanopticAccumulator::classes() const {
  std::vector<int> out;
  for (const auto& [cls, c] : per_class_) out.push_back(cls);
  return out;
}

PanopticScores PanopticQuality(std::span<const SegmentLabel> pred,
                               std::span<const SegmentLabel> gt) {
  PanopticAccumulator acc;
  acc.Add(pred, gt);
  return acc.Overall();
}

}  // namespace rvkit
