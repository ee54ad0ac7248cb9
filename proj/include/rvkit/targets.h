#ifndef RVKIT_TARGETS_H_
#define RVKIT_TARGETS_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/grid.h"
#include "rvkit/maps.h"
#include "rvkit/range_image.h"

namespace rvkit {

// Box parameters relative to the viewing ray of one point. Offsets are in
// the frame rotated by the point's azimuth: x radial, y lateral, z up.
struct RegressionTarget {
  double omega_x = 0.0;
  double omega_y = 0.0;
  double omega_z = 0.0;
  double log_l = 0.0;
  double log_w = 0.0;
  double log_h = 0.0;
  double cos_phi = 1.0;
  double sin_phi = 0.0;

  double element(Element e) const;
};

struct LossConfig {
  double lambda_s = 0.1;
  double lambda_r = 1.0;
  // Center-ness above which a foreground pixel also trains the BEV branch.
  double tau = 0.5;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double balanced_alpha = 0.5;
  double balanced_gamma = 1.5;

  void Validate() const;
};

struct GaussianAssignConfig {
  double sigma = 1.0;
};

struct TargetMaps {
  Grid<int32_t> semantic;  // 0 = background
  Grid<float> centerness;
  Grid<float> p_branch;  // PBranch layout
  Grid<float> q_branch;  // QBranch layout
  Grid<int32_t> box_id;  // instance id, -1 = none
  Grid<uint8_t> p_mask;
  Grid<uint8_t> q_mask;

  int rows() const { return semantic.rows(); }
  int cols() const { return semantic.cols(); }
  static TargetMaps Empty(int rows, int cols);
  RegressionTarget target(int pixel) const;
  // Number of pixels sharing each pixel's box; 0 on background.
  Grid<int32_t> MemberCounts() const;
};

// Points closer than this to a box surface count as inside it. Covers the
// rounding of positions stored as 32-bit floats.
inline constexpr double kMembershipMargin = 1e-4;

// Distance from `p` to `c` with the horizontal part scaled by the cosine
// of p's azimuth. Throws DegenerateInputError for p on the z-axis.
double ProjectedDistance(const Point3& p, const Point3& c);

// Perspective centric center-ness of each member of `box`. The member with
// the smallest normalized projected distance scores exactly 1.
std::vector<double> CenternessTargets(const Box3D& box,
                                      std::span<const Point3> members);

// Gaussian baseline on the Euclidean distance to the box center, normalized
// so the closest member scores 1.
std::vector<double> GaussianTargets(const Box3D& box,
                                    std::span<const Point3> members,
                                    const GaussianAssignConfig& cfg);

RegressionTarget EncodeRegression(const Point3& p, const Box3D& box);
// Inverse of EncodeRegression. The returned box has class_id 0 and
// instance_id -1.
Box3D DecodeBox(const Point3& p, const RegressionTarget& t);

// Assigns every valid pixel to at most one box and fills all target planes.
// A pixel inside several boxes goes to the one with the smallest projected
// distance to its center, then the smaller BEV area, then the lower id.
TargetMaps BuildTargetMaps(const RangeImage& image,
                           std::span<const Box3D> boxes,
                           const LossConfig& cfg,
                           double membership_margin = kMembershipMargin);

inline constexpr double kProbabilityClamp = 1e-7;

double FocalLoss(double pred, bool target, double alpha, double gamma);
double BalancedL1(double residual, double alpha, double gamma);

double ClassificationLoss(const PredictionMaps& pred, const TargetMaps& tgt,
                          const Grid<uint8_t>& valid, const LossConfig& cfg);
double RegressionLoss(const PredictionMaps& pred, const TargetMaps& tgt,
                      const LossConfig& cfg);

// Mean absolute regression error per element over foreground pixels, split
// into centric (center-ness target >= tau) and edge pixels.
struct RegressionErrorReport {
  enum Row : int { kAll = 0, kCentric = 1, kEdge = 2 };
  bool empty = true;
  std::array<std::array<double, kElementCount>, 3> mean_abs_error{};
  std::array<long long, 3> pixel_count{};
};

class RegressionErrorAccumulator {
 public:
  explicit RegressionErrorAccumulator(double tau) : tau_(tau) {}
  void Add(const PredictionMaps& pred, const TargetMaps& tgt);
  RegressionErrorReport Report() const;

 private:
  double tau_;
  std::array<std::array<double, kElementCount>, 3> sums_{};
  std::array<long long, 3> counts_{};
};

RegressionErrorReport RegressionErrors(const PredictionMaps& pred,
                                       const TargetMaps& tgt, double tau);

}  // namespace rvkit

#endif  // RVKIT_TARGETS_H_
