#include "rvkit/targets.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "rvkit/error.h"

namespace rvkit {
namespace {

// Range image holding the given points at consecutive pixels of one row.
RangeImage ImageOf(const std::vector<Point3>& points) {
  SensorSpec s;
  s.rows = 1;
  s.cols = static_cast<int>(points.size());
  RangeImage img = RangeImage::Empty(s);
  for (size_t i = 0; i < points.size(); ++i) {
    img.valid.at(i) = 1;
    img.x.at(i) = static_cast<float>(points[i].x);
    img.y.at(i) = static_cast<float>(points[i].y);
    img.z.at(i) = static_cast<float>(points[i].z);
    img.range.at(i) = static_cast<float>(Norm(points[i]));
  }
  return img;
}

// Independent evaluation of the normalized projected distance.
double NormalizedDistance(const Point3& p, const Box3D& b) {
  auto proj = [](const Point3& q, const Point3& c) {
    const double theta = std::atan2(q.y, q.x);
    const double ct = std::cos(theta);
    const double dx = q.x - c.x, dy = q.y - c.y, dz = q.z - c.z;
    return std::sqrt(dx * dx * ct * ct + dy * dy * ct * ct + dz * dz);
  };
  double far = 0;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int sz : {-1, 1}) {
        const double u = sx * b.l / 2, v = sy * b.w / 2;
        const Point3 corner{b.cx + u * std::cos(b.yaw) - v * std::sin(b.yaw),
                            b.cy + u * std::sin(b.yaw) + v * std::cos(b.yaw), b.cz + sz * b.h / 2};
        far = std::max(far, proj(corner, b.center()));
      }
    }
  }
  return std::min(1.0, proj(p, b.center()) / far);
}

Point3 SampleInBox(const Box3D& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double a = u(rng) * b.l, c = u(rng) * b.w;
  return {b.cx + a * std::cos(b.yaw) - c * std::sin(b.yaw),
          b.cy + a * std::sin(b.yaw) + c * std::cos(b.yaw), b.cz + u(rng) * b.h};
}

Box3D RandomBox(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> radius(5, 50);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> ext(0.4, 6);
  const double r = radius(rng), a = ang(rng);
  return {r * std::cos(a), r * std::sin(a), ext(rng) - 3, ext(rng), ext(rng), ext(rng), ang(rng), 1, 0};
}

TEST(ProjectedDistanceTest, HandValues) {
  EXPECT_EQ(ProjectedDistance({3, 4, 2}, {3, 4, 2}), 0.0);
  EXPECT_NEAR(ProjectedDistance({0, 5, 0}, {0, 5, 2}), 2.0, 1e-12);
  EXPECT_NEAR(ProjectedDistance({3, 4, 2}, {6, 8, 4}), std::sqrt(13.0), 1e-12);
  EXPECT_NEAR(ProjectedDistance({3, 4, 2}, {6, 8, 4}), 3.60555, 1e-5);
  EXPECT_THROW(ProjectedDistance({0, 0, 1}, {1, 1, 1}), DegenerateInputError);
}

TEST(CenternessTest, ClosedForm) {
  const Box3D b{20, 0, 0, 4, 2, 2, 0};
  const std::vector<Point3> one = {{19.2, 0.7, -0.9}};
  EXPECT_EQ(CenternessTargets(b, one), std::vector<double>{1.0});

  // Two members on the z line through the center: d-hat = |dz| / max corner.
  double far = 0;
  for (const Point3& c : BoxCorners(b)) far = std::max(far, ProjectedDistance(c, b.center()));
  const std::vector<Point3> two = {{20, 0, 0.2 * far}, {20, 0, 0.8 * far}};
  const std::vector<double> s = CenternessTargets(b, two);
  EXPECT_NEAR(s[0], 1.0, 1e-12);
  EXPECT_NEAR(s[1], 0.25, 1e-12);

  const std::vector<Point3> center_first = {{20, 0, 0}, {21, 0.5, 0.5}};
  EXPECT_EQ(CenternessTargets(b, center_first)[0], 1.0);
  EXPECT_THROW(CenternessTargets(b, {}), ConstraintError);
}

TEST(CenternessTest, RangeAndMaximumOnRandomBoxes) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Box3D b = RandomBox(rng);
    std::vector<Point3> members;
    const int count = 1 + static_cast<int>(rng() % 60);
    for (int k = 0; k < count; ++k) members.push_back(SampleInBox(b, rng));
    const std::vector<double> s = CenternessTargets(b, members);
    std::vector<double> dhat;
    for (const Point3& p : members) dhat.push_back(NormalizedDistance(p, b));
    const double dmin = *std::min_element(dhat.begin(), dhat.end());
    for (size_t k = 0; k < s.size(); ++k) {
      EXPECT_GE(s[k], 0.0);
      EXPECT_LE(s[k], 1.0);
      const double expected = dmin < 1 ? (1 - dhat[k]) / (1 - dmin) : 1.0;
      EXPECT_NEAR(s[k], expected, 1e-9);
    }
    const size_t argmin = std::min_element(dhat.begin(), dhat.end()) - dhat.begin();
    EXPECT_EQ(s[argmin], 1.0);
    EXPECT_EQ(*std::max_element(s.begin(), s.end()), 1.0);
  }
}

TEST(CenternessTest, InvariantUnderHalfTurnAndMirror) {
  // cos^2 of the azimuth is unchanged by a half turn and by y -> -y.
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const Box3D b = RandomBox(rng);
    std::vector<Point3> members;
    for (int k = 0; k < 20; ++k) members.push_back(SampleInBox(b, rng));
    const std::vector<double> base = CenternessTargets(b, members);

    std::vector<Point3> turned;
    for (const Point3& p : members) turned.push_back(RotateZ(p, kPi));
    const std::vector<double> half = CenternessTargets(RotateZ(b, kPi), turned);

    Box3D mb = b;
    mb.cy = -b.cy;
    mb.yaw = -b.yaw;
    std::vector<Point3> mirrored;
    for (const Point3& p : members) mirrored.push_back({p.x, -p.y, p.z});
    const std::vector<double> mirror = CenternessTargets(mb, mirrored);
    for (size_t k = 0; k < base.size(); ++k) {
      EXPECT_NEAR(base[k], half[k], 1e-9);
      EXPECT_NEAR(base[k], mirror[k], 1e-9);
    }
  }
}

TEST(GaussianTest, ClosedForm) {
  const Box3D b{10, 0, 0, 4, 4, 4, 0};
  GaussianAssignConfig cfg;
  const std::vector<Point3> pts = {{10, 0, 0}, {11, 0, 0}};
  const std::vector<double> s = GaussianTargets(b, pts, cfg);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_NEAR(s[1], std::exp(-0.5), 1e-12);
  EXPECT_NEAR(s[1], 0.60653, 1e-5);
  const std::vector<Point3> ring = {{11, 0, 0}, {9, 0, 0}, {10, 1, 0}, {10, 0, -1}};
  for (double v : GaussianTargets(b, ring, cfg)) EXPECT_NEAR(v, 1.0, 1e-12);
  cfg.sigma = 0;
  EXPECT_THROW(GaussianTargets(b, pts, cfg), ConfigError);
}

TEST(GaussianTest, RangeAndMaximum) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 300; ++i) {
    const Box3D b = RandomBox(rng);
    std::vector<Point3> members;
    for (int k = 0; k < 30; ++k) members.push_back(SampleInBox(b, rng));
    const std::vector<double> s = GaussianTargets(b, members, {});
    for (double v : s) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(*std::max_element(s.begin(), s.end()), 1.0);
  }
}

TEST(EncodeTest, HandExample) {
  const Box3D b{12, 1, 0.5, 4, 2, 1.5, 0.3};
  const RegressionTarget t = EncodeRegression({10, 0, 0}, b);
  EXPECT_NEAR(t.omega_x, 2, 1e-12);
  EXPECT_NEAR(t.omega_y, 1, 1e-12);
  EXPECT_NEAR(t.omega_z, 0.5, 1e-12);
  EXPECT_NEAR(t.log_l, 1.38629, 1e-5);
  EXPECT_NEAR(t.log_w, 0.69315, 1e-5);
  EXPECT_NEAR(t.log_h, 0.40546, 1e-5);
  EXPECT_NEAR(t.cos_phi, 0.95534, 1e-5);
  EXPECT_NEAR(t.sin_phi, 0.29552, 1e-5);
  const Box3D back = DecodeBox({10, 0, 0}, t);
  EXPECT_NEAR(back.cx, 12, 1e-12);
  EXPECT_NEAR(back.cy, 1, 1e-12);
  EXPECT_NEAR(back.cz, 0.5, 1e-12);
  EXPECT_NEAR(back.l, 4, 1e-12);
  EXPECT_NEAR(back.yaw, 0.3, 1e-12);
}

TEST(EncodeTest, CenterWithYawAlongRay) {
  const double alpha = 0.7;
  const Point3 p{10 * std::cos(alpha), 10 * std::sin(alpha), 1};
  const RegressionTarget t = EncodeRegression(p, {p.x, p.y, p.z, 2, 2, 2, alpha});
  EXPECT_NEAR(t.omega_x, 0, 1e-12);
  EXPECT_NEAR(t.omega_y, 0, 1e-12);
  EXPECT_NEAR(t.omega_z, 0, 1e-12);
  EXPECT_NEAR(t.cos_phi, 1, 1e-12);
  EXPECT_NEAR(t.sin_phi, 0, 1e-12);
}

TEST(EncodeTest, ZeroTargetDecodesToUnitBox) {
  const double alpha = -2.1;
  const Point3 p{5 * std::cos(alpha), 5 * std::sin(alpha), -1};
  RegressionTarget t;
  const Box3D b = DecodeBox(p, t);
  EXPECT_NEAR(b.cx, p.x, 1e-12);
  EXPECT_NEAR(b.cy, p.y, 1e-12);
  EXPECT_NEAR(b.cz, p.z, 1e-12);
  EXPECT_DOUBLE_EQ(b.l, 1);
  EXPECT_DOUBLE_EQ(b.w, 1);
  EXPECT_DOUBLE_EQ(b.h, 1);
  EXPECT_NEAR(b.yaw, alpha, 1e-12);
}

TEST(EncodeTest, RandomRoundTrip) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-60, 60);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const Box3D b = RandomBox(rng);
    const Point3 p{u(rng), u(rng), u(rng) / 10};
    const RegressionTarget t = EncodeRegression(p, b);
    EXPECT_NEAR(t.cos_phi * t.cos_phi + t.sin_phi * t.sin_phi, 1, 1e-6);
    const Box3D d = DecodeBox(p, t);
    worst = std::max({worst, std::abs(d.cx - b.cx), std::abs(d.cy - b.cy), std::abs(d.cz - b.cz),
                      std::abs(d.l - b.l), std::abs(d.w - b.w), std::abs(d.h - b.h),
                      std::abs(std::remainder(d.yaw - b.yaw, 2 * kPi))});
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(EncodeTest, TargetsInvariantUnderGlobalRotation) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 2000; ++i) {
    const Box3D b = RandomBox(rng);
    const Point3 p = SampleInBox(b, rng);
    const double a = ang(rng);
    const RegressionTarget t0 = EncodeRegression(p, b);
    const RegressionTarget t1 = EncodeRegression(RotateZ(p, a), RotateZ(b, a));
    for (int e = 0; e < kElementCount; ++e) {
      EXPECT_NEAR(t0.element(Element(e)), t1.element(Element(e)), 1e-9);
    }
  }
}

TEST(BuildTargetsTest, NoBoxes) {
  const RangeImage img = ImageOf({{10, 0, 0}, {0, 10, 0}});
  const TargetMaps t = BuildTargetMaps(img, {}, {});
  for (int32_t v : t.semantic.values()) EXPECT_EQ(v, 0);
  for (float v : t.centerness.values()) EXPECT_EQ(v, 0.0f);
  for (uint8_t v : t.p_mask.values()) EXPECT_EQ(v, 0);
  for (uint8_t v : t.q_mask.values()) EXPECT_EQ(v, 0);
  for (int32_t v : t.box_id.values()) EXPECT_EQ(v, -1);
}

TEST(BuildTargetsTest, OneBoxMembers) {
  const Box3D b{20, 0, 0, 4, 2, 2, 0.2, 1, 7};
  std::mt19937_64 rng(5);
  std::vector<Point3> pts;
  for (int k = 0; k < 12; ++k) pts.push_back(SampleInBox(b, rng));
  pts.push_back({40, 0, 0});
  const RangeImage img = ImageOf(pts);
  const TargetMaps t = BuildTargetMaps(img, {&b, 1}, {});
  int members = 0;
  float best = 0;
  for (int pix = 0; pix < t.semantic.pixel_count(); ++pix) {
    if (t.box_id.at(pix) == 7) {
      ++members;
      EXPECT_EQ(t.semantic.at(pix), 1);
      best = std::max(best, t.centerness.at(pix));
      EXPECT_TRUE(t.p_mask.at(pix) || !t.q_mask.at(pix));
      EXPECT_EQ(t.q_mask.at(pix) != 0, t.centerness.at(pix) > 0.5f);
    } else {
      EXPECT_EQ(t.box_id.at(pix), -1);
      EXPECT_EQ(t.centerness.at(pix), 0.0f);
    }
  }
  EXPECT_EQ(members, 12);
  EXPECT_EQ(best, 1.0f);
  EXPECT_EQ(t.MemberCounts().at(0), 12);
}

TEST(BuildTargetsTest, OverlapGoesToNearestCenter) {
  const Box3D big{20, 0, 0, 6, 6, 2, 0, 1, 0};
  const Box3D small{21, 0, 0, 2, 2, 2, 0, 2, 1};
  const RangeImage img = ImageOf({{21.2, 0.1, 0}, {18.1, 0, 0}});
  const Box3D boxes[] = {big, small};
  const TargetMaps t = BuildTargetMaps(img, boxes, {});
  EXPECT_EQ(t.box_id.at(0), 1);
  EXPECT_EQ(t.box_id.at(1), 0);
  // Same center: smaller footprint wins.
  const Box3D twin{20, 0, 0, 2, 2, 2, 0, 2, 5};
  const Box3D pair[] = {big, twin};
  const RangeImage at_center = ImageOf({{20.2, 0, 0}});
  EXPECT_EQ(BuildTargetMaps(at_center, pair, {}).box_id.at(0), 5);
}

TEST(BuildTargetsTest, RejectsBadIds) {
  const RangeImage img = ImageOf({{10, 0, 0}});
  const Box3D a{10, 0, 0, 1, 1, 1, 0, 1, 3};
  const Box3D dup[] = {a, a};
  EXPECT_THROW(BuildTargetMaps(img, dup, {}), ConstraintError);
  Box3D neg = a;
  neg.instance_id = -1;
  EXPECT_THROW(BuildTargetMaps(img, {&neg, 1}, {}), ConstraintError);
}

TEST(FocalLossTest, HandValues) {
  EXPECT_NEAR(FocalLoss(1.0, true, 0.25, 2), 0.0, 1e-12);
  EXPECT_NEAR(FocalLoss(0.5, true, 0.25, 2), 0.25 * 0.25 * std::log(2.0), 1e-12);
  EXPECT_NEAR(FocalLoss(0.5, true, 0.25, 2), 0.04332, 1e-5);
  EXPECT_NEAR(FocalLoss(0.5, false, 0.25, 2), 0.12996, 1e-5);
  EXPECT_TRUE(std::isfinite(FocalLoss(0.0, true, 0.25, 2)));
  EXPECT_NEAR(FocalLoss(0.0, true, 0.25, 2), -0.25 * std::pow(1 - 1e-7, 2) * std::log(1e-7), 1e-9);
}

TEST(BalancedL1Test, Shape) {
  EXPECT_EQ(BalancedL1(0.0, 0.5, 1.5), 0.0);
  for (double x : {0.1, 0.5, 0.99, 1.0, 3.0}) {
    EXPECT_DOUBLE_EQ(BalancedL1(x, 0.5, 1.5), BalancedL1(-x, 0.5, 1.5));
    EXPECT_GE(BalancedL1(x, 0.5, 1.5), 0.0);
  }
  const double below = BalancedL1(std::nextafter(1.0, 0.0), 0.5, 1.5);
  EXPECT_NEAR(below, BalancedL1(1.0, 0.5, 1.5), 1e-9);
  // Slope matches too: derivative of the inner branch at 1 is gamma.
  const double h = 1e-6;
  const double slope = (BalancedL1(1 - h, 0.5, 1.5) - BalancedL1(1 - 2 * h, 0.5, 1.5)) / h;
  EXPECT_NEAR(slope, 1.5, 1e-4);
}

// Single foreground pixel of a 1x1 image, two classes.
struct Toy {
  TargetMaps tgt = TargetMaps::Empty(1, 1);
  PredictionMaps pred = PredictionMaps::Zeros(1, 1, 2);
  Grid<uint8_t> valid{1, 1, 1, 1};
  Toy() {
    tgt.semantic.at(0) = 2;
    tgt.box_id.at(0) = 0;
    tgt.centerness.at(0) = 0.75f;
    tgt.p_mask.at(0) = 1;
    tgt.q_mask.at(0) = 1;
    pred.semantic_scores.at(0, 0) = 0.2f;
    pred.semantic_scores.at(0, 1) = 0.6f;
    pred.centerness.at(0) = 0.5f;
  }
};

TEST(ClassificationLossTest, SinglePixelHandValue) {
  Toy toy;
  const double p1 = double(0.2f), p2 = double(0.6f);
  // Class 1 is negative, class 2 positive; center-ness residual -0.25.
  const double focal = -0.75 * p1 * p1 * std::log(1 - p1) - 0.25 * (1 - p2) * (1 - p2) * std::log(p2);
  const double b = std::exp(3.0) - 1;
  const double bl1 = 0.5 / b * (b * 0.25 + 1) * std::log(b * 0.25 + 1) - 0.5 * 0.25;
  EXPECT_NEAR(ClassificationLoss(toy.pred, toy.tgt, toy.valid, {}), focal + 0.1 * bl1, 1e-9);
}

TEST(ClassificationLossTest, BackgroundIgnoresCenterness) {
  Toy toy;
  toy.tgt = TargetMaps::Empty(1, 1);
  const double with = ClassificationLoss(toy.pred, toy.tgt, toy.valid, {});
  toy.pred.centerness.at(0) = 0.9f;
  EXPECT_EQ(ClassificationLoss(toy.pred, toy.tgt, toy.valid, {}), with);
  toy.valid.at(0) = 0;
  EXPECT_EQ(ClassificationLoss(toy.pred, toy.tgt, toy.valid, {}), 0.0);
}

TEST(ClassificationLossTest, NearPerfectAndMonotoneInterpolation) {
  Toy toy;
  PredictionMaps perfect = toy.pred;
  perfect.semantic_scores.at(0, 0) = 0.0f;
  perfect.semantic_scores.at(0, 1) = 1.0f;
  perfect.centerness.at(0) = 0.75f;
  const double floor_loss = ClassificationLoss(perfect, toy.tgt, toy.valid, {});
  EXPECT_LE(floor_loss, 1e-7);
  PredictionMaps uniform = toy.pred;
  uniform.semantic_scores.at(0, 0) = 0.5f;
  uniform.semantic_scores.at(0, 1) = 0.5f;
  uniform.centerness.at(0) = 0.5f;
  double prev = std::numeric_limits<double>::infinity();
  for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    PredictionMaps mix = uniform;
    for (int k = 0; k < 2; ++k) {
      mix.semantic_scores.at(0, k) = static_cast<float>(
          (1 - s) * uniform.semantic_scores.at(0, k) + s * perfect.semantic_scores.at(0, k));
    }
    mix.centerness.at(0) = static_cast<float>((1 - s) * 0.5 + s * 0.75);
    const double loss = ClassificationLoss(mix, toy.tgt, toy.valid, {});
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(RegressionLossTest, MaskSemantics) {
  Toy toy;
  for (int k = 0; k < kPBranchDepth; ++k) toy.pred.p_branch.at(0, k) = toy.tgt.p_branch.at(0, k);
  for (int k = 0; k < kQBranchDepth; ++k) toy.pred.q_branch.at(0, k) = toy.tgt.q_branch.at(0, k);
  EXPECT_EQ(RegressionLoss(toy.pred, toy.tgt, {}), 0.0);

  toy.pred.q_branch.at(0, kOmegaX) += 0.5f;
  const double b = std::exp(3.0) - 1;
  const double bl1 = 0.5 / b * (b * 0.5 + 1) * std::log(b * 0.5 + 1) - 0.25;
  EXPECT_NEAR(RegressionLoss(toy.pred, toy.tgt, {}), bl1, 1e-9);

  toy.tgt.q_mask.at(0) = 0;  // an edge pixel: only the P-branch trains
  EXPECT_EQ(RegressionLoss(toy.pred, toy.tgt, {}), 0.0);
  toy.pred.p_branch.at(0, kOmegaY) += 2.0f;
  EXPECT_NEAR(RegressionLoss(toy.pred, toy.tgt, {}), 1.5 * 2 + 1.5 / b - 0.5, 1e-9);
}

TEST(RegressionErrorTest, BiasAndEmpty) {
  Toy toy;
  PredictionMaps pred = toy.pred;
  EXPECT_TRUE(RegressionErrors(pred, TargetMaps::Empty(1, 1), 0.5).empty);
  pred.q_branch.at(0, kOmegaX) = toy.tgt.q_branch.at(0, kOmegaX) + 0.1f;
  const RegressionErrorReport r = RegressionErrors(pred, toy.tgt, 0.5);
  EXPECT_FALSE(r.empty);
  EXPECT_NEAR(r.mean_abs_error[RegressionErrorReport::kAll][0], 0.1, 1e-6);
  EXPECT_NEAR(r.mean_abs_error[RegressionErrorReport::kCentric][0], 0.1, 1e-6);
  EXPECT_EQ(r.pixel_count[RegressionErrorReport::kEdge], 0);
}

TEST(RegressionErrorTest, HalfNormalMean) {
  const int n = 10000;
  TargetMaps tgt = TargetMaps::Empty(100, 100);
  PredictionMaps pred = PredictionMaps::Zeros(100, 100, 1);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0, 0.05);
  for (int pix = 0; pix < n; ++pix) {
    tgt.box_id.at(pix) = pix % 50;
    tgt.semantic.at(pix) = 1;
    tgt.centerness.at(pix) = (pix % 2) ? 0.9f : 0.2f;
    pred.p_branch.at(pix, kOmegaY) = static_cast<float>(g(rng));
  }
  const RegressionErrorReport r = RegressionErrors(pred, tgt, 0.5);
  EXPECT_NEAR(r.mean_abs_error[RegressionErrorReport::kAll][1], 0.05 * std::sqrt(2 / kPi), 0.002);
  EXPECT_EQ(r.pixel_count[RegressionErrorReport::kCentric], n / 2);
}

}  // namespace
}  // namespace rvkit
