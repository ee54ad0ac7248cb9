#include "rvkit/synth.h"

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"
#include "rvkit/commands.h"
#include "rvkit/error.h"

namespace rvkit {
namespace {

Scene SingleBoxScene(const std::vector<Box3D>& boxes) {
  Scene scene;
  scene.sensor.rows = 32;
  scene.sensor.cols = 512;
  scene.ground_z = -1.8;
  scene.boxes = boxes;
  return scene;
}

TEST(GenerateTest, Deterministic) {
  const SceneSpec spec;
  const Scene a = GenerateScene(spec, SensorSpec());
  const Scene b = GenerateScene(spec, SensorSpec());
  ASSERT_EQ(a.boxes.size(), b.boxes.size());
  for (size_t i = 0; i < a.boxes.size(); ++i) {
    EXPECT_EQ(a.boxes[i].cx, b.boxes[i].cx);
    EXPECT_EQ(a.boxes[i].yaw, b.boxes[i].yaw);
    EXPECT_EQ(a.boxes[i].class_id, b.boxes[i].class_id);
  }
  SceneSpec other = spec;
  other.seed = 2;
  EXPECT_NE(GenerateScene(other, SensorSpec()).boxes[0].cx, a.boxes[0].cx);
}

TEST(GenerateTest, RespectsConstraints) {
  SceneSpec spec;
  int violations = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    spec.seed = seed;
    const Scene s = GenerateScene(spec, SensorSpec());
    EXPECT_GE(static_cast<int>(s.boxes.size()), spec.box_count_min);
    EXPECT_LE(static_cast<int>(s.boxes.size()), spec.box_count_max);
    for (size_t i = 0; i < s.boxes.size(); ++i) {
      const Box3D& b = s.boxes[i];
      EXPECT_EQ(b.instance_id, static_cast<int>(i));
      EXPECT_GE(b.yaw, -kPi);
      EXPECT_LT(b.yaw, kPi);
      EXPECT_NEAR(b.cz - b.h / 2, spec.ground_z + spec.ground_clearance, 1e-12);
      const double r = std::hypot(b.cx, b.cy);
      EXPECT_GE(r, spec.radius.min);
      EXPECT_LE(r, spec.radius.max);
      for (size_t j = 0; j < i; ++j) violations += BevGap(b, s.boxes[j]) < spec.min_gap;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(GenerateTest, LargeGap) {
  SceneSpec spec;
  spec.min_gap = 5;
  spec.box_count_min = spec.box_count_max = 6;
  const Scene s = GenerateScene(spec, SensorSpec());
  for (size_t i = 0; i < s.boxes.size(); ++i) {
    for (size_t j = 0; j < i; ++j) EXPECT_GE(BevGap(s.boxes[i], s.boxes[j]), 5.0);
  }
}

TEST(GenerateTest, PlacementFailure) {
  SceneSpec spec;
  spec.radius = {8, 9};
  spec.min_gap = 30;
  spec.box_count_min = spec.box_count_max = 3;
  spec.placement_retries = 50;
  EXPECT_THROW(GenerateScene(spec, SensorSpec()), ConstraintError);
}

TEST(GenerateTest, InvalidSpecs) {
  SceneSpec spec;
  spec.box_count_min = 5;
  spec.box_count_max = 4;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = SceneSpec();
  spec.min_gap = -1;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec = SceneSpec();
  spec.classes[0].length = {3, 2};
  EXPECT_THROW(spec.Validate(), ConfigError);
  EXPECT_EQ(SceneSpec().num_classes(), 2);
}

TEST(RaycastTest, RaysAboveGroundMiss) {
  Scene scene = SingleBoxScene({});
  scene.sensor.inclination_min = 0.02;
  scene.sensor.inclination_max = 0.2;
  EXPECT_TRUE(RaycastScene(scene).cloud.empty());
}

TEST(RaycastTest, BoxAtAzimuthZero) {
  const Box3D b{20, 0, -0.75, 4, 2, 2, 0, 1, 0};
  const RaycastResult rc = RaycastScene(SingleBoxScene({b}));
  int hits = 0;
  for (size_t i = 0; i < rc.cloud.size(); ++i) {
    const Point3& p = rc.cloud[i].position;
    if (rc.instance_ids[i] != 0) {
      EXPECT_EQ(rc.instance_ids[i], -1);
      EXPECT_NEAR(p.z, -1.8, 1e-9);
      EXPECT_FALSE(PointInBox(p, b, 1e-6));
      continue;
    }
    ++hits;
    EXPECT_TRUE(PointInBox(p, b, 1e-6));
    const double r = Norm(p);
    EXPECT_GE(r, 18 - 1e-9);
    EXPECT_LE(r, std::sqrt(22.0 * 22.0 + 1.0 + 1.8 * 1.8));
  }
  EXPECT_GT(hits, 10);
}

TEST(RaycastTest, NearBoxOccludesFarBox) {
  const Box3D near_box{10, 0, -0.75, 1, 1, 2, 0, 2, 0};
  const Box3D far_box{25, 0, -0.25, 4, 6, 3, 0, 1, 1};
  const Scene scene = SingleBoxScene({far_box, near_box});
  const RaycastResult rc = RaycastScene(scene);
  const Scene alone = SingleBoxScene({far_box});
  const RaycastResult far_only = RaycastScene(alone);
  // Every far-box ray that also meets the near box returns the near box.
  int shared = 0;
  for (size_t i = 0; i < rc.cloud.size(); ++i) {
    if (rc.instance_ids[i] != 0) continue;
    const Point3 dir = (1.0 / Norm(rc.cloud[i].position)) * rc.cloud[i].position;
    for (size_t j = 0; j < far_only.cloud.size(); ++j) {
      if (far_only.instance_ids[j] != 1) continue;
      const Point3 d2 = (1.0 / Norm(far_only.cloud[j].position)) * far_only.cloud[j].position;
      if (Distance(dir, d2) < 1e-9) ++shared;
    }
  }
  EXPECT_GT(shared, 0);
  for (size_t i = 0; i < rc.cloud.size(); ++i) {
    if (rc.instance_ids[i] == 1) EXPECT_FALSE(PointInBox(rc.cloud[i].position, near_box, 1e-6));
  }
}

TEST(RaycastTest, HitsLieOnPixelRaysAndAgreeWithMembership) {
  SceneSpec spec;
  for (uint64_t seed : {1, 2, 3}) {
    spec.seed = seed;
    const Scene scene = GenerateScene(spec, SensorSpec());
    const RaycastResult rc = RaycastScene(scene);
    ASSERT_EQ(rc.cloud.size(), rc.instance_ids.size());
    const RangeImageBuild b = BuildRangeImage(rc.cloud, scene.sensor);
    EXPECT_EQ(b.collisions, 0);
    EXPECT_EQ(b.dropped, 0);
    EXPECT_EQ(b.image.valid_count(), static_cast<int>(rc.cloud.size()));
    for (size_t i = 0; i < rc.cloud.size(); ++i) {
      const Point3& p = rc.cloud[i].position;
      EXPECT_LE(Norm(p), spec.max_range);
      int inside = -1;
      for (const Box3D& box : scene.boxes) {
        if (PointInBox(p, box, 1e-6)) inside = box.instance_id;
      }
      EXPECT_EQ(inside, rc.instance_ids[i]);
    }
  }
}

TEST(RaycastTest, DeterministicNoise) {
  SceneSpec spec;
  spec.noise_sigma = 0.02;
  const Scene scene = GenerateScene(spec, SensorSpec());
  const RaycastResult a = RaycastScene(scene);
  const RaycastResult b = RaycastScene(scene);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (size_t i = 0; i < a.cloud.size(); ++i) EXPECT_EQ(a.cloud[i].position, b.cloud[i].position);
  spec.noise_sigma = 0;
  const RaycastResult clean = RaycastScene(GenerateScene(spec, SensorSpec()));
  ASSERT_EQ(clean.cloud.size(), a.cloud.size());
  double sum = 0;
  for (size_t i = 0; i < a.cloud.size(); ++i) {
    sum += std::pow(Norm(a.cloud[i].position) - Norm(clean.cloud[i].position), 2);
  }
  EXPECT_NEAR(std::sqrt(sum / a.cloud.size()), 0.02, 0.002);
}

TEST(TargetsFromSimTest, BoxIdEqualsHitLabels) {
  const RunConfig cfg;
  for (int scene = 0; scene < 5; ++scene) {
    const SceneTargets st = BuildScene(cfg, scene);
    EXPECT_EQ(st.targets.box_id, st.hit_instance);
    // Every box with members has a pixel at center-ness 1.
    for (const Box3D& b : VisibleBoxes(st.boxes, st.targets)) {
      float best = 0;
      for (int pix = 0; pix < st.targets.box_id.pixel_count(); ++pix) {
        if (st.targets.box_id.at(pix) == b.instance_id) best = std::max(best, st.targets.centerness.at(pix));
      }
      EXPECT_EQ(best, 1.0f);
    }
    for (int pix = 0; pix < st.targets.box_id.pixel_count(); ++pix) {
      if (st.targets.centerness.at(pix) > 0) EXPECT_GE(st.targets.box_id.at(pix), 0);
      EXPECT_LE(st.targets.q_mask.at(pix), st.targets.p_mask.at(pix));
    }
  }
}

TEST(OracleTest, ExactWithoutNoise) {
  const RunConfig cfg;
  const SceneTargets st = BuildScene(cfg, 0);
  const PredictionMaps pred = OraclePredictions(st.targets, 2, {}, 5);
  EXPECT_EQ(pred.centerness, st.targets.centerness);
  EXPECT_EQ(pred.p_branch, st.targets.p_branch);
  EXPECT_EQ(pred.q_branch, st.targets.q_branch);
  for (int pix = 0; pix < st.targets.semantic.pixel_count(); ++pix) {
    for (int k = 1; k <= 2; ++k) {
      EXPECT_EQ(pred.semantic_scores.at(pix, k - 1),
                st.targets.semantic.at(pix) == k ? kOracleOnScore : kOracleOffScore);
    }
  }
  TargetMaps two = TargetMaps::Empty(2, 2);
  two.semantic.at(3) = 2;
  EXPECT_THROW(OraclePredictions(two, 1, {}, 5), ShapeError);
}

TEST(OracleTest, NoiseIsSeededAndScaled) {
  const RunConfig cfg;
  const SceneTargets st = BuildScene(cfg, 0);
  OracleNoise noise;
  noise.offset = 0.05;
  const PredictionMaps a = OraclePredictions(st.targets, 2, noise, 5);
  const PredictionMaps b = OraclePredictions(st.targets, 2, noise, 5);
  const PredictionMaps c = OraclePredictions(st.targets, 2, noise, 6);
  EXPECT_EQ(a.p_branch, b.p_branch);
  EXPECT_NE(a.p_branch, c.p_branch);
  EXPECT_EQ(a.centerness, st.targets.centerness);
  double sum = 0;
  int n = 0;
  for (int pix = 0; pix < st.targets.semantic.pixel_count(); ++pix) {
    const double e = a.p_branch.at(pix, kOmegaY) - st.targets.p_branch.at(pix, kOmegaY);
    sum += e * e;
    ++n;
    EXPECT_EQ(a.p_branch.at(pix, kLogH), st.targets.p_branch.at(pix, kLogH));
  }
  EXPECT_NEAR(std::sqrt(sum / n), 0.05, 0.002);
}

}  // namespace
}  // namespace rvkit
