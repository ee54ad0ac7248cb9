#ifndef RVKIT_SYNTH_H_
#define RVKIT_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/maps.h"
#include "rvkit/range_image.h"
#include "rvkit/targets.h"

namespace rvkit {

struct Interval {
  double min = 0.0;
  double max = 0.0;
};

struct ClassSpec {
  int class_id = 1;
  std::string name;
  double weight = 1.0;
  Interval length;
  Interval width;
  Interval height;
};

std::vector<ClassSpec> DefaultClasses();

struct SceneSpec {
  uint64_t seed = 1;
  int box_count_min = 4;
  int box_count_max = 10;
  std::vector<ClassSpec> classes = DefaultClasses();
  Interval radius = {8.0, 45.0};
  // Minimum distance between any two BEV footprints.
  double min_gap = 1.0;
  double ground_z = -1.8;
  // Height of every box bottom above the ground plane.
  double ground_clearance = 0.05;
  // Standard deviation of additive range noise.
  double noise_sigma = 0.0;
  // Returns beyond this range are discarded.
  double max_range = 120.0;
  int placement_retries = 1000;

  void Validate() const;
  int num_classes() const;
};

struct Scene {
  std::vector<Box3D> boxes;
  SensorSpec sensor;
  double ground_z = -1.8;
  double noise_sigma = 0.0;
  double max_range = 120.0;
  uint64_t seed = 1;
};

// Deterministic for a fixed (spec, sensor). Boxes are placed by rejection
// sampling; throws ConstraintError when a box cannot be placed within the
// retry budget.
Scene GenerateScene(const SceneSpec& spec, const SensorSpec& sensor);

struct RaycastResult {
  PointCloud cloud;  // pixel order, one point per hit ray
  std::vector<int32_t> instance_ids;  // -1 for ground
};

// Casts one ray per pixel against the ground plane and every box; the
// nearest hit wins.
RaycastResult RaycastScene(const Scene& scene);

struct OracleNoise {
  double centerness = 0.0;
  double offset = 0.0;      // omega_x, omega_y, omega_z
  double log_extent = 0.0;  // log_l, log_w, log_h
  double heading = 0.0;     // cos_phi, sin_phi
};

inline constexpr float kOracleOnScore = 0.95f;
inline constexpr float kOracleOffScore = 0.05f;

// Prediction maps synthesized from targets: fixed semantic scores and
// targets plus Gaussian noise. Each pixel draws from its own RNG stream.
PredictionMaps OraclePredictions(const TargetMaps& tgt, int num_classes,
                                 const OracleNoise& noise, uint64_t seed);

}  // namespace rvkit

#endif  // RVKIT_SYNTH_H_
