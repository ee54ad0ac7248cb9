#include "rvkit/synth.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "rvkit/error.h"

namespace rvkit {
namespace {

constexpr double kNearClip = 1e-6;

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, stream index).
std::mt19937_64 StreamRng(uint64_t seed, uint64_t stream) {
  return std::mt19937_64(SplitMix64(SplitMix64(seed) ^ SplitMix64(stream + 1)));
}

double Uniform(std::mt19937_64& rng, const Interval& range) {
  return std::uniform_real_distribution<double>(range.min, range.max)(rng);
}

// Entry distance of a ray from the origin into a box, or +inf on a miss.
double RayBoxEntry(const Point3& dir, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Point3 origin = ToBoxFrame({0.0, 0.0, 0.0}, box);
  const Point3 d = {c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z};
  const double o[3] = {origin.x, origin.y, origin.z};
  const double v[3] = {d.x, d.y, d.z};
  const double half[3] = {0.5 * box.l, 0.5 * box.w, 0.5 * box.h};
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(v[axis]) < 1e-15) {
      if (std::abs(o[axis]) > half[axis]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t1 = (-half[axis] - o[axis]) / v[axis];
    double t2 = (half[axis] - o[axis]) / v[axis];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_near <= kNearClip) {
    return std::numeric_limits<double>::infinity();
  }
  return t_near;
}

}  // namespace

std::vector<ClassSpec> DefaultClasses() {
  return {
      {1, "vehicle", 0.7, {3.8, 5.2}, {1.7, 2.1}, {1.4, 1.9}},
      {2, "pedestrian", 0.3, {0.5, 0.9}, {0.5, 0.9}, {1.5, 1.9}},
  };
}

void SceneSpec::Validate() const {
  if (box_count_min < 0 || box_count_max < box_count_min) {
    throw ConfigError("scene box count range is invalid");
  }
  if (classes.empty() && box_count_max > 0) {
    throw ConfigError("scene needs at least one class to place boxes");
  }
  std::set<int> ids;
  for (const ClassSpec& c : classes) {
    if (c.class_id < 1) throw ConfigError("class ids must be >= 1");
    if (!ids.insert(c.class_id).second) {
      throw ConfigError("duplicate class id " + std::to_string(c.class_id));
    }
    if (!(c.weight > 0.0)) throw ConfigError("class weight must be positive");
    for (const Interval* r : {&c.length, &c.width, &c.height}) {
      if (!(r->min > 0.0) || r->max < r->min) {
        throw ConfigError("class '" + c.name + "' has an invalid extent range");
      }
    }
  }
  if (!(radius.min > 0.0) || radius.max < radius.min) {
    throw ConfigError("scene placement radius range is invalid");
  }
  if (min_gap < 0.0) throw ConfigError("scene min_gap must be >= 0");
  if (!(ground_z < 0.0)) throw ConfigError("scene ground_z must be below the sensor");
  if (ground_clearance < 0.0) throw ConfigError("scene ground_clearance must be >= 0");
  if (noise_sigma < 0.0) throw ConfigError("scene noise_sigma must be >= 0");
  if (!(max_range > 0.0)) throw ConfigError("scene max_range must be positive");
  if (placement_retries < 1) throw ConfigError("scene placement_retries must be >= 1");
}

int SceneSpec::num_classes() const {
  int n = 0;
  for (const ClassSpec& c : classes) n = std::max(n, c.class_id);
  return n;
}

Scene GenerateScene(const SceneSpec& spec, const SensorSpec& sensor) {
  spec.Validate();
  sensor.Validate();
  Scene scene;
  scene.sensor = sensor;
  scene.ground_z = spec.ground_z;
  scene.noise_sigma = spec.noise_sigma;
  scene.max_range = spec.max_range;
  scene.seed = spec.seed;

  std::mt19937_64 rng = StreamRng(spec.seed, 0);
  const int count = std::uniform_int_distribution<int>(spec.box_count_min,
                                                       spec.box_count_max)(rng);
  std::vector<double> weights;
  for (const ClassSpec& c : spec.classes) weights.push_back(c.weight);
  std::discrete_distribution<int> pick_class(weights.begin(), weights.end());
  const Interval azimuth_span = {sensor.azimuth_min, sensor.azimuth_max};
  const Interval yaw_span = {-kPi, kPi};

  for (int i = 0; i < count; ++i) {
    const ClassSpec& cls = spec.classes[pick_class(rng)];
    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_retries && !placed; ++attempt) {
      Box3D b;
      b.l = Uniform(rng, cls.length);
      b.w = Uniform(rng, cls.width);
      b.h = Uniform(rng, cls.height);
      const double r = Uniform(rng, spec.radius);
      const double az = Uniform(rng, azimuth_span);
      b.cx = r * std::cos(az);
      b.cy = r * std::sin(az);
      b.cz = spec.ground_z + spec.ground_clearance + 0.5 * b.h;
      b.yaw = WrapAngle(Uniform(rng, yaw_span));
      b.class_id = cls.class_id;
      b.instance_id = i;
      if (PointInBox({0.0, 0.0, b.cz}, b, 0.5)) continue;
      bool clear = true;
      for (const Box3D& other : scene.boxes) {
        if (BevGap(b, other) < spec.min_gap) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      scene.boxes.push_back(b);
      placed = true;
    }
    if (!placed) {
      throw ConstraintError("could not place box " + std::to_string(i) + " after " +
                            std::to_string(spec.placement_retries) + " attempts");
    }
  }
  return scene;
}

RaycastResult RaycastScene(const Scene& scene) {
  const SensorSpec& sensor = scene.sensor;
  sensor.Validate();
  RaycastResult out;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int r = 0; r < sensor.rows; ++r) {
    for (int c = 0; c < sensor.cols; ++c) {
      const auto [az, incl] = PixelRay(sensor, r, c);
      const Point3 dir = SphericalToCartesian({1.0, az, incl});
      double best = std::numeric_limits<double>::infinity();
      int32_t hit_id = -1;
      if (dir.z < 0.0) best = scene.ground_z / dir.z;
      for (const Box3D& b : scene.boxes) {
        const double t = RayBoxEntry(dir, b);
        if (t < best) {
          best = t;
          hit_id = b.instance_id;
        }
      }
      if (!(best <= scene.max_range)) continue;
      double range = best;
      if (scene.noise_sigma > 0.0) {
        std::mt19937_64 rng = StreamRng(scene.seed, 1 + static_cast<uint64_t>(r) * sensor.cols + c);
        range = std::max(kNearClip, range + scene.noise_sigma * noise(rng));
        noise.reset();
      }
      LidarPoint pt;
      pt.position = SphericalToCartesian({range, az, incl});
      pt.intensity = hit_id >= 0 ? 0.6f : 0.3f;
      pt.elongation = 0.0f;
      pt.row = r;
      pt.col = c;
      out.cloud.push_back(pt);
      out.instance_ids.push_back(hit_id);
    }
  }
  return out;
}

PredictionMaps OraclePredictions(const TargetMaps& tgt, int num_classes,
                                 const OracleNoise& noise, uint64_t seed) {
  const int m = tgt.rows();
  const int n = tgt.cols();
  PredictionMaps pred = PredictionMaps::Zeros(m, n, num_classes);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool noisy = noise.centerness > 0.0 || noise.offset > 0.0 ||
                     noise.log_extent > 0.0 || noise.heading > 0.0;
  for (int pix = 0; pix < m * n; ++pix) {
    const int label = tgt.semantic.at(pix);
    if (label > num_classes) {
      throw ShapeError("target class " + std::to_string(label) + " exceeds " +
                       std::to_string(num_classes) + " prediction channels");
    }
    for (int k = 1; k <= num_classes; ++k) {
      pred.semantic_scores.at(pix, k - 1) = label == k ? kOracleOnScore : kOracleOffScore;
    }
    if (!noisy) {
      pred.centerness.at(pix) = tgt.centerness.at(pix);
      for (int k = 0; k < kPBranchDepth; ++k) pred.p_branch.at(pix, k) = tgt.p_branch.at(pix, k);
      for (int k = 0; k < kQBranchDepth; ++k) pred.q_branch.at(pix, k) = tgt.q_branch.at(pix, k);
      continue;
    }
    std::mt19937_64 rng = StreamRng(seed, static_cast<uint64_t>(pix));
    gauss.reset();
    auto jitter = [&](float value, double sigma) {
      const double z = gauss(rng);
      return sigma > 0.0 ? static_cast<float>(value + sigma * z) : value;
    };
    pred.centerness.at(pix) =
        std::clamp(jitter(tgt.centerness.at(pix), noise.centerness), 0.0f, 1.0f);
    pred.p_branch.at(pix, kOmegaY) = jitter(tgt.p_branch.at(pix, kOmegaY), noise.offset);
    pred.p_branch.at(pix, kOmegaZ) = jitter(tgt.p_branch.at(pix, kOmegaZ), noise.offset);
    pred.p_branch.at(pix, kLogH) = jitter(tgt.p_branch.at(pix, kLogH), noise.log_extent);
    pred.q_branch.at(pix, kOmegaX) = jitter(tgt.q_branch.at(pix, kOmegaX), noise.offset);
    pred.q_branch.at(pix, kLogL) = jitter(tgt.q_branch.at(pix, kLogL), noise.log_extent);
    pred.q_branch.at(pix, kLogW) = jitter(tgt.q_branch.at(pix, kLogW), noise.log_extent);
    pred.q_branch.at(pix, kCosPhi) = jitter(tgt.q_branch.at(pix, kCosPhi), noise.heading);
    pred.q_branch.at(pix, kSinPhi) = jitter(tgt.q_branch.at(pix, kSinPhi), noise.heading);
  }
  return pred;
}

}  // namespace rvkit
