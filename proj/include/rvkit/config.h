#ifndef RVKIT_CONFIG_H_
#define RVKIT_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "rvkit/metrics.h"
#include "rvkit/panoptic.h"
#include "rvkit/postprocess.h"
#include "rvkit/range_image.h"
#include "rvkit/synth.h"
#include "rvkit/targets.h"

namespace rvkit {

struct MetricsConfig {
  // AP matching threshold per class; classes not listed use ap_iou_default.
  std::map<int, double> ap_iou = {{1, 0.7}, {2, 0.5}};
  double ap_iou_default = 0.7;
  IouKind iou_kind = IouKind::k3d;

  double ApIouFor(int class_id) const;
  void Validate() const;
};

struct RunConfig {
  SensorSpec sensor;
  SceneSpec scene;
  LossConfig loss;
  DetectConfig detect;
  PanopticConfig panoptic;
  MetricsConfig metrics;

  void Validate() const;
};

// Parses a JSON config. Missing keys keep their defaults; unknown keys,
// wrong types and invalid values throw ConfigError.
RunConfig ParseConfig(std::string_view json_text);
RunConfig LoadConfig(const std::filesystem::path& path);

// Replaces scene.seed with $RVKIT_SEED when it is set.
void ApplySeedOverride(RunConfig& cfg);

// Canonical JSON with sorted keys and every field spelled out. Parsing the
// dump yields the same config.
std::string DumpConfig(const RunConfig& cfg);
std::string ConfigHash(const RunConfig& cfg);

}  // namespace rvkit

#endif  // RVKIT_CONFIG_H_
