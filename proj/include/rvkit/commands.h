#ifndef RVKIT_COMMANDS_H_
#define RVKIT_COMMANDS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvkit/config.h"
#include "rvkit/maps.h"
#include "rvkit/metrics.h"
#include "rvkit/range_image.h"
#include "rvkit/synth.h"
#include "rvkit/targets.h"

namespace rvkit {

inline constexpr const char* kToolVersion = "rvkit 1.0.0";

// File names inside a dataset directory.
std::string SceneStem(int index);  // scene_0000
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kTargetsManifestName = "targets_manifest.json";
inline constexpr const char* kDatasetConfigName = "config.json";

// Runs fn(0) .. fn(count - 1) on up to `jobs` threads. The exception of the
// lowest failing index is rethrown.
void ParallelFor(int count, int jobs, const std::function<void(int)>& fn);

struct SceneEntry {
  int index = 0;
  uint64_t seed = 0;
};

// One scene with its range image, targets and ground-truth boxes.
struct SceneTargets {
  SceneEntry entry;
  RangeImage image;
  TargetMaps targets;
  std::vector<Box3D> boxes;
  Grid<int32_t> hit_instance;  // ray-cast instance id per pixel, -1 if none
};

// Scene i of a run uses seed cfg.scene.seed + i.
uint64_t SceneSeed(const RunConfig& cfg, int index);

// The in-memory equivalent of simulate followed by targets, including the
// 32-bit rounding of stored point positions.
SceneTargets BuildScene(const RunConfig& cfg, int index);

// Boxes hit by at least one target pixel. Only these count as ground truth.
std::vector<Box3D> VisibleBoxes(std::span<const Box3D> boxes, const TargetMaps& tgt);

// Oracle stream seed for one scene.
uint64_t OracleSeed(uint64_t oracle_seed, int index);

struct EvalResult {
  std::map<int, ApResult> ap;  // per class
  PanopticConfig panoptic;
  std::map<int, PanopticScores> pq;  // per class at panoptic.lambda
  PanopticScores pq_overall;
  // (lambda, overall scores) for each requested sweep value.
  std::vector<std::pair<double, PanopticScores>> sweep;
  RegressionErrorReport regression;
};

EvalResult Evaluate(const RunConfig& cfg, std::span<const SceneTargets> scenes,
                    std::span<const PredictionMaps> preds,
                    const std::vector<double>& lambda_sweep, int jobs = 1);
std::string EvalResultJson(const RunConfig& cfg, const EvalResult& result);

// Where predictions come from: oracle maps built from the targets or RIMG
// files in a directory.
struct PredictionSource {
  std::optional<OracleNoise> oracle;
  uint64_t oracle_seed = 0;
  std::filesystem::path predictions_dir;
};

struct SimulateOptions {
  std::filesystem::path out_dir;
  int count = 1;
  int jobs = 1;
};
void CmdSimulate(const RunConfig& cfg, const SimulateOptions& opt);

struct TargetsOptions {
  std::filesystem::path dataset;
  int jobs = 1;
};
// Writes scene_XXXX.rimg next to the simulated files.
void CmdTargets(const RunConfig& cfg, const TargetsOptions& opt);

struct OracleOptions {
  std::filesystem::path dataset;
  std::filesystem::path out_dir;
  OracleNoise noise;
  uint64_t seed = 0;
  int jobs = 1;
};
// Writes scene_XXXX.pred.rimg files.
void CmdOracle(const RunConfig& cfg, const OracleOptions& opt);

struct InferenceOptions {
  std::filesystem::path dataset;
  std::filesystem::path out_dir;
  PredictionSource source;
  int jobs = 1;
};
// scene_XXXX.dets.jsonl per scene.
void CmdDetect(const RunConfig& cfg, const InferenceOptions& opt);
// scene_XXXX.panoptic.jsonl and scene_XXXX.panoptic.rimg per scene.
void CmdPanoptic(const RunConfig& cfg, const InferenceOptions& opt);

struct EvalOptions {
  std::filesystem::path dataset;
  std::filesystem::path out_file;
  PredictionSource source;
  std::vector<double> lambda_sweep;
  int jobs = 1;
};
// Writes the metrics document and returns it.
std::string CmdEval(const RunConfig& cfg, const EvalOptions& opt);

struct RenderOptions {
  std::filesystem::path input;
  std::string channel = "range";
  std::filesystem::path out_file;
};
void CmdRender(const RenderOptions& opt);

// Scene list of a simulated dataset.
std::vector<SceneEntry> ReadManifest(const std::filesystem::path& dataset);
SceneTargets LoadScene(const RunConfig& cfg, const std::filesystem::path& dataset,
                       const SceneEntry& entry);

}  // namespace rvkit

#endif  // RVKIT_COMMANDS_H_
