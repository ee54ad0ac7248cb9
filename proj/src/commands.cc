#include "rvkit/commands.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <thread>

#include "json.hpp"
#include "rvkit/error.h"
#include "rvkit/io.h"
#include "rvkit/panoptic.h"
#include "rvkit/postprocess.h"
#include "rvkit/render.h"

namespace rvkit {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Writes a file and returns its record for a manifest.
json WriteTracked(const fs::path& dir, const std::string& name, const std::string& bytes) {
  WriteFileAtomic(dir / name, bytes);
  return {{"name", name}, {"sha256", Sha256Hex(bytes)}, {"bytes", bytes.size()}};
}

json ParseJsonFile(const fs::path& path) {
  const std::string text = ReadFile(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), static_cast<long long>(e.byte));
  }
}

json ManifestHeader(const RunConfig& cfg, const char* command) {
  return {{"tool", "rvkit"},
          {"version", kToolVersion},
          {"command", command},
          {"config_sha256", ConfigHash(cfg)}};
}

void WriteManifest(const fs::path& dir, const char* name, const json& manifest) {
  WriteFileAtomic(dir / name, manifest.dump(2) + "\n");
}

SceneTargets FromCloud(const RunConfig& cfg, const SceneEntry& entry, const PointCloud& cloud,
                       const std::vector<int32_t>& instance_ids, std::vector<Box3D> boxes) {
  if (instance_ids.size() != cloud.size()) {
    throw FormatError("instance sidecar holds " + std::to_string(instance_ids.size()) +
                          " ids for " + std::to_string(cloud.size()) + " points",
                      0);
  }
  RangeImageBuild build = BuildRangeImage(cloud, cfg.sensor);
  SceneTargets st;
  st.entry = entry;
  st.image = std::move(build.image);
  st.hit_instance = Grid<int32_t>(cfg.sensor.rows, cfg.sensor.cols, 1, -1);
  for (int pix = 0; pix < build.source.pixel_count(); ++pix) {
    const int src = build.source.at(pix);
    if (src >= 0) st.hit_instance.at(pix) = instance_ids[src];
  }
  st.targets = BuildTargetMaps(st.image, boxes, cfg.loss);
  st.boxes = std::move(boxes);
  return st;
}

SceneTargets LoadRawScene(const RunConfig& cfg, const fs::path& dataset, const SceneEntry& entry) {
  const std::string stem = SceneStem(entry.index);
  const PointCloud cloud = DecodeLpc1(ReadFile(dataset / (stem + ".lpc")));
  const std::vector<int32_t> ids = DecodeInstanceSidecar(ReadFile(dataset / (stem + ".inst")));
  std::vector<Box3D> boxes = DecodeBoxes(ReadFile(dataset / (stem + ".boxes.jsonl")));
  return FromCloud(cfg, entry, cloud, ids, std::move(boxes));
}

PredictionMaps ObtainPredictions(const RunConfig& cfg, const PredictionSource& source,
                                 const SceneTargets& st) {
  PredictionMaps pred;
  if (source.oracle) {
    pred = OraclePredictions(st.targets, cfg.scene.num_classes(), *source.oracle,
                             OracleSeed(source.oracle_seed, st.entry.index));
  } else if (!source.predictions_dir.empty()) {
    const fs::path path = source.predictions_dir / (SceneStem(st.entry.index) + ".pred.rimg");
    pred = GetPredictions(Rimg::Decode(ReadFile(path)));
  } else {
    throw ConfigError("no prediction source: pass --oracle-noise or --predictions");
  }
  pred.RequireShape(st.image.rows(), st.image.cols());
  return pred;
}

std::vector<SceneTargets> LoadScenes(const RunConfig& cfg, const fs::path& dataset, int jobs) {
  const std::vector<SceneEntry> entries = ReadManifest(dataset);
  std::vector<SceneTargets> scenes(entries.size());
  ParallelFor(static_cast<int>(entries.size()), jobs,
              [&](int i) { scenes[i] = LoadScene(cfg, dataset, entries[i]); });
  return scenes;
}

std::vector<PredictionMaps> LoadPredictions(const RunConfig& cfg, const PredictionSource& source,
                                            std::span<const SceneTargets> scenes, int jobs) {
  std::vector<PredictionMaps> preds(scenes.size());
  ParallelFor(static_cast<int>(scenes.size()), jobs,
              [&](int i) { preds[i] = ObtainPredictions(cfg, source, scenes[i]); });
  return preds;
}

std::vector<SegmentLabel> GroundTruthLabels(const SceneTargets& st) {
  std::vector<SegmentLabel> out;
  for (int pix = 0; pix < st.image.valid.pixel_count(); ++pix) {
    if (!st.image.is_valid(pix)) continue;
    out.push_back({st.targets.semantic.at(pix), st.targets.box_id.at(pix)});
  }
  return out;
}

std::vector<SegmentLabel> PredictedLabels(const SceneTargets& st, const PanopticResult& r) {
  std::vector<SegmentLabel> out;
  for (int pix = 0; pix < st.image.valid.pixel_count(); ++pix) {
    if (!st.image.is_valid(pix)) continue;
    out.push_back({r.semantic.at(pix), r.instance.at(pix)});
  }
  return out;
}

json Nullable(double v, bool defined) { return defined ? json(v) : json(nullptr); }

json ScoresJson(const PanopticScores& s) {
  return {{"pq", Nullable(s.pq, s.defined)}, {"sq", Nullable(s.sq, s.defined)},
          {"rq", Nullable(s.rq, s.defined)}, {"tp", s.tp},
          {"fp", s.fp},                      {"fn", s.fn}};
}

std::vector<int> ClassIds(const RunConfig& cfg) {
  std::vector<int> ids;
  for (const ClassSpec& c : cfg.scene.classes) ids.push_back(c.class_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

std::string SceneStem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", index);
  return buf;
}

void ParallelFor(int count, int jobs, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(std::max(count, 0));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, std::max(count, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

uint64_t SceneSeed(const RunConfig& cfg, int index) {
  return cfg.scene.seed + static_cast<uint64_t>(index);
}

uint64_t OracleSeed(uint64_t oracle_seed, int index) {
  return oracle_seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(index);
}

SceneTargets BuildScene(const RunConfig& cfg, int index) {
  SceneSpec spec = cfg.scene;
  spec.seed = SceneSeed(cfg, index);
  const Scene scene = GenerateScene(spec, cfg.sensor);
  const RaycastResult rc = RaycastScene(scene);
  // Same rounding as a trip through the files.
  const PointCloud cloud = DecodeLpc1(EncodeLpc1(rc.cloud));
  return FromCloud(cfg, {index, spec.seed}, cloud, rc.instance_ids,
                   DecodeBoxes(EncodeBoxes(scene.boxes)));
}

std::vector<Box3D> VisibleBoxes(std::span<const Box3D> boxes, const TargetMaps& tgt) {
  const std::vector<int32_t> ids(tgt.box_id.values().begin(), tgt.box_id.values().end());
  std::vector<Box3D> out;
  for (const Box3D& b : boxes) {
    if (std::find(ids.begin(), ids.end(), b.instance_id) != ids.end()) out.push_back(b);
  }
  return out;
}

EvalResult Evaluate(const RunConfig& cfg, std::span<const SceneTargets> scenes,
                    std::span<const PredictionMaps> preds,
                    const std::vector<double>& lambda_sweep, int jobs) {
  if (scenes.size() != preds.size()) {
    throw ShapeError(std::to_string(scenes.size()) + " scenes but " +
                     std::to_string(preds.size()) + " prediction sets");
  }
  const int n = static_cast<int>(scenes.size());
  struct FrameOut {
    FrameDetections frame;
    std::vector<SegmentLabel> gt;
    std::vector<std::vector<SegmentLabel>> pred;  // main, then sweep
  };
  std::vector<FrameOut> frames(n);
  std::vector<PanopticConfig> variants = {cfg.panoptic};
  for (double lambda : lambda_sweep) {
    PanopticConfig v = cfg.panoptic;
    v.lambda = lambda;
    v.Validate();
    variants.push_back(v);
  }
  ParallelFor(n, jobs, [&](int i) {
    const SceneTargets& st = scenes[i];
    const PredictionMaps& pred = preds[i];
    pred.RequireShape(st.image.rows(), st.image.cols());
    FrameOut& out = frames[i];
    out.frame.dets = Detect(st.image, pred, cfg.detect);
    out.frame.gts = VisibleBoxes(st.boxes, st.targets);
    out.gt = GroundTruthLabels(st);
    for (const PanopticConfig& v : variants) {
      out.pred.push_back(PredictedLabels(st, PanopticSegment(st.image, pred, v)));
    }
  });

  EvalResult result;
  result.panoptic = cfg.panoptic;
  for (int class_id : ClassIds(cfg)) {
    std::vector<FrameDetections> per_class(n);
    for (int i = 0; i < n; ++i) {
      for (const Detection& d : frames[i].frame.dets) {
        if (d.class_id == class_id) per_class[i].dets.push_back(d);
      }
      for (const Box3D& b : frames[i].frame.gts) {
        if (b.class_id == class_id) per_class[i].gts.push_back(b);
      }
    }
    result.ap[class_id] =
        AveragePrecision(per_class, cfg.metrics.ApIouFor(class_id), cfg.metrics.iou_kind);
  }

  std::vector<PanopticAccumulator> acc(variants.size());
  for (int i = 0; i < n; ++i) {
    for (size_t v = 0; v < variants.size(); ++v) acc[v].Add(frames[i].pred[v], frames[i].gt);
  }
  for (int class_id : ClassIds(cfg)) result.pq[class_id] = acc[0].Scores(class_id);
  result.pq_overall = acc[0].Overall();
  for (size_t v = 1; v < variants.size(); ++v) {
    result.sweep.emplace_back(variants[v].lambda, acc[v].Overall());
  }

  RegressionErrorAccumulator reg(cfg.loss.tau);
  for (int i = 0; i < n; ++i) reg.Add(preds[i], scenes[i].targets);
  result.regression = reg.Report();
  return result;
}

std::string EvalResultJson(const RunConfig& cfg, const EvalResult& result) {
  json ap_classes = json::object();
  double ap_sum = 0.0;
  int ap_defined = 0;
  for (const auto& [class_id, r] : result.ap) {
    ap_classes[std::to_string(class_id)] = {{"ap", Nullable(r.ap, r.defined)},
                                            {"iou_threshold", cfg.metrics.ApIouFor(class_id)},
                                            {"num_gt", r.num_gt},
                                            {"num_det", r.num_det},
                                            {"true_positives", r.true_positives}};
    if (r.defined) {
      ap_sum += r.ap;
      ++ap_defined;
    }
  }
  json ap = {{"protocol", "simplified: greedy matching, all-point interpolation"},
             {"iou_kind", cfg.metrics.iou_kind == IouKind::k3d ? "3d" : "bev"},
             {"classes", ap_classes},
             {"mean", Nullable(ap_defined ? ap_sum / ap_defined : 0.0, ap_defined > 0)}};

  json pq_classes = json::object();
  double pq_sum = 0.0;
  int pq_defined = 0;
  for (const auto& [class_id, s] : result.pq) {
    pq_classes[std::to_string(class_id)] = ScoresJson(s);
    if (s.defined) {
      pq_sum += s.pq;
      ++pq_defined;
    }
  }
  json sweep = json::array();
  for (const auto& [lambda, s] : result.sweep) {
    json entry = ScoresJson(s);
    entry["lambda"] = lambda;
    sweep.push_back(entry);
  }
  json pq = {{"lambda", result.panoptic.lambda},
             {"classes", pq_classes},
             {"overall", ScoresJson(result.pq_overall)},
             {"macro_pq", Nullable(pq_defined ? pq_sum / pq_defined : 0.0, pq_defined > 0)},
             {"sweep", sweep}};

  const RegressionErrorReport& rep = result.regression;
  json reg = {{"tau", cfg.loss.tau}};
  const char* rows[] = {"all", "centric", "edge"};
  for (int r = 0; r < 3; ++r) {
    json row = {{"pixels", rep.pixel_count[r]}};
    for (int e = 0; e < kElementCount; ++e) {
      row[std::string(kElementNames[e])] =
          Nullable(rep.mean_abs_error[r][e], rep.pixel_count[r] > 0);
    }
    reg[rows[r]] = row;
  }

  json doc = {{"ap", ap},
              {"pq", pq},
              {"regression_errors", reg},
              {"config", json::parse(DumpConfig(cfg))}};
  return doc.dump(2) + "\n";
}

std::vector<SceneEntry> ReadManifest(const fs::path& dataset) {
  const json m = ParseJsonFile(dataset / kManifestName);
  std::vector<SceneEntry> out;
  try {
    for (const json& s : m.at("scenes")) {
      out.push_back({s.at("index").get<int>(), s.at("seed").get<uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw FormatError((dataset / kManifestName).string() + ": " + e.what(), 0);
  }
  return out;
}

SceneTargets LoadScene(const RunConfig& cfg, const fs::path& dataset, const SceneEntry& entry) {
  const std::string stem = SceneStem(entry.index);
  const Rimg file = Rimg::Decode(ReadFile(dataset / (stem + ".rimg")));
  SceneTargets st;
  st.entry = entry;
  st.image = GetRangeImage(file, cfg.sensor);
  st.targets = GetTargets(file);
  st.hit_instance = file.Int("hit_instance");
  st.boxes = DecodeBoxes(ReadFile(dataset / (stem + ".boxes.jsonl")));
  return st;
}

void CmdSimulate(const RunConfig& cfg, const SimulateOptions& opt) {
  cfg.Validate();
  if (opt.count < 0) throw ConfigError("scene count must be >= 0");
  MakeDir(opt.out_dir);
  std::vector<json> records(opt.count);
  ParallelFor(opt.count, opt.jobs, [&](int i) {
    SceneSpec spec = cfg.scene;
    spec.seed = SceneSeed(cfg, i);
    const Scene scene = GenerateScene(spec, cfg.sensor);
    const RaycastResult rc = RaycastScene(scene);
    const std::string stem = SceneStem(i);
    json files = json::array();
    files.push_back(WriteTracked(opt.out_dir, stem + ".lpc", EncodeLpc1(rc.cloud)));
    files.push_back(WriteTracked(opt.out_dir, stem + ".boxes.jsonl", EncodeBoxes(scene.boxes)));
    files.push_back(
        WriteTracked(opt.out_dir, stem + ".inst", EncodeInstanceSidecar(rc.instance_ids)));
    records[i] = {{"index", i},
                  {"seed", spec.seed},
                  {"points", rc.cloud.size()},
                  {"boxes", scene.boxes.size()},
                  {"files", files}};
  });
  json manifest = ManifestHeader(cfg, "simulate");
  manifest["config"] = WriteTracked(opt.out_dir, kDatasetConfigName, DumpConfig(cfg));
  manifest["count"] = opt.count;
  manifest["scenes"] = records.empty() ? json::array() : json(records);
  WriteManifest(opt.out_dir, kManifestName, manifest);
}

void CmdTargets(const RunConfig& cfg, const TargetsOptions& opt) {
  cfg.Validate();
  const std::vector<SceneEntry> entries = ReadManifest(opt.dataset);
  std::vector<json> records(entries.size());
  ParallelFor(static_cast<int>(entries.size()), opt.jobs, [&](int i) {
    const SceneTargets st = LoadRawScene(cfg, opt.dataset, entries[i]);
    Rimg file(st.image.rows(), st.image.cols());
    PutRangeImage(file, st.image);
    PutTargets(file, st.targets);
    file.Put("hit_instance", st.hit_instance);
    long long foreground = 0;
    for (int32_t id : st.targets.box_id.values()) foreground += id >= 0;
    records[i] = WriteTracked(opt.dataset, SceneStem(st.entry.index) + ".rimg", file.Encode());
    records[i]["index"] = st.entry.index;
    records[i]["valid_pixels"] = st.image.valid_count();
    records[i]["foreground_pixels"] = foreground;
  });
  json manifest = ManifestHeader(cfg, "targets");
  manifest["source_manifest_sha256"] = Sha256Hex(ReadFile(opt.dataset / kManifestName));
  manifest["scenes"] = records.empty() ? json::array() : json(records);
  WriteManifest(opt.dataset, kTargetsManifestName, manifest);
}

void CmdOracle(const RunConfig& cfg, const OracleOptions& opt) {
  cfg.Validate();
  MakeDir(opt.out_dir);
  const std::vector<SceneEntry> entries = ReadManifest(opt.dataset);
  std::vector<json> records(entries.size());
  PredictionSource source;
  source.oracle = opt.noise;
  source.oracle_seed = opt.seed;
  ParallelFor(static_cast<int>(entries.size()), opt.jobs, [&](int i) {
    const SceneTargets st = LoadScene(cfg, opt.dataset, entries[i]);
    Rimg file(st.image.rows(), st.image.cols());
    PutPredictions(file, ObtainPredictions(cfg, source, st));
    records[i] = WriteTracked(opt.out_dir, SceneStem(st.entry.index) + ".pred.rimg", file.Encode());
  });
  json manifest = ManifestHeader(cfg, "oracle");
  manifest["noise"] = {{"centerness", opt.noise.centerness},
                       {"offset", opt.noise.offset},
                       {"log_extent", opt.noise.log_extent},
                       {"heading", opt.noise.heading}};
  manifest["seed"] = opt.seed;
  manifest["scenes"] = records.empty() ? json::array() : json(records);
  WriteManifest(opt.out_dir, "oracle_manifest.json", manifest);
}

void CmdDetect(const RunConfig& cfg, const InferenceOptions& opt) {
  cfg.Validate();
  MakeDir(opt.out_dir);
  const std::vector<SceneEntry> entries = ReadManifest(opt.dataset);
  ParallelFor(static_cast<int>(entries.size()), opt.jobs, [&](int i) {
    const SceneTargets st = LoadScene(cfg, opt.dataset, entries[i]);
    const PredictionMaps pred = ObtainPredictions(cfg, opt.source, st);
    WriteFileAtomic(opt.out_dir / (SceneStem(st.entry.index) + ".dets.jsonl"),
                    EncodeDetections(Detect(st.image, pred, cfg.detect)));
  });
}

void CmdPanoptic(const RunConfig& cfg, const InferenceOptions& opt) {
  cfg.Validate();
  MakeDir(opt.out_dir);
  const std::vector<SceneEntry> entries = ReadManifest(opt.dataset);
  ParallelFor(static_cast<int>(entries.size()), opt.jobs, [&](int i) {
    const SceneTargets st = LoadScene(cfg, opt.dataset, entries[i]);
    const PredictionMaps pred = ObtainPredictions(cfg, opt.source, st);
    const PanopticResult result = PanopticSegment(st.image, pred, cfg.panoptic);
    const std::string stem = SceneStem(st.entry.index);
    WriteFileAtomic(opt.out_dir / (stem + ".panoptic.jsonl"),
                    EncodePanoptic(result, st.image.valid));
    Rimg file(st.image.rows(), st.image.cols());
    file.Put("panoptic_semantic", result.semantic);
    file.Put("panoptic_instance", result.instance);
    file.PutBool("valid", st.image.valid);
    WriteFileAtomic(opt.out_dir / (stem + ".panoptic.rimg"), file.Encode());
  });
}

std::string CmdEval(const RunConfig& cfg, const EvalOptions& opt) {
  cfg.Validate();
  const std::vector<SceneTargets> scenes = LoadScenes(cfg, opt.dataset, opt.jobs);
  const std::vector<PredictionMaps> preds = LoadPredictions(cfg, opt.source, scenes, opt.jobs);
  const std::string doc =
      EvalResultJson(cfg, Evaluate(cfg, scenes, preds, opt.lambda_sweep, opt.jobs));
  const fs::path out = opt.out_file.empty() ? opt.dataset / "metrics.json" : opt.out_file;
  if (out.has_parent_path()) MakeDir(out.parent_path());
  WriteFileAtomic(out, doc);
  return doc;
}

void CmdRender(const RenderOptions& opt) {
  const Rimg file = Rimg::Decode(ReadFile(opt.input));
  std::string ppm;
  if (opt.channel == "range") {
    RangeImage image;
    image.range = file.Float("range");
    image.valid = file.Bool("valid");
    ppm = RenderRange(image);
  } else {
    switch (file.TypeOf(opt.channel)) {
      case ChannelType::kFloat32:
        ppm = RenderScalar(file.Float(opt.channel));
        break;
      case ChannelType::kInt32:
        ppm = RenderIds(file.Int(opt.channel));
        break;
      case ChannelType::kBool: {
        const Grid<uint8_t>& b = file.Bool(opt.channel);
        Grid<float> plane(b.rows(), b.cols());
        for (int pix = 0; pix < b.pixel_count(); ++pix) plane.at(pix) = b.at(pix) ? 1.0f : 0.0f;
        ppm = RenderScalar(plane);
        break;
      }
    }
  }
  if (opt.out_file.has_parent_path()) MakeDir(opt.out_file.parent_path());
  WriteFileAtomic(opt.out_file, ppm);
}

}  // namespace rvkit
