#include "rvkit/config.h"

#include <cerrno>
#include <cstdlib>
#include <initializer_list>
#include <set>

#include "json.hpp"
#include "rvkit/error.h"
#include "rvkit/io.h"

namespace rvkit {
namespace {

using nlohmann::json;

// Walks one JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  ~Section() = default;

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

  const json* Get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void Number(const std::string& key, double& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number()) throw ConfigError(Where(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void Integer(const std::string& key, int& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number_integer()) throw ConfigError(Where(key) + ": expected an integer");
      const long long x = v->get<long long>();
      if (x < -(1LL << 31) || x >= (1LL << 31)) throw ConfigError(Where(key) + ": out of range");
      out = static_cast<int>(x);
    }
  }
  void Unsigned(const std::string& key, uint64_t& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(Where(key) + ": expected a non-negative integer");
      }
      out = v->get<uint64_t>();
    }
  }
  void String(const std::string& key, std::string& out) {
    if (const json* v = Get(key)) {
      if (!v->is_string()) throw ConfigError(Where(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void Range(const std::string& key, Interval& out) {
    if (const json* v = Get(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        throw ConfigError(Where(key) + ": expected [min, max]");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }
  void ClassMap(const std::string& key, std::map<int, double>& out) {
    if (const json* v = Get(key)) {
      if (!v->is_object()) throw ConfigError(Where(key) + ": expected an object");
      out.clear();
      for (auto it = v->begin(); it != v->end(); ++it) {
        char* end = nullptr;
        errno = 0;
        const long id = std::strtol(it.key().c_str(), &end, 10);
        if (it.key().empty() || *end != '\0' || errno != 0 || id < 1) {
          throw ConfigError(Where(key) + ": class key '" + it.key() + "' is not a positive integer");
        }
        if (!it->is_number()) throw ConfigError(Where(key) + "." + it.key() + ": expected a number");
        out[static_cast<int>(id)] = it->get<double>();
      }
    }
  }

  std::string Where(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void ParseSensor(const json& j, SensorSpec& s) {
  Section sec(j, "sensor");
  sec.Integer("rows", s.rows);
  sec.Integer("cols", s.cols);
  sec.Number("azimuth_min", s.azimuth_min);
  sec.Number("azimuth_max", s.azimuth_max);
  sec.Number("inclination_min", s.inclination_min);
  sec.Number("inclination_max", s.inclination_max);
  if (const json* v = sec.Get("inclinations")) {
    if (!v->is_array()) throw ConfigError("sensor.inclinations: expected an array");
    s.inclinations.clear();
    for (const json& x : *v) {
      if (!x.is_number()) throw ConfigError("sensor.inclinations: expected numbers");
      s.inclinations.push_back(x.get<double>());
    }
  }
  sec.Finish();
}

void ParseClasses(const json& j, std::vector<ClassSpec>& classes) {
  if (!j.is_array()) throw ConfigError("scene.classes: expected an array");
  classes.clear();
  for (size_t i = 0; i < j.size(); ++i) {
    Section sec(j[i], "scene.classes[" + std::to_string(i) + "]");
    ClassSpec c;
    sec.Integer("class_id", c.class_id);
    sec.String("name", c.name);
    sec.Number("weight", c.weight);
    sec.Range("length", c.length);
    sec.Range("width", c.width);
    sec.Range("height", c.height);
    sec.Finish();
    classes.push_back(c);
  }
}

void ParseScene(const json& j, SceneSpec& s) {
  Section sec(j, "scene");
  sec.Unsigned("seed", s.seed);
  sec.Integer("box_count_min", s.box_count_min);
  sec.Integer("box_count_max", s.box_count_max);
  if (const json* v = sec.Get("classes")) ParseClasses(*v, s.classes);
  sec.Range("radius", s.radius);
  sec.Number("min_gap", s.min_gap);
  sec.Number("ground_z", s.ground_z);
  sec.Number("ground_clearance", s.ground_clearance);
  sec.Number("noise_sigma", s.noise_sigma);
  sec.Number("max_range", s.max_range);
  sec.Integer("placement_retries", s.placement_retries);
  sec.Finish();
}

void ParseLoss(const json& j, LossConfig& l) {
  Section sec(j, "loss");
  sec.Number("lambda_s", l.lambda_s);
  sec.Number("lambda_r", l.lambda_r);
  sec.Number("tau", l.tau);
  sec.Number("focal_alpha", l.focal_alpha);
  sec.Number("focal_gamma", l.focal_gamma);
  sec.Number("balanced_alpha", l.balanced_alpha);
  sec.Number("balanced_gamma", l.balanced_gamma);
  sec.Finish();
}

void ParseDetect(const json& j, DetectConfig& d) {
  Section sec(j, "detect");
  sec.Number("semantic_threshold", d.semantic_threshold);
  sec.Number("centerness_threshold", d.centerness_threshold);
  sec.Number("nms_iou", d.nms_iou);
  sec.ClassMap("nms_iou_per_class", d.nms_iou_per_class);
  std::string mode = d.nms_mode == NmsMode::kBev ? "bev" : "3d";
  sec.String("nms_mode", mode);
  if (mode == "bev") {
    d.nms_mode = NmsMode::kBev;
  } else if (mode == "3d") {
    d.nms_mode = NmsMode::k3d;
  } else {
    throw ConfigError("detect.nms_mode: expected \"bev\" or \"3d\"");
  }
  sec.Finish();
}

void ParsePanoptic(const json& j, PanopticConfig& p) {
  Section sec(j, "panoptic");
  sec.Number("tau_c", p.tau_c);
  sec.Number("tau_s", p.tau_s);
  sec.Number("lambda", p.lambda);
  sec.Number("cluster_eps", p.cluster_eps);
  sec.Integer("heatmap_nms_window", p.heatmap_nms_window);
  std::string conv = p.offset_convention == OffsetConvention::kInverse ? "inverse" : "printed";
  sec.String("offset_convention", conv);
  if (conv == "inverse") {
    p.offset_convention = OffsetConvention::kInverse;
  } else if (conv == "printed") {
    p.offset_convention = OffsetConvention::kPrinted;
  } else {
    throw ConfigError("panoptic.offset_convention: expected \"inverse\" or \"printed\"");
  }
  sec.Finish();
}

void ParseMetrics(const json& j, MetricsConfig& m) {
  Section sec(j, "metrics");
  sec.ClassMap("ap_iou", m.ap_iou);
  sec.Number("ap_iou_default", m.ap_iou_default);
  std::string kind = m.iou_kind == IouKind::k3d ? "3d" : "bev";
  sec.String("iou_kind", kind);
  if (kind == "3d") {
    m.iou_kind = IouKind::k3d;
  } else if (kind == "bev") {
    m.iou_kind = IouKind::kBev;
  } else {
    throw ConfigError("metrics.iou_kind: expected \"3d\" or \"bev\"");
  }
  sec.Finish();
}

json ClassMapJson(const std::map<int, double>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

}  // namespace

double MetricsConfig::ApIouFor(int class_id) const {
  auto it = ap_iou.find(class_id);
  return it == ap_iou.end() ? ap_iou_default : it->second;
}

void MetricsConfig::Validate() const {
  auto ok = [](double t) { return t > 0.0 && t <= 1.0; };
  if (!ok(ap_iou_default)) throw ConfigError("metrics.ap_iou_default must be in (0, 1]");
  for (const auto& [k, v] : ap_iou) {
    if (!ok(v)) throw ConfigError("metrics.ap_iou for class " + std::to_string(k) + " must be in (0, 1]");
  }
}

void RunConfig::Validate() const {
  sensor.Validate();
  scene.Validate();
  loss.Validate();
  detect.Validate();
  panoptic.Validate();
  metrics.Validate();
}

RunConfig ParseConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(j, "config");
  if (const json* v = top.Get("sensor")) ParseSensor(*v, cfg.sensor);
  if (const json* v = top.Get("scene")) ParseScene(*v, cfg.scene);
  if (const json* v = top.Get("loss")) ParseLoss(*v, cfg.loss);
  if (const json* v = top.Get("detect")) ParseDetect(*v, cfg.detect);
  if (const json* v = top.Get("panoptic")) ParsePanoptic(*v, cfg.panoptic);
  if (const json* v = top.Get("metrics")) ParseMetrics(*v, cfg.metrics);
  top.Finish();
  cfg.Validate();
  return cfg;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot load config: ") + e.what());
  }
  return ParseConfig(text);
}

void ApplySeedOverride(RunConfig& cfg) {
  const char* env = std::getenv("RVKIT_SEED");
  if (env == nullptr) return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (*env == '\0' || *env == '-' || *end != '\0' || errno != 0) {
    throw ConfigError(std::string("RVKIT_SEED is not an unsigned integer: '") + env + "'");
  }
  cfg.scene.seed = seed;
}

std::string DumpConfig(const RunConfig& cfg) {
  json j;
  const SensorSpec& s = cfg.sensor;
  j["sensor"] = {{"rows", s.rows},
                 {"cols", s.cols},
                 {"azimuth_min", s.azimuth_min},
                 {"azimuth_max", s.azimuth_max},
                 {"inclination_min", s.inclination_min},
                 {"inclination_max", s.inclination_max},
                 {"inclinations", s.inclinations}};
  const SceneSpec& sc = cfg.scene;
  json classes = json::array();
  for (const ClassSpec& c : sc.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"name", c.name},
                       {"weight", c.weight},
                       {"length", {c.length.min, c.length.max}},
                       {"width", {c.width.min, c.width.max}},
                       {"height", {c.height.min, c.height.max}}});
  }
  j["scene"] = {{"seed", sc.seed},
                {"box_count_min", sc.box_count_min},
                {"box_count_max", sc.box_count_max},
                {"classes", classes},
                {"radius", {sc.radius.min, sc.radius.max}},
                {"min_gap", sc.min_gap},
                {"ground_z", sc.ground_z},
                {"ground_clearance", sc.ground_clearance},
                {"noise_sigma", sc.noise_sigma},
                {"max_range", sc.max_range},
                {"placement_retries", sc.placement_retries}};
  const LossConfig& l = cfg.loss;
  j["loss"] = {{"lambda_s", l.lambda_s},
               {"lambda_r", l.lambda_r},
               {"tau", l.tau},
               {"focal_alpha", l.focal_alpha},
               {"focal_gamma", l.focal_gamma},
               {"balanced_alpha", l.balanced_alpha},
               {"balanced_gamma", l.balanced_gamma}};
  const DetectConfig& d = cfg.detect;
  j["detect"] = {{"semantic_threshold", d.semantic_threshold},
                 {"centerness_threshold", d.centerness_threshold},
                 {"nms_iou", d.nms_iou},
                 {"nms_iou_per_class", ClassMapJson(d.nms_iou_per_class)},
                 {"nms_mode", d.nms_mode == NmsMode::kBev ? "bev" : "3d"}};
  const PanopticConfig& p = cfg.panoptic;
  j["panoptic"] = {
      {"tau_c", p.tau_c},
      {"tau_s", p.tau_s},
      {"lambda", p.lambda},
      {"cluster_eps", p.cluster_eps},
      {"heatmap_nms_window", p.heatmap_nms_window},
      {"offset_convention",
       p.offset_convention == OffsetConvention::kInverse ? "inverse" : "printed"}};
  const MetricsConfig& m = cfg.metrics;
  j["metrics"] = {{"ap_iou", ClassMapJson(m.ap_iou)},
                  {"ap_iou_default", m.ap_iou_default},
                  {"iou_kind", m.iou_kind == IouKind::k3d ? "3d" : "bev"}};
  return j.dump(2) + "\n";
}

std::string ConfigHash(const RunConfig& cfg) { return Sha256Hex(DumpConfig(cfg)); }

}  // namespace rvkit
