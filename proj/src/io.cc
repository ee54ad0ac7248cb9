#include "rvkit/io.h"

#include <openssl/evp.h>
#include <unistd.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rvkit/error.h"

namespace rvkit {
namespace {

class ByteWriter {
 public:
  void Bytes(std::string_view s) { out_.append(s); }
  void U8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U16(uint16_t v) {
    for (int i = 0; i < 2; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void I32(int32_t v) { U32(static_cast<uint32_t>(v)); }
  void F32(float v) { U32(std::bit_cast<uint32_t>(v)); }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string format)
      : data_(data), format_(std::move(format)) {}

  size_t offset() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

  void Magic(std::string_view magic) {
    if (data_.size() < magic.size() || data_.substr(0, magic.size()) != magic) {
      throw FormatError(format_ + ": bad magic, expected \"" + std::string(magic) + "\"", 0);
    }
    pos_ = magic.size();
  }
  std::string_view Bytes(size_t n) {
    Need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  uint8_t U8() {
    Need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint16_t U16() {
    uint16_t v = U8();
    v |= static_cast<uint16_t>(U8()) << 8;
    return v;
  }
  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  int32_t I32() { return static_cast<int32_t>(U32()); }
  float F32() { return std::bit_cast<float>(U32()); }

  void Fail(const std::string& what) const { throw FormatError(format_ + ": " + what, pos_); }
  void Need(size_t n) const {
    if (data_.size() - pos_ < n) Fail("truncated input");
  }

 private:
  std::string_view data_;
  std::string format_;
  size_t pos_ = 0;
};

std::string Fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  // Avoid "-0.000000" so equal values always print identically.
  if (std::strcmp(buf, "-0.000000") == 0) return "0.000000";
  return buf;
}

std::string RoundTrip(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* kRangeChannels[] = {"range", "intensity", "elongation", "x",
                                "y",     "z",         "azimuth",    "inclination"};

}  // namespace

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed", kExitIo);
  }
  static const char* kHex = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 15]);
  }
  return hex;
}

std::string EncodeLpc1(const PointCloud& cloud) {
  ByteWriter w;
  w.Bytes("LPC1");
  w.U32(static_cast<uint32_t>(cloud.size()));
  for (const LidarPoint& p : cloud) {
    w.F32(static_cast<float>(p.position.x));
    w.F32(static_cast<float>(p.position.y));
    w.F32(static_cast<float>(p.position.z));
    w.F32(p.intensity);
    w.F32(p.elongation);
  }
  return w.Take();
}

PointCloud DecodeLpc1(std::string_view bytes) {
  ByteReader r(bytes, "LPC1");
  r.Magic("LPC1");
  const uint32_t count = r.U32();
  r.Need(static_cast<size_t>(count) * 20);
  PointCloud cloud(count);
  for (LidarPoint& p : cloud) {
    p.position.x = r.F32();
    p.position.y = r.F32();
    p.position.z = r.F32();
    p.intensity = r.F32();
    p.elongation = r.F32();
  }
  if (!r.done()) r.Fail("trailing bytes after point records");
  return cloud;
}

std::string EncodeInstanceSidecar(const std::vector<int32_t>& ids) {
  ByteWriter w;
  w.Bytes("INS1");
  w.U32(static_cast<uint32_t>(ids.size()));
  for (int32_t id : ids) w.I32(id);
  return w.Take();
}

std::vector<int32_t> DecodeInstanceSidecar(std::string_view bytes) {
  ByteReader r(bytes, "INS1");
  r.Magic("INS1");
  const uint32_t count = r.U32();
  r.Need(static_cast<size_t>(count) * 4);
  std::vector<int32_t> ids(count);
  for (int32_t& id : ids) id = r.I32();
  if (!r.done()) r.Fail("trailing bytes after instance records");
  return ids;
}

void Rimg::PutPlane(const std::string& name, Plane plane) {
  if (name.empty() || name.size() > 255) {
    throw FormatError("RIMG channel name must be 1..255 bytes: '" + name + "'", 0);
  }
  const bool ok = std::visit(
      [&](const auto& g) { return g.rows() == rows_ && g.cols() == cols_ && g.depth() == 1; },
      plane);
  if (!ok) throw ShapeError("RIMG channel '" + name + "' does not match the container size");
  for (Channel& c : channels_) {
    if (c.name == name) {
      c.plane = std::move(plane);
      return;
    }
  }
  channels_.push_back({name, std::move(plane)});
}

void Rimg::Put(const std::string& name, Grid<float> plane) { PutPlane(name, std::move(plane)); }
void Rimg::Put(const std::string& name, Grid<int32_t> plane) { PutPlane(name, std::move(plane)); }
void Rimg::PutBool(const std::string& name, Grid<uint8_t> plane) { PutPlane(name, std::move(plane)); }

const Rimg::Channel* Rimg::Find(const std::string& name) const {
  for (const Channel& c : channels_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool Rimg::Has(const std::string& name) const { return Find(name) != nullptr; }

ChannelType Rimg::TypeOf(const std::string& name) const {
  const Channel* c = Find(name);
  if (c == nullptr) throw FormatError("RIMG: missing channel '" + name + "'", 0);
  return static_cast<ChannelType>(c->plane.index());
}

namespace {
template <typename T>
const Grid<T>& TypedChannel(const std::variant<Grid<float>, Grid<int32_t>, Grid<uint8_t>>* plane,
                            const std::string& name, const char* type) {
  if (plane == nullptr) throw FormatError("RIMG: missing channel '" + name + "'", 0);
  const Grid<T>* g = std::get_if<Grid<T>>(plane);
  if (g == nullptr) throw FormatError("RIMG: channel '" + name + "' is not " + type, 0);
  return *g;
}
}  // namespace

const Grid<float>& Rimg::Float(const std::string& name) const {
  const Channel* c = Find(name);
  return TypedChannel<float>(c ? &c->plane : nullptr, name, "float32");
}
const Grid<int32_t>& Rimg::Int(const std::string& name) const {
  const Channel* c = Find(name);
  return TypedChannel<int32_t>(c ? &c->plane : nullptr, name, "int32");
}
const Grid<uint8_t>& Rimg::Bool(const std::string& name) const {
  const Channel* c = Find(name);
  return TypedChannel<uint8_t>(c ? &c->plane : nullptr, name, "bool");
}

std::vector<std::string> Rimg::names() const {
  std::vector<std::string> out;
  for (const Channel& c : channels_) out.push_back(c.name);
  return out;
}

std::string Rimg::Encode() const {
  ByteWriter w;
  w.Bytes("RIMG");
  w.U16(kVersion);
  w.U32(static_cast<uint32_t>(rows_));
  w.U32(static_cast<uint32_t>(cols_));
  w.U32(static_cast<uint32_t>(channels_.size()));
  for (const Channel& c : channels_) {
    w.U8(static_cast<uint8_t>(c.name.size()));
    w.Bytes(c.name);
    if (const auto* f = std::get_if<Grid<float>>(&c.plane)) {
      w.U8(static_cast<uint8_t>(ChannelType::kFloat32));
      for (float v : f->values()) w.F32(v);
    } else if (const auto* i = std::get_if<Grid<int32_t>>(&c.plane)) {
      w.U8(static_cast<uint8_t>(ChannelType::kInt32));
      for (int32_t v : i->values()) w.I32(v);
    } else {
      w.U8(static_cast<uint8_t>(ChannelType::kBool));
      for (uint8_t v : std::get<Grid<uint8_t>>(c.plane).values()) w.U8(v ? 1 : 0);
    }
  }
  return w.Take();
}

Rimg Rimg::Decode(std::string_view bytes) {
  ByteReader r(bytes, "RIMG");
  r.Magic("RIMG");
  const uint16_t version = r.U16();
  if (version != kVersion) r.Fail("unsupported version " + std::to_string(version));
  const uint32_t rows = r.U32();
  const uint32_t cols = r.U32();
  if (rows > (1u << 20) || cols > (1u << 20)) r.Fail("implausible image size");
  const uint32_t channels = r.U32();
  Rimg file(static_cast<int>(rows), static_cast<int>(cols));
  const size_t pixels = static_cast<size_t>(rows) * cols;
  for (uint32_t ch = 0; ch < channels; ++ch) {
    const uint8_t name_len = r.U8();
    if (name_len == 0) r.Fail("empty channel name");
    const std::string name(r.Bytes(name_len));
    if (file.Has(name)) r.Fail("duplicate channel '" + name + "'");
    const uint8_t dtype = r.U8();
    switch (static_cast<ChannelType>(dtype)) {
      case ChannelType::kFloat32: {
        r.Need(pixels * 4);
        Grid<float> g(rows, cols);
        for (float& v : g.values()) v = r.F32();
        file.channels_.push_back({name, std::move(g)});
        break;
      }
      case ChannelType::kInt32: {
        r.Need(pixels * 4);
        Grid<int32_t> g(rows, cols);
        for (int32_t& v : g.values()) v = r.I32();
        file.channels_.push_back({name, std::move(g)});
        break;
      }
      case ChannelType::kBool: {
        r.Need(pixels);
        Grid<uint8_t> g(rows, cols);
        for (uint8_t& v : g.values()) {
          v = r.U8();
          if (v > 1) r.Fail("bool channel '" + name + "' holds a value other than 0/1");
        }
        file.channels_.push_back({name, std::move(g)});
        break;
      }
      default:
        r.Fail("unknown dtype code " + std::to_string(dtype) + " for channel '" + name + "'");
    }
  }
  if (!r.done()) r.Fail("trailing bytes after channels");
  return file;
}

void PutRangeImage(Rimg& file, const RangeImage& image) {
  const Grid<float>* planes[] = {&image.range, &image.intensity, &image.elongation,
                                 &image.x,     &image.y,         &image.z,
                                 &image.azimuth, &image.inclination};
  for (int i = 0; i < 8; ++i) file.Put(kRangeChannels[i], *planes[i]);
  file.PutBool("valid", image.valid);
}

RangeImage GetRangeImage(const Rimg& file, const SensorSpec& spec) {
  if (spec.rows != file.rows() || spec.cols != file.cols()) {
    throw ShapeError("RIMG is " + std::to_string(file.rows()) + "x" + std::to_string(file.cols()) +
                     " but the sensor is " + std::to_string(spec.rows) + "x" +
                     std::to_string(spec.cols));
  }
  RangeImage image;
  image.spec = spec;
  Grid<float>* planes[] = {&image.range, &image.intensity, &image.elongation,
                           &image.x,     &image.y,         &image.z,
                           &image.azimuth, &image.inclination};
  for (int i = 0; i < 8; ++i) *planes[i] = file.Float(kRangeChannels[i]);
  image.valid = file.Bool("valid");
  return image;
}

namespace {

Grid<float> Slice(const Grid<float>& g, int k) {
  Grid<float> out(g.rows(), g.cols());
  for (int pix = 0; pix < out.pixel_count(); ++pix) out.at(pix) = g.at(pix, k);
  return out;
}

void Unslice(const Grid<float>& plane, Grid<float>& g, int k) {
  for (int pix = 0; pix < plane.pixel_count(); ++pix) g.at(pix, k) = plane.at(pix);
}

}  // namespace

void PutTargets(Rimg& file, const TargetMaps& tgt) {
  file.Put("semantic", tgt.semantic);
  file.Put("centerness", tgt.centerness);
  for (int e = 0; e < kElementCount; ++e) {
    const ElementSlot slot = kElementSlots[e];
    file.Put(std::string(kElementNames[e]),
             Slice(slot.p_branch ? tgt.p_branch : tgt.q_branch, slot.channel));
  }
  file.Put("box_id", tgt.box_id);
  file.PutBool("p_mask", tgt.p_mask);
  file.PutBool("q_mask", tgt.q_mask);
}

TargetMaps GetTargets(const Rimg& file) {
  TargetMaps tgt = TargetMaps::Empty(file.rows(), file.cols());
  tgt.semantic = file.Int("semantic");
  tgt.centerness = file.Float("centerness");
  for (int e = 0; e < kElementCount; ++e) {
    const ElementSlot slot = kElementSlots[e];
    Unslice(file.Float(std::string(kElementNames[e])),
            slot.p_branch ? tgt.p_branch : tgt.q_branch, slot.channel);
  }
  tgt.box_id = file.Int("box_id");
  tgt.p_mask = file.Bool("p_mask");
  tgt.q_mask = file.Bool("q_mask");
  return tgt;
}

void PutPredictions(Rimg& file, const PredictionMaps& pred) {
  pred.RequireShape(file.rows(), file.cols());
  for (int k = 0; k < pred.num_classes(); ++k) {
    file.Put("score_" + std::to_string(k + 1), Slice(pred.semantic_scores, k));
  }
  file.Put("pred_centerness", pred.centerness);
  for (int e = 0; e < kElementCount; ++e) {
    const ElementSlot slot = kElementSlots[e];
    file.Put("pred_" + std::string(kElementNames[e]),
             Slice(slot.p_branch ? pred.p_branch : pred.q_branch, slot.channel));
  }
}

PredictionMaps GetPredictions(const Rimg& file) {
  int classes = 0;
  while (file.Has("score_" + std::to_string(classes + 1))) ++classes;
  if (classes == 0) throw FormatError("RIMG: no score_<k> prediction channels", 0);
  PredictionMaps pred = PredictionMaps::Zeros(file.rows(), file.cols(), classes);
  for (int k = 0; k < classes; ++k) {
    Unslice(file.Float("score_" + std::to_string(k + 1)), pred.semantic_scores, k);
  }
  pred.centerness = file.Float("pred_centerness");
  for (int e = 0; e < kElementCount; ++e) {
    const ElementSlot slot = kElementSlots[e];
    Unslice(file.Float("pred_" + std::string(kElementNames[e])),
            slot.p_branch ? pred.p_branch : pred.q_branch, slot.channel);
  }
  return pred;
}

std::string EncodeBoxes(const std::vector<Box3D>& boxes) {
  std::string out;
  for (const Box3D& b : boxes) {
    out += "{\"cx\":" + RoundTrip(b.cx) + ",\"cy\":" + RoundTrip(b.cy) +
           ",\"cz\":" + RoundTrip(b.cz) + ",\"l\":" + RoundTrip(b.l) +
           ",\"w\":" + RoundTrip(b.w) + ",\"h\":" + RoundTrip(b.h) +
           ",\"yaw\":" + RoundTrip(b.yaw) + ",\"class\":" + std::to_string(b.class_id) +
           ",\"instance\":" + std::to_string(b.instance_id) + "}\n";
  }
  return out;
}

std::vector<Box3D> DecodeBoxes(std::string_view text) {
  std::vector<Box3D> boxes;
  std::istringstream in{std::string(text)};
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      Box3D b;
      b.cx = j.at("cx").get<double>();
      b.cy = j.at("cy").get<double>();
      b.cz = j.at("cz").get<double>();
      b.l = j.at("l").get<double>();
      b.w = j.at("w").get<double>();
      b.h = j.at("h").get<double>();
      b.yaw = j.at("yaw").get<double>();
      b.class_id = j.at("class").get<int>();
      b.instance_id = j.value("instance", static_cast<int>(boxes.size()));
      if (!(b.l > 0.0 && b.w > 0.0 && b.h > 0.0)) {
        throw FormatError("boxes: extents must be positive", line_no);
      }
      boxes.push_back(b);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("boxes: ") + e.what() + " on line " + std::to_string(line_no), line_no);
    }
  }
  return boxes;
}

std::string EncodeDetections(const std::vector<Detection>& dets) {
  std::string out;
  for (const Detection& d : dets) {
    out += "{\"cx\":" + Fixed6(d.box.cx) + ",\"cy\":" + Fixed6(d.box.cy) +
           ",\"cz\":" + Fixed6(d.box.cz) + ",\"l\":" + Fixed6(d.box.l) +
           ",\"w\":" + Fixed6(d.box.w) + ",\"h\":" + Fixed6(d.box.h) +
           ",\"yaw\":" + Fixed6(d.box.yaw) + ",\"class\":" + std::to_string(d.class_id) +
           ",\"score\":" + Fixed6(d.score) + "}\n";
  }
  return out;
}

std::string EncodePanoptic(const PanopticResult& result, const Grid<uint8_t>& valid) {
  RequireSamePixels(result.semantic, valid, "panoptic result vs valid mask");
  std::string out;
  const int cols = valid.cols();
  for (int pix = 0; pix < valid.pixel_count(); ++pix) {
    if (!valid.at(pix)) continue;
    out += "{\"row\":" + std::to_string(pix / cols) + ",\"col\":" + std::to_string(pix % cols) +
           ",\"class\":" + std::to_string(result.semantic.at(pix)) +
           ",\"instance\":" + std::to_string(result.instance.at(pix)) + "}\n";
  }
  return out;
}

}  // namespace rvkit
