#ifndef RVKIT_IO_H_
#define RVKIT_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/grid.h"
#include "rvkit/maps.h"
#include "rvkit/panoptic.h"
#include "rvkit/postprocess.h"
#include "rvkit/range_image.h"
#include "rvkit/targets.h"

namespace rvkit {

// Whole-file helpers. Writes go to a temporary sibling and are renamed
// into place.
std::string ReadFile(const std::filesystem::path& path);
void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes);
std::string Sha256Hex(std::string_view bytes);

// LPC1 point cloud: "LPC1", u32 count, count x 5 float32
// (x, y, z, intensity, elongation), little-endian.
std::string EncodeLpc1(const PointCloud& cloud);
PointCloud DecodeLpc1(std::string_view bytes);

// Per-point instance sidecar: "INS1", u32 count, count x int32.
std::string EncodeInstanceSidecar(const std::vector<int32_t>& ids);
std::vector<int32_t> DecodeInstanceSidecar(std::string_view bytes);

// RIMG container of named rows x cols planes.
enum class ChannelType : uint8_t { kFloat32 = 0, kInt32 = 1, kBool = 2 };

class Rimg {
 public:
  static constexpr uint16_t kVersion = 1;

  Rimg() = default;
  Rimg(int rows, int cols) : rows_(rows), cols_(cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  // Adding a name twice replaces the earlier plane. Multi-depth grids must
  // be split into single planes by the caller.
  void Put(const std::string& name, Grid<float> plane);
  void Put(const std::string& name, Grid<int32_t> plane);
  void PutBool(const std::string& name, Grid<uint8_t> plane);

  bool Has(const std::string& name) const;
  // Throws FormatError when missing.
  ChannelType TypeOf(const std::string& name) const;
  // Throw FormatError when missing or of another type.
  const Grid<float>& Float(const std::string& name) const;
  const Grid<int32_t>& Int(const std::string& name) const;
  const Grid<uint8_t>& Bool(const std::string& name) const;

  std::vector<std::string> names() const;

  std::string Encode() const;
  static Rimg Decode(std::string_view bytes);

 private:
  using Plane = std::variant<Grid<float>, Grid<int32_t>, Grid<uint8_t>>;
  struct Channel {
    std::string name;
    Plane plane;
  };
  void PutPlane(const std::string& name, Plane plane);
  const Channel* Find(const std::string& name) const;

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Channel> channels_;
};

// Channel names: range, intensity, elongation, x, y, z, azimuth,
// inclination, valid.
void PutRangeImage(Rimg& file, const RangeImage& image);
// The sensor layout is not stored in the container; `spec` supplies it and
// must match the stored size.
RangeImage GetRangeImage(const Rimg& file, const SensorSpec& spec);

// Channel names: semantic, centerness, box_id, p_mask, q_mask and one plane
// per regression element (omega_x ... sin_phi).
void PutTargets(Rimg& file, const TargetMaps& tgt);
TargetMaps GetTargets(const Rimg& file);

// Channel names: score_<k> for each class, pred_centerness and
// pred_<element> for each regression element.
void PutPredictions(Rimg& file, const PredictionMaps& pred);
PredictionMaps GetPredictions(const Rimg& file);

// Boxes as JSON lines with keys cx, cy, cz, l, w, h, yaw, class, instance.
// Values are written with round-trip precision.
std::string EncodeBoxes(const std::vector<Box3D>& boxes);
std::vector<Box3D> DecodeBoxes(std::string_view text);

// Detections as JSON lines with keys cx, cy, cz, l, w, h, yaw, class, score
// in 6-decimal fixed notation.
std::string EncodeDetections(const std::vector<Detection>& dets);

// One JSON line per valid pixel: row, col, class, instance.
std::string EncodePanoptic(const PanopticResult& result,
                           const Grid<uint8_t>& valid);

}  // namespace rvkit

#endif  // RVKIT_IO_H_
