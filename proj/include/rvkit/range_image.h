#ifndef RVKIT_RANGE_IMAGE_H_
#define RVKIT_RANGE_IMAGE_H_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rvkit/geom.h"
#include "rvkit/grid.h"

namespace rvkit {

// Beam layout of a spinning LiDAR. Row 0 is the highest beam. Columns bin
// the azimuth span uniformly with half-open bins.
struct SensorSpec {
  int rows = 64;
  int cols = 1024;
  double azimuth_min = -kPi;
  double azimuth_max = kPi;
  double inclination_min = -0.30;
  double inclination_max = 0.05;
  // Optional per-row beam inclinations, strictly decreasing, length == rows.
  std::vector<double> inclinations;

  // Throws ConfigError when the layout is inconsistent.
  void Validate() const;
  bool full_circle() const;
  double azimuth_step() const { return (azimuth_max - azimuth_min) / cols; }
};

// Ray direction through the center of a pixel. Throws ConstraintError for
// indices outside the grid.
std::pair<double, double> PixelRay(const SensorSpec& spec, int row, int col);

// Bin lookup for a direction; nullopt when outside the sensor's field of
// view.
std::optional<int> AzimuthToCol(const SensorSpec& spec, double azimuth);
std::optional<int> InclinationToRow(const SensorSpec& spec,
                                    double inclination);

struct LidarPoint {
  Point3 position;
  float intensity = 0.0f;
  float elongation = 0.0f;
  // Source pixel, set when the point was extracted from a range image.
  int row = -1;
  int col = -1;
};

using PointCloud = std::vector<LidarPoint>;

inline constexpr float kInvalidRange = -1.0f;

struct RangeImage {
  SensorSpec spec;
  Grid<float> range;
  Grid<float> intensity;
  Grid<float> elongation;
  Grid<float> x;
  Grid<float> y;
  Grid<float> z;
  Grid<float> azimuth;
  Grid<float> inclination;
  Grid<uint8_t> valid;

  // All-invalid image; azimuth and inclination hold the pixel ray angles.
  static RangeImage Empty(const SensorSpec& spec);

  int rows() const { return range.rows(); }
  int cols() const { return range.cols(); }
  bool is_valid(int pixel) const { return valid.at(pixel) != 0; }
  Point3 point(int pixel) const {
    return {x.at(pixel), y.at(pixel), z.at(pixel)};
  }
  int valid_count() const;
};

struct RangeImageBuild {
  RangeImage image;
  // Points outside the field of view or at the origin.
  int dropped = 0;
  // Points that lost a nearest-wins contest for their pixel.
  int collisions = 0;
  // Index into the cloud of the point stored at each pixel, -1 if none.
  Grid<int32_t> source;
};

RangeImageBuild BuildRangeImage(const PointCloud& cloud,
                                const SensorSpec& spec);

// One point per valid pixel in row-major order, tagged with its pixel.
PointCloud RangeImageToPoints(const RangeImage& image);

}  // namespace rvkit

#endif  // RVKIT_RANGE_IMAGE_H_
