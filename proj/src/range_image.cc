#include "rvkit/range_image.h"

#include <cmath>
#include <string>

#include "rvkit/error.h"

namespace rvkit {

void SensorSpec::Validate() const {
  if (rows < 1 || cols < 1) {
    throw ConfigError("sensor rows and cols must be >= 1");
  }
  if (!(azimuth_max > azimuth_min) || azimuth_max - azimuth_min > 2.0 * kPi + 1e-12) {
    throw ConfigError("sensor azimuth span must be non-empty and at most 2*pi");
  }
  if (inclinations.empty()) {
    if (!(inclination_max >= inclination_min) ||
        inclination_max >= kPi / 2.0 || inclination_min <= -kPi / 2.0) {
      throw ConfigError("sensor inclination span must lie inside (-pi/2, pi/2)");
    }
    return;
  }
  if (static_cast<int>(inclinations.size()) != rows) {
    throw ConfigError("inclination table has " +
                      std::to_string(inclinations.size()) +
                      " entries, expected " + std::to_string(rows));
  }
  for (size_t i = 0; i < inclinations.size(); ++i) {
    if (std::abs(inclinations[i]) >= kPi / 2.0) {
      throw ConfigError("inclination table entry outside (-pi/2, pi/2)");
    }
    if (i > 0 && !(inclinations[i] < inclinations[i - 1])) {
      throw ConfigError("inclination table must be strictly decreasing");
    }
  }
}

bool SensorSpec::full_circle() const {
  return std::abs((azimuth_max - azimuth_min) - 2.0 * kPi) < 1e-12;
}

std::pair<double, double> PixelRay(const SensorSpec& spec, int row, int col) {
  if (row < 0 || row >= spec.rows || col < 0 || col >= spec.cols) {
    throw ConstraintError("pixel (" + std::to_string(row) + ", " +
                          std::to_string(col) + ") outside " +
                          std::to_string(spec.rows) + "x" +
                          std::to_string(spec.cols) + " sensor grid");
  }
  const double azimuth = spec.azimuth_min + (col + 0.5) * spec.azimuth_step();
  double inclination;
  if (!spec.inclinations.empty()) {
    inclination = spec.inclinations[row];
  } else {
    const double step = (spec.inclination_max - spec.inclination_min) / spec.rows;
    inclination = spec.inclination_max - (row + 0.5) * step;
  }
  return {azimuth, inclination};
}

std::optional<int> AzimuthToCol(const SensorSpec& spec, double azimuth) {
  double a = azimuth;
  if (spec.full_circle()) {
    if (a < spec.azimuth_min || a >= spec.azimuth_max) {
      a = spec.azimuth_min + std::fmod(a - spec.azimuth_min, 2.0 * kPi);
      if (a < spec.azimuth_min) a += 2.0 * kPi;
      if (a >= spec.azimuth_max) return 0;
    }
  } else if (a < spec.azimuth_min || a >= spec.azimuth_max) {
    return std::nullopt;
  }
  // Rounding can push values just below az_max past the last bin.
  int col = static_cast<int>(std::floor((a - spec.azimuth_min) / spec.azimuth_step()));
  if (col >= spec.cols) col = spec.cols - 1;
  if (col < 0) col = 0;
  return col;
}

std::optional<int> InclinationToRow(const SensorSpec& spec,
                                    double inclination) {
  if (spec.inclinations.empty()) {
    if (inclination > spec.inclination_max || inclination < spec.inclination_min) {
      return std::nullopt;
    }
    const double span = spec.inclination_max - spec.inclination_min;
    if (span <= 0.0) return 0;
    int row = static_cast<int>(
        std::floor((spec.inclination_max - inclination) / span * spec.rows));
    if (row >= spec.rows) row = spec.rows - 1;
    if (row < 0) row = 0;
    return row;
  }
  const std::vector<double>& beams = spec.inclinations;
  const int m = spec.rows;
  if (m == 1) return 0;
  const double upper = beams[0] + 0.5 * (beams[0] - beams[1]);
  const double lower = beams[m - 1] - 0.5 * (beams[m - 2] - beams[m - 1]);
  if (inclination > upper || inclination < lower) return std::nullopt;
  // Beams are decreasing; find the first beam whose lower boundary is at or
  // below the inclination.
  for (int row = 0; row < m - 1; ++row) {
    const double boundary = 0.5 * (beams[row] + beams[row + 1]);
    if (inclination >= boundary) return row;
  }
  return m - 1;
}

RangeImage RangeImage::Empty(const SensorSpec& spec) {
  RangeImage img;
  img.spec = spec;
  const int m = spec.rows;
  const int n = spec.cols;
  img.range = Grid<float>(m, n, 1, kInvalidRange);
  img.intensity = Grid<float>(m, n);
  img.elongation = Grid<float>(m, n);
  img.x = Grid<float>(m, n);
  img.y = Grid<float>(m, n);
  img.z = Grid<float>(m, n);
  img.azimuth = Grid<float>(m, n);
  img.inclination = Grid<float>(m, n);
  img.valid = Grid<uint8_t>(m, n);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) {
      const auto [az, incl] = PixelRay(spec, r, c);
      img.azimuth(r, c) = static_cast<float>(az);
      img.inclination(r, c) = static_cast<float>(incl);
    }
  }
  return img;
}

int RangeImage::valid_count() const {
  int count = 0;
  for (uint8_t v : valid.values()) count += v != 0;
  return count;
}

RangeImageBuild BuildRangeImage(const PointCloud& cloud,
                                const SensorSpec& spec) {
  spec.Validate();
  RangeImageBuild out;
  out.image = RangeImage::Empty(spec);
  RangeImage& img = out.image;
  out.source = Grid<int32_t>(spec.rows, spec.cols, 1, -1);
  for (size_t i = 0; i < cloud.size(); ++i) {
    const LidarPoint& pt = cloud[i];
    const Point3& p = pt.position;
    if (p.x == 0.0 && p.y == 0.0) {
      // The origin and the z-axis have no azimuth bin.
      ++out.dropped;
      continue;
    }
    const SphericalCoord s = CartesianToSpherical(p).coord;
    const std::optional<int> row = InclinationToRow(spec, s.inclination);
    const std::optional<int> col = AzimuthToCol(spec, s.azimuth);
    if (!row || !col) {
      ++out.dropped;
      continue;
    }
    const int r = *row;
    const int c = *col;
    if (img.valid(r, c)) {
      ++out.collisions;
      if (!(s.range < img.range(r, c))) continue;
    }
    img.valid(r, c) = 1;
    out.source(r, c) = static_cast<int32_t>(i);
    img.range(r, c) = static_cast<float>(s.range);
    img.intensity(r, c) = pt.intensity;
    img.elongation(r, c) = pt.elongation;
    img.x(r, c) = static_cast<float>(p.x);
    img.y(r, c) = static_cast<float>(p.y);
    img.z(r, c) = static_cast<float>(p.z);
    img.azimuth(r, c) = static_cast<float>(s.azimuth);
    img.inclination(r, c) = static_cast<float>(s.inclination);
  }
  return out;
}

PointCloud RangeImageToPoints(const RangeImage& image) {
  PointCloud cloud;
  cloud.reserve(image.valid_count());
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      if (!image.valid(r, c)) continue;
      LidarPoint pt;
      pt.position = {image.x(r, c), image.y(r, c), image.z(r, c)};
      pt.intensity = image.intensity(r, c);
      pt.elongation = image.elongation(r, c);
      pt.row = r;
      pt.col = c;
      cloud.push_back(pt);
    }
  }
  return cloud;
}

}  // namespace rvkit
