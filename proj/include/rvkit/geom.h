#ifndef RVKIT_GEOM_H_
#define RVKIT_GEOM_H_

#include <array>
#include <numbers>
#include <vector>

// Conventions used across the library:
//   azimuth      angle of a ray in the x-y plane, atan2(y, x), in [-pi, pi)
//   inclination  elevation of a ray above the x-y plane, in (-pi/2, pi/2)
//   yaw          heading of a box in the x-y plane, in [-pi, pi)

namespace rvkit {

inline constexpr double kPi = std::numbers::pi;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Point3&) const = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
inline Point3 operator-(const Point3& a, const Point3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
inline Point3 operator*(double s, const Point3& p) {
  return {s * p.x, s * p.y, s * p.z};
}

double Norm(const Point3& p);
double Distance(const Point3& a, const Point3& b);

struct SphericalCoord {
  double range = 0.0;
  double azimuth = 0.0;
  double inclination = 0.0;
};

// Result of a Cartesian to spherical conversion. Points on the z-axis have
// no defined azimuth; they are reported with `on_pole` set, azimuth 0 and
// the inclination moved one ulp inside the open interval.
struct SphericalConversion {
  SphericalCoord coord;
  bool on_pole = false;
};

struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;
  int class_id = 0;
  int instance_id = -1;

  Point3 center() const { return {cx, cy, cz}; }
  double bev_area() const { return l * w; }
  double volume() const { return l * w * h; }
};

// Wraps an angle into [-pi, pi).
double WrapAngle(double angle);

// Azimuth of a point, atan2(y, x) wrapped to [-pi, pi). Throws
// DegenerateInputError for points on the z-axis.
double AzimuthOf(const Point3& p);

// Rotates a point about the z-axis by `angle`.
Point3 RotateZ(const Point3& p, double angle);
Box3D RotateZ(const Box3D& b, double angle);

Point3 SphericalToCartesian(const SphericalCoord& s);
// Throws DegenerateInputError at the origin.
SphericalConversion CartesianToSpherical(const Point3& p);

// Corner order: bit 0 of the index selects -/+ length, bit 1 -/+ width,
// bit 2 -/+ height.
std::array<Point3, 8> BoxCorners(const Box3D& b);

// Expresses `p` in the box frame (centered, yaw removed).
Point3 ToBoxFrame(const Point3& p, const Box3D& b);

// Closed-interval membership. `margin` grows every half extent.
bool PointInBox(const Point3& p, const Box3D& b, double margin = 0.0);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Counter-clockwise BEV footprint of a box.
std::array<Point2, 4> BevFootprint(const Box3D& b);

double PolygonArea(const std::vector<Point2>& polygon);

// Intersection of two convex counter-clockwise polygons.
std::vector<Point2> ClipConvex(const std::vector<Point2>& subject,
                               const std::vector<Point2>& clip);

double BevIntersectionArea(const Box3D& a, const Box3D& b);
double BevIou(const Box3D& a, const Box3D& b);
double Iou3d(const Box3D& a, const Box3D& b);

// Minimum distance between two BEV footprints; 0 when they overlap.
double BevGap(const Box3D& a, const Box3D& b);

}  // namespace rvkit

#endif  // RVKIT_GEOM_H_
