#include "rvkit/geom.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rvkit/error.h"

namespace rvkit {
namespace {

constexpr double kEmptyArea = 1e-12;

double Cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Intersection of segment p-q with the infinite line through a-b.
Point2 LineIntersection(const Point2& p, const Point2& q, const Point2& a,
                        const Point2& b) {
  const double cp = Cross(a, b, p);
  const double cq = Cross(a, b, q);
  const double t = cp / (cp - cq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

double PointSegmentDistance(const Point2& p, const Point2& a,
                            const Point2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

}  // namespace

double Norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

double Distance(const Point3& a, const Point3& b) { return Norm(a - b); }

double WrapAngle(double angle) {
  double a = std::fmod(angle + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  a -= kPi;
  if (a >= kPi) a -= 2.0 * kPi;
  return a;
}

double AzimuthOf(const Point3& p) {
  if (p.x == 0.0 && p.y == 0.0) {
    throw DegenerateInputError("point on the z-axis has no azimuth");
  }
  return WrapAngle(std::atan2(p.y, p.x));
}

Point3 RotateZ(const Point3& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

Box3D RotateZ(const Box3D& b, double angle) {
  Box3D out = b;
  const Point3 c = RotateZ(b.center(), angle);
  out.cx = c.x;
  out.cy = c.y;
  out.yaw = WrapAngle(b.yaw + angle);
  return out;
}

Point3 SphericalToCartesian(const SphericalCoord& s) {
  const double horizontal = s.range * std::cos(s.inclination);
  return {horizontal * std::cos(s.azimuth), horizontal * std::sin(s.azimuth),
          s.range * std::sin(s.inclination)};
}

SphericalConversion CartesianToSpherical(const Point3& p) {
  const double r = Norm(p);
  if (r == 0.0) throw DegenerateInputError("origin has no spherical direction");
  SphericalConversion out;
  out.coord.range = r;
  if (p.x == 0.0 && p.y == 0.0) {
    const double inside = std::nextafter(kPi / 2.0, 0.0);
    out.on_pole = true;
    out.coord.azimuth = 0.0;
    out.coord.inclination = p.z > 0.0 ? inside : -inside;
    return out;
  }
  out.coord.azimuth = WrapAngle(std::atan2(p.y, p.x));
  out.coord.inclination = std::atan2(p.z, std::hypot(p.x, p.y));
  return out;
}

std::array<Point3, 8> BoxCorners(const Box3D& b) {
  std::array<Point3, 8> corners;
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  for (int i = 0; i < 8; ++i) {
    const double dx = (i & 1 ? 0.5 : -0.5) * b.l;
    const double dy = (i & 2 ? 0.5 : -0.5) * b.w;
    const double dz = (i & 4 ? 0.5 : -0.5) * b.h;
    corners[i] = {b.cx + c * dx - s * dy, b.cy + s * dx + c * dy, b.cz + dz};
  }
  return corners;
}

Point3 ToBoxFrame(const Point3& p, const Box3D& b) {
  const double dx = p.x - b.cx;
  const double dy = p.y - b.cy;
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, p.z - b.cz};
}

bool PointInBox(const Point3& p, const Box3D& b, double margin) {
  const Point3 local = ToBoxFrame(p, b);
  return std::abs(local.x) <= 0.5 * b.l + margin &&
         std::abs(local.y) <= 0.5 * b.w + margin &&
         std::abs(local.z) <= 0.5 * b.h + margin;
}

std::array<Point2, 4> BevFootprint(const Box3D& b) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  const std::array<Point2, 4> local = {
      Point2{hl, hw}, Point2{-hl, hw}, Point2{-hl, -hw}, Point2{hl, -hw}};
  std::array<Point2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {b.cx + c * local[i].x - s * local[i].y,
              b.cy + s * local[i].x + c * local[i].y};
  }
  return out;
}

double PolygonArea(const std::vector<Point2>& polygon) {
  double twice = 0.0;
  const size_t n = polygon.size();
  for (size_t i = 0; i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

// Sutherland-Hodgman: clip `subject` successively against every edge of
// the convex `clip` polygon.
std::vector<Point2> ClipConvex(const std::vector<Point2>& subject,
                               const std::vector<Point2>& clip) {
  std::vector<Point2> output = subject;
  const size_t n = clip.size();
  for (size_t e = 0; e < n && !output.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % n];
    std::vector<Point2> input;
    input.swap(output);
    for (size_t i = 0; i < input.size(); ++i) {
      const Point2& cur = input[i];
      const Point2& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = Cross(a, b, cur) >= 0.0;
      const bool prev_in = Cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(LineIntersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(LineIntersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

double BevIntersectionArea(const Box3D& a, const Box3D& b) {
  // Footprints fully apart by their circumscribed circles cannot intersect.
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;
  const auto fa = BevFootprint(a);
  const auto fb = BevFootprint(b);
  const std::vector<Point2> pa(fa.begin(), fa.end());
  const std::vector<Point2> pb(fb.begin(), fb.end());
  const std::vector<Point2> clipped = ClipConvex(pa, pb);
  if (clipped.size() < 3) return 0.0;
  const double area = PolygonArea(clipped);
  return area < kEmptyArea ? 0.0 : area;
}

double BevIou(const Box3D& a, const Box3D& b) {
  const double inter = BevIntersectionArea(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.bev_area() + b.bev_area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double Iou3d(const Box3D& a, const Box3D& b) {
  const double top = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double bottom = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double overlap_z = top - bottom;
  if (overlap_z <= 0.0) return 0.0;
  const double inter = BevIntersectionArea(a, b) * overlap_z;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double BevGap(const Box3D& a, const Box3D& b) {
  if (BevIntersectionArea(a, b) > 0.0) return 0.0;
  const auto fa = BevFootprint(a);
  const auto fb = BevFootprint(b);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, PointSegmentDistance(fa[i], fb[j], fb[(j + 1) % 4]));
      best = std::min(best, PointSegmentDistance(fb[i], fa[j], fa[(j + 1) % 4]));
    }
  }
  return best;
}

}  // namespace rvkit
