#include "rvkit/render.h"

#include <algorithm>
#include <cmath>

#include "rvkit/error.h"

namespace rvkit {
namespace {

uint8_t ToByte(double v) {
  return static_cast<uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

constexpr std::array<Rgb, 16> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
    {245, 130, 48},  {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
    {210, 245, 60},  {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
    {170, 110, 40},  {255, 250, 200}, {128, 0, 0},    {170, 255, 195},
}};

template <typename T, typename F>
std::string Render(const Grid<T>& plane, F color) {
  Grid<uint8_t> rgb(plane.rows(), plane.cols(), 3);
  for (int pix = 0; pix < plane.pixel_count(); ++pix) {
    const Rgb c = color(pix);
    for (int k = 0; k < 3; ++k) rgb.at(pix, k) = c[k];
  }
  return EncodePpm(plane.rows(), plane.cols(), rgb);
}

}  // namespace

Rgb InverseDepthColor(double range) {
  const double r = std::clamp(range, kColormapNear, kColormapFar);
  const double t = (1.0 / r - 1.0 / kColormapFar) / (1.0 / kColormapNear - 1.0 / kColormapFar);
  return {ToByte(t), ToByte(1.0 - std::abs(2.0 * t - 1.0)), ToByte(1.0 - t)};
}

Rgb PaletteColor(int32_t id) {
  if (id < 0) return {0, 0, 0};
  return kPalette[id % 16];
}

std::string EncodePpm(int rows, int cols, const Grid<uint8_t>& rgb) {
  if (rgb.rows() != rows || rgb.cols() != cols || rgb.depth() != 3) {
    throw ShapeError("PPM buffer does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols) + "x3");
  }
  std::string out = "P6\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.values().data()), rgb.values().size());
  return out;
}

std::string RenderRange(const RangeImage& image) {
  return Render(image.range, [&](int pix) -> Rgb {
    if (!image.is_valid(pix)) return {0, 0, 0};
    return InverseDepthColor(image.range.at(pix));
  });
}

std::string RenderIds(const Grid<int32_t>& ids) {
  return Render(ids, [&](int pix) { return PaletteColor(ids.at(pix)); });
}

std::string RenderScalar(const Grid<float>& plane) {
  return Render(plane, [&](int pix) -> Rgb {
    const uint8_t g = ToByte(plane.at(pix));
    return {g, g, g};
  });
}

}  // namespace rvkit
