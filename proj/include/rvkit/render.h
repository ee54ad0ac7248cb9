#ifndef RVKIT_RENDER_H_
#define RVKIT_RENDER_H_

#include <array>
#include <cstdint>
#include <string>

#include "rvkit/grid.h"
#include "rvkit/range_image.h"

namespace rvkit {

using Rgb = std::array<uint8_t, 3>;

// Near ranges are red, far ranges blue. Ranges are clamped to
// [kColormapNear, kColormapFar] and mapped linearly in inverse depth.
inline constexpr double kColormapNear = 1.0;
inline constexpr double kColormapFar = 100.0;
Rgb InverseDepthColor(double range);

// Fixed 16-entry palette indexed by id mod 16; negative ids are black.
Rgb PaletteColor(int32_t id);

// Binary PPM (P6) from row-major RGB triples.
std::string EncodePpm(int rows, int cols, const Grid<uint8_t>& rgb);

// Range channel through the inverse-depth colormap; invalid pixels black.
std::string RenderRange(const RangeImage& image);
// Instance or class ids through the palette.
std::string RenderIds(const Grid<int32_t>& ids);
// A [0, 1] plane as grayscale; values are clamped.
std::string RenderScalar(const Grid<float>& plane);

}  // namespace rvkit

#endif  // RVKIT_RENDER_H_
