// 8-bit grayscale PNG export/import for rendered maps.
#pragma once

#include "phyrm/grid.hpp"

namespace phyrm {

// Values clamped to [0,1] and quantized to round(v * 255).
void write_png_gray8(const Grid2D& g, const std::filesystem::path& path);

struct Gray8Image {
  int height = 0, width = 0;
  std::vector<uint8_t> pixels;  // row-major
};

Gray8Image read_png_gray8(const std::filesystem::path& path);

}  // namespace phyrm
