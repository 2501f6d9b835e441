#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "infovaegan/eval.hpp"

namespace ivg {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// Values in [0, 1] (clamped) to bytes via round(v * 255).
GrayImage to_gray(std::span<const double> values, std::size_t width, std::size_t height);

/// rows x cols square cells separated by 1-pixel black lines.
GrayImage montage(const std::vector<std::vector<double>>& cells, std::size_t rows, std::size_t cols,
                  std::size_t side);
inline GrayImage montage(const TraversalGrid& grid) {
  return montage(grid.images, grid.rows, grid.cols, grid.image_side);
}

/// Binary PGM: "P5\n<w> <h>\n255\n" followed by the raw bytes.
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace ivg
