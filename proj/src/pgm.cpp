#include "infovaegan/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "infovaegan/checkpoint.hpp"

namespace ivg {

GrayImage to_gray(std::span<const double> values, std::size_t width, std::size_t height) {
  if (values.size() != width * height) {
    throw ShapeError("to_gray: " + std::to_string(values.size()) + " values for a " + std::to_string(width) + "x" +
                     std::to_string(height) + " image");
  }
  GrayImage img{width, height, std::vector<std::uint8_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

GrayImage montage(const std::vector<std::vector<double>>& cells, std::size_t rows, std::size_t cols,
                  std::size_t side) {
  if (rows == 0 || cols == 0 || cells.size() != rows * cols) {
    throw ShapeError("montage: expected " + std::to_string(rows * cols) + " cells, got " +
                     std::to_string(cells.size()));
  }
  GrayImage out{cols * side + cols - 1, rows * side + rows - 1, {}};
  out.pixels.assign(out.width * out.height, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const GrayImage cell = to_gray(cells[r * cols + c], side, side);
      const std::size_t top = r * (side + 1);
      const std::size_t left = c * (side + 1);
      for (std::size_t y = 0; y < side; ++y) {
        std::copy_n(cell.pixels.begin() + static_cast<std::ptrdiff_t>(y * side), side,
                    out.pixels.begin() + static_cast<std::ptrdiff_t>((top + y) * out.width + left));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  return bytes;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) { write_bytes(path, encode_pgm(image)); }

}  // namespace ivg
