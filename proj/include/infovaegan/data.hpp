#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "infovaegan/random.hpp"
#include "infovaegan/tensor.hpp"

namespace ivg {

enum class SpriteShape : std::uint8_t { Square = 0, Disk = 1, Cross = 2 };

inline constexpr std::size_t kShapeCount = 3;
inline constexpr std::size_t kFactorCount = 3;  // shape, pos_x, pos_y

std::string_view shape_name(std::size_t shape);

/// Factor layout of the procedural sprite corpus: three shapes placed on a
/// grid x grid lattice of positions inside a square binary image.
struct FactorSpec {
  std::size_t image_side = 32;
  std::size_t sprite_size = 8;
  std::size_t grid = 8;

  void validate() const;
  std::size_t pixels() const { return image_side * image_side; }
  std::array<std::size_t, kFactorCount> cardinalities() const { return {kShapeCount, grid, grid}; }
  std::size_t combinations() const { return kShapeCount * grid * grid; }
  /// Pixel distance between neighbouring grid positions.
  std::size_t step() const;
  /// Top-left pixel of grid position 0.
  std::size_t origin() const;
};

using Factors = std::array<std::size_t, kFactorCount>;

struct FactorSample {
  Factors factors{};
  std::vector<double> image;  // image_side^2 values in {0, 1}
};

std::vector<double> render_sprite(const FactorSpec& spec, const Factors& factors);

std::vector<FactorSample> sample_batch(const FactorSpec& spec, std::size_t n, Rng& rng);
/// Factor `factor_index` held at `value`, the others drawn uniformly.
std::vector<FactorSample> fixed_factor_batch(const FactorSpec& spec, std::size_t factor_index, std::size_t value,
                                             std::size_t n, Rng& rng);
/// Every factor combination, shape-major then pos_x then pos_y.
std::vector<FactorSample> all_samples(const FactorSpec& spec);

/// Stack images into a batch x pixels tensor.
Tensor images_tensor(std::span<const FactorSample> samples);

/// Pre-rendered corpus used as the real-data stream during training.
class SpriteDataset {
 public:
  explicit SpriteDataset(FactorSpec spec);

  const FactorSpec& spec() const { return spec_; }
  const std::vector<FactorSample>& corpus() const { return corpus_; }
  /// n images drawn i.i.d. uniformly over factor combinations.
  Tensor sample_images(std::size_t n, Rng& rng) const;

 private:
  FactorSpec spec_;
  std::vector<FactorSample> corpus_;
};

}  // namespace ivg
