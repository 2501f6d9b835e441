#include "infovaegan/data.hpp"

#include <cmath>
#include <string>

namespace ivg {

namespace {

bool covers(SpriteShape shape, std::size_t size, std::size_t row, std::size_t col) {
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  const double dy = static_cast<double>(row) - centre;
  const double dx = static_cast<double>(col) - centre;
  const double s = static_cast<double>(size);
  switch (shape) {
    case SpriteShape::Square: {
      // Hollow outline, border a quarter of the sprite wide.
      const std::size_t border = std::max<std::size_t>(1, size / 4);
      return row < border || col < border || row >= size - border || col >= size - border;
    }
    case SpriteShape::Disk:
      return dx * dx + dy * dy <= (s / 2.0) * (s / 2.0);
    case SpriteShape::Cross:
      return std::abs(dx) <= s / 8.0 || std::abs(dy) <= s / 8.0;
  }
  return false;
}

std::size_t flat_index(const FactorSpec& spec, const Factors& f) {
  return (f[0] * spec.grid + f[1]) * spec.grid + f[2];
}

}  // namespace

std::string_view shape_name(std::size_t shape) {
  switch (shape) {
    case 0: return "square";
    case 1: return "disk";
    case 2: return "cross";
    default: throw ContractError("shape index out of range: " + std::to_string(shape));
  }
}

void FactorSpec::validate() const {
  if (grid < 2) throw ContractError("factor spec: grid must have at least 2 positions");
  if (sprite_size < 4) throw ContractError("factor spec: sprite_size must be >= 4");
  if (sprite_size > image_side) throw ContractError("factor spec: sprite larger than image");
  if (step() == 0) throw ContractError("factor spec: image too small for the position grid");
}

std::size_t FactorSpec::step() const { return (image_side - sprite_size) / (grid - 1); }

std::size_t FactorSpec::origin() const { return (image_side - sprite_size - step() * (grid - 1)) / 2; }

std::vector<double> render_sprite(const FactorSpec& spec, const Factors& factors) {
  const auto card = spec.cardinalities();
  for (std::size_t k = 0; k < kFactorCount; ++k) {
    if (factors[k] >= card[k]) {
      throw ContractError("render_sprite: factor " + std::to_string(k) + " value " + std::to_string(factors[k]) +
                          " outside [0, " + std::to_string(card[k]) + ")");
    }
  }
  const auto shape = static_cast<SpriteShape>(factors[0]);
  const std::size_t left = spec.origin() + spec.step() * factors[1];
  const std::size_t top = spec.origin() + spec.step() * factors[2];
  std::vector<double> image(spec.pixels(), 0.0);
  for (std::size_t r = 0; r < spec.sprite_size; ++r) {
    for (std::size_t c = 0; c < spec.sprite_size; ++c) {
      if (covers(shape, spec.sprite_size, r, c)) image[(top + r) * spec.image_side + left + c] = 1.0;
    }
  }
  return image;
}

std::vector<FactorSample> sample_batch(const FactorSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  const auto card = spec.cardinalities();
  std::vector<FactorSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Factors f{};
    for (std::size_t k = 0; k < kFactorCount; ++k) f[k] = rng.index(card[k]);
    out.push_back({f, render_sprite(spec, f)});
  }
  return out;
}

std::vector<FactorSample> fixed_factor_batch(const FactorSpec& spec, std::size_t factor_index, std::size_t value,
                                             std::size_t n, Rng& rng) {
  spec.validate();
  const auto card = spec.cardinalities();
  if (factor_index >= kFactorCount) throw ContractError("fixed_factor_batch: factor index out of range");
  if (value >= card[factor_index]) throw ContractError("fixed_factor_batch: value outside the factor's domain");
  std::vector<FactorSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Factors f{};
    for (std::size_t k = 0; k < kFactorCount; ++k) f[k] = k == factor_index ? value : rng.index(card[k]);
    out.push_back({f, render_sprite(spec, f)});
  }
  return out;
}

std::vector<FactorSample> all_samples(const FactorSpec& spec) {
  spec.validate();
  std::vector<FactorSample> out;
  out.reserve(spec.combinations());
  for (std::size_t s = 0; s < kShapeCount; ++s)
    for (std::size_t x = 0; x < spec.grid; ++x)
      for (std::size_t y = 0; y < spec.grid; ++y) {
        const Factors f{s, x, y};
        out.push_back({f, render_sprite(spec, f)});
      }
  return out;
}

Tensor images_tensor(std::span<const FactorSample> samples) {
  if (samples.empty()) throw ContractError("images_tensor: empty sample set");
  const std::size_t pixels = samples.front().image.size();
  std::vector<double> v;
  v.reserve(samples.size() * pixels);
  for (const auto& s : samples) {
    if (s.image.size() != pixels) throw ShapeError("images_tensor: images of different sizes");
    v.insert(v.end(), s.image.begin(), s.image.end());
  }
  return Tensor({samples.size(), pixels}, std::move(v));
}

SpriteDataset::SpriteDataset(FactorSpec spec) : spec_(spec), corpus_(all_samples(spec)) {}

Tensor SpriteDataset::sample_images(std::size_t n, Rng& rng) const {
  const auto card = spec_.cardinalities();
  const std::size_t pixels = spec_.pixels();
  std::vector<double> v;
  v.reserve(n * pixels);
  for (std::size_t i = 0; i < n; ++i) {
    Factors f{};
    for (std::size_t k = 0; k < kFactorCount; ++k) f[k] = rng.index(card[k]);
    const auto& img = corpus_[flat_index(spec_, f)].image;
    v.insert(v.end(), img.begin(), img.end());
  }
  return Tensor({n, pixels}, std::move(v));
}

}  // namespace ivg
