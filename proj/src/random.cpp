#include "infovaegan/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ivg {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seeded_engine(seed, 0)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

Rng Rng::substream(std::uint64_t salt) const {
  Rng r(seed_);
  r.engine_ = seeded_engine(seed_, salt + 1);
  return r;
}

std::vector<std::uint64_t> Rng::state() const {
  std::stringstream ss;
  ss << engine_;
  std::vector<std::uint64_t> words{seed_};
  std::uint64_t w = 0;
  while (ss >> w) words.push_back(w);
  return words;
}

Rng Rng::from_state(const std::vector<std::uint64_t>& words) {
  if (words.empty()) throw std::invalid_argument("Rng::from_state: empty state");
  Rng r(words[0]);
  std::stringstream ss;
  for (std::size_t i = 1; i < words.size(); ++i) ss << words[i] << ' ';
  ss >> r.engine_;
  if (ss.fail()) throw std::invalid_argument("Rng::from_state: malformed engine state");
  return r;
}

}  // namespace ivg
