#include "skgc/noise.hpp"

#include <cmath>
#include <numbers>

namespace skgc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

double to_open_unit(std::uint64_t bits) {
  // 53 random bits, offset by half an ulp so 0 and 1 are never produced.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::uint64_t NoiseStream::bits(NoisePurpose purpose, std::uint64_t step, std::uint64_t row,
                                std::uint64_t col) const {
  std::uint64_t h = splitmix64(seed_);
  h = combine(h, static_cast<std::uint64_t>(purpose));
  h = combine(h, step);
  h = combine(h, row);
  return combine(h, col);
}

double NoiseStream::uniform(NoisePurpose purpose, std::uint64_t step, std::uint64_t row,
                            std::uint64_t col) const {
  return to_open_unit(bits(purpose, step, row, col));
}

double NoiseStream::normal(NoisePurpose purpose, std::uint64_t step, std::uint64_t row,
                           std::uint64_t col) const {
  const double u1 = uniform(purpose, step, row, 2 * col);
  const double u2 = uniform(purpose, step, row, 2 * col + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t NoiseStream::derive_seed(NoisePurpose purpose, std::uint64_t step) const {
  return bits(purpose, step, ~0ULL, ~0ULL);
}

}  // namespace skgc
