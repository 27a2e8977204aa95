#pragma once

#include <cstdint>

namespace skgc {

/// Substreams of a NoiseStream. Draws for different purposes never collide.
enum class NoisePurpose : std::uint32_t {
  init = 1,
  shuffle = 2,
  beta_sample = 3,
  concrete_sample = 4,
  gaussian_sample = 5,
  dropout = 6,
  prior = 7,
  label_propagation = 8,
  evaluation = 9,
};

/// Counter-based pseudorandom source. Every draw is a pure function of
/// (seed, purpose, step, row, column), so results do not depend on the order
/// in which rows are visited or on how work is split across threads.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(NoisePurpose purpose, std::uint64_t step, std::uint64_t row,
                     std::uint64_t col) const;

  /// Uniform in the open interval (0, 1).
  double uniform(NoisePurpose purpose, std::uint64_t step, std::uint64_t row,
                 std::uint64_t col) const;

  /// Standard normal (Box-Muller over two independent lanes).
  double normal(NoisePurpose purpose, std::uint64_t step, std::uint64_t row,
                std::uint64_t col) const;

  /// Seed for a conventional engine dedicated to (purpose, step).
  std::uint64_t derive_seed(NoisePurpose purpose, std::uint64_t step) const;

  /// Sequential view over one (purpose, step) substream.
  class Cursor {
   public:
    Cursor(const NoiseStream& stream, NoisePurpose purpose, std::uint64_t step)
        : stream_(&stream), purpose_(purpose), step_(step) {}
    double uniform() { return stream_->uniform(purpose_, step_, 0, counter_++); }
    double normal() { return stream_->normal(purpose_, step_, 0, counter_++); }
    double operator()() { return uniform(); }

   private:
    const NoiseStream* stream_;
    NoisePurpose purpose_;
    std::uint64_t step_;
    std::uint64_t counter_ = 0;
  };

  Cursor cursor(NoisePurpose purpose, std::uint64_t step) const { return {*this, purpose, step}; }

 private:
  std::uint64_t seed_;
};

}  // namespace skgc
