#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace pairsonic {

/// Source of the random bytes behind session ids and nonces. Sessions draw
/// from it only while being constructed.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

/// Reproducible stream for simulations and tests. Not cryptographically
/// secure.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Operating-system CSPRNG.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

}  // namespace pairsonic
