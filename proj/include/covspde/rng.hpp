#pragma once

#include <array>
#include <cstdint>

namespace covspde {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

/// Stream identifiers. A draw is a pure function of (seed, stream, index, block),
/// so no value ever depends on which worker produced it.
enum class Stream : std::uint32_t {
  PoissonCount = 1,
  Atom = 2,
  GaussMode = 3,
  Probe = 4,
  Test = 5,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream, std::uint64_t index);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform();
  double normal();
  /// Poisson variate: inversion for small means, PTRS (Hoermann 1993) otherwise.
  std::uint64_t poisson(double mean);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> ctr_{};
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace covspde
