#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace atomident {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The key is the 64-bit seed and the upper half of the 128-bit counter is a
/// stream id. Satisfies UniformRandomBitGenerator with a 64-bit result type.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Skip `n` 64-bit outputs.
  void discard(std::uint64_t n);

  /// Raw bijection, exposed for known-answer tests.
  static Block encrypt(Block counter, Key key);

 private:
  void refill();

  Key key_{};
  Block counter_{};
  Block buffer_{};
  int used_ = 4;  // 32-bit words consumed from buffer_
};

using Rng = Philox4x32;

/// Mixes a base seed and a purpose tag into a fresh seed (splitmix64
/// finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace atomident
