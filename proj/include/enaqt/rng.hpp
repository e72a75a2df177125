#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is identified by (seed, stream id); draw k of a stream is a pure
// function of (seed, stream, k), so trajectories can run in any order or on
// any thread and still see the same numbers.

#include <array>
#include <cmath>
#include <cstdint>

namespace enaqt {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block bijection(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
             std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    }
    return ctr;
  }

  Philox4x32(std::uint64_t seed, std::uint64_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        stream_lo_(std::uint32_t(stream)),
        stream_hi_(std::uint32_t(stream >> 32)) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t a = next_u32() >> 5, b = next_u32() >> 6;
    return (double(a) * 67108864.0 + double(b)) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  /// Exponential waiting time with the given rate; infinity for rate 0.
  double exponential(double rate) {
    if (!(rate > 0.0)) return INFINITY;
    return -std::log(uniform_pos()) / rate;
  }

  /// Uniform integer in [0, n).
  std::uint32_t below(std::uint32_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t m = std::uint64_t(next_u32()) * n;
    std::uint32_t low = std::uint32_t(m);
    if (low < n) {
      const std::uint32_t threshold = std::uint32_t(-n) % n;
      while (low < threshold) {
        m = std::uint64_t(next_u32()) * n;
        low = std::uint32_t(m);
      }
    }
    return std::uint32_t(m >> 32);
  }

  [[nodiscard]] std::uint64_t blocks_used() const { return block_; }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53, kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9, kW1 = 0xBB67AE85;

  void refill() {
    buf_ = bijection({std::uint32_t(block_), std::uint32_t(block_ >> 32), stream_lo_, stream_hi_},
                     key_);
    ++block_;
    pos_ = 0;
  }

  Key key_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t block_ = 0;
  Block buf_{};
  int pos_ = 4;
};

}  // namespace enaqt
