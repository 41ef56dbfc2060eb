#pragma once

// Counter-based random streams.
//
// Every stream is a Philox4x64-10 generator keyed by the experiment seed.
// The 256-bit counter is laid out as {block, stream, substream, 0}, so any
// (seed, stream, substream) triple addresses its own sequence without
// touching shared state. Trial i of an experiment always reads stream i,
// which is what makes results independent of how trials are scheduled.

#include <array>
#include <cstdint>
#include <limits>

namespace haldane {

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                      std::uint64_t& lo) {
  const unsigned __int128 product =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  hi = static_cast<std::uint64_t>(product >> 64);
  lo = static_cast<std::uint64_t>(product);
}

inline constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
inline constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
inline constexpr std::uint64_t kPhiloxW0 = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kPhiloxW1 = 0xBB67AE8584CAA73BULL;

}  // namespace detail

/// The Philox4x64 bijection with 10 rounds.
inline PhiloxCounter philox4x64(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    detail::mulhilo64(detail::kPhiloxM0, ctr[0], hi0, lo0);
    detail::mulhilo64(detail::kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// A UniformRandomBitGenerator addressed by (seed, stream, substream).
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0,
                        std::uint64_t substream = 0)
      : key_{seed, 0}, counter_{0, stream, substream, 0} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (pos_ == buffer_.size()) {
      buffer_ = philox4x64(counter_, key_);
      ++counter_[0];
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform01() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// A fresh stream with the same seed and stream id but another substream.
  [[nodiscard]] RandomStream fork(std::uint64_t substream) const {
    return RandomStream(key_[0], counter_[1], substream);
  }

  std::uint64_t seed() const { return key_[0]; }
  std::uint64_t stream() const { return counter_[1]; }
  std::uint64_t substream() const { return counter_[2]; }

 private:
  PhiloxKey key_;
  PhiloxCounter counter_;
  PhiloxCounter buffer_{};
  std::size_t pos_ = 4;
};

}  // namespace haldane
