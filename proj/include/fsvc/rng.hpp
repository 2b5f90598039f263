#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace fsvc {

/// Counter-based random stream (Philox4x32-10).
///
/// The 64-bit seed is the Philox key and the stream id occupies the upper
/// half of the 128-bit counter, so every (seed, stream_id) pair addresses a
/// disjoint block sequence. Draws depend only on integer arithmetic and are
/// identical on every platform; the floating-point helpers are built from
/// those integers with no dependence on <random> distributions.
class RngStream {
 public:
  using Block = std::array<std::uint32_t, 4>;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();
  /// Exponential with rate 1.
  double exponential();

  /// First `count` entries of a uniformly random permutation of 0..n-1
  /// (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

  /// Raw Philox4x32-10 block function, exposed for known-answer tests.
  static Block philox(Block counter, std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int buffered_ = 0;  // 32-bit words left in buffer_
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// 64-bit FNV-1a, used for configuration and weight fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace fsvc
