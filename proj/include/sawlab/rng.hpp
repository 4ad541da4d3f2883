#pragma once

#include <cmath>
#include <cstdint>

namespace sawlab {

// Counter-based stream: output i is a bijective mix of (key + i*gamma), so any
// (seed, stream) pair addresses an independent sequence with random access and
// no coordination between workers.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(derive_key(seed, stream)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform on the open interval (0,1); never returns 0 or 1, so logs are safe.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Inverse-CDF exponential with the given rate.
  double next_exponential(double rate) { return -std::log(next_unit()) / rate; }

  // Uniform over {0, ..., n-1}. n is tiny here (2d directions), so the
  // multiply-shift trick is unbiased enough; we still reject the sliver.
  int next_index(int n) {
    const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return static_cast<int>(x % n);
  }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t a = mix64(seed + kGamma);
    std::uint64_t b = mix64(stream + 0xbf58476d1ce4e5b9ULL);
    return mix64(a ^ (b + kGamma * 3));
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sawlab
