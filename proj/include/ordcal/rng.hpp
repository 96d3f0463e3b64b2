#pragma once

#include <cstdint>
#include <string_view>

namespace ordcal {

// Counter-based generator: draw i is splitmix64 finalization of seed + (i+1) * golden gamma.
class CounterRng {
 public:
  static constexpr std::string_view id = "splitmix64-counter/inverse-cdf-normal";

  explicit CounterRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1) from the top 53 bits.
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  // Standard normal by inverse CDF of one uniform.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  // Index drawn from cumulative weights cum[0..K-1] (cum[K-1] == 1).
  template <typename Vector>
  int categorical(const Vector& cum) {
    const double u = uniform();
    const int K = static_cast<int>(cum.size());
    for (int k = 0; k + 1 < K; ++k)
      if (u < cum[k]) return k;
    return K - 1;
  }

 private:
  std::uint64_t state_;
};

// Stream for replicate r of a run seeded with base.
inline std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t r) { return base ^ r; }

}  // namespace ordcal
