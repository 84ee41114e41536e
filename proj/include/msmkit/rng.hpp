#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace msmkit {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Deterministic keyed random stream (xoshiro256** core, SplitMix64 keying).
//
// Streams are value types: copying forks the sequence, and independent
// streams are obtained by constructing from distinct key tuples, e.g.
// (master seed, replication index, stream role). This is what makes the
// replication loop parallelize deterministically: no generator state is
// ever shared between replications.
class RngStream {
 public:
  RngStream() : RngStream(0, 0, 0, 0) {}
  explicit RngStream(std::uint64_t k0, std::uint64_t k1 = 0, std::uint64_t k2 = 0,
                     std::uint64_t k3 = 0) {
    // Fold the key tuple through SplitMix64 so that nearby keys (seed,
    // seed+1, ...) yield unrelated states.
    std::uint64_t s = 0x243f6a8885a308d3ULL;  // arbitrary nonzero offset
    for (std::uint64_t k : {k0, k1, k2, k3}) {
      s ^= detail::splitmix64(k) + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    }
    for (auto& word : state_) word = detail::splitmix64(s);
    if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the polar method. Distributions are hand-rolled so
  // results do not depend on the standard library implementation.
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape < 1 handled by the boosting identity.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

  // Derives an independent substream; consumes two words of this stream,
  // so derivation order matters and must itself be deterministic.
  RngStream child(std::uint64_t role) {
    const std::uint64_t a = next_u64();
    const std::uint64_t b = next_u64();
    return RngStream(a, b, role, 0x5851f42d4c957f2dULL);
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

// Stream roles used to key the per-replication substreams.
enum class StreamRole : std::uint64_t {
  Generate = 1,
  Mask = 2,
  Imputation = 3,
  Bootstrap = 4,
  Oracle = 5,
  Calibration = 6,
};

inline RngStream make_stream(std::uint64_t master_seed, std::uint64_t replication,
                             StreamRole role) {
  return RngStream(master_seed, replication, static_cast<std::uint64_t>(role));
}

}  // namespace msmkit
