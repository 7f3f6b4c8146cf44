#ifndef IMSRC_RNG_HPP
#define IMSRC_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace imsrc {

// SplitMix64 step. Cheap, full-period, and identical on every platform,
// which the reproducibility invariants require (std:: distributions are
// implementation-defined).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Sequential deterministic RNG stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (one value per call, no cached spare).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniformly random unit quaternion (w, x, y, z).
    std::array<double, 4> unit_quaternion() {
        std::array<double, 4> q{normal(), normal(), normal(), normal()};
        double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        while (n < 1e-12) {
            q = {normal(), normal(), normal(), normal()};
            n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        }
        for (double& v : q) v /= n;
        return q;
    }

  private:
    std::uint64_t state_;
};

/// Stateless counter-based standard normal: entry i of stream `seed` is the
/// same value no matter how many threads draw, or in what order.
inline double counter_normal(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    double u1 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Derives an independent sub-stream seed, e.g. per scenario index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0xd1342543de82ef95ULL * (index + 0x632be59bd9b4e019ULL));
    return splitmix64(s);
}

} // namespace imsrc

#endif
