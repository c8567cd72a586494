#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace simlab {

/// Identifies one logical random stream.  Identical (seed, stream_id)
/// reproduces the exact same draw sequence bit for bit; replicas and sweep
/// points get distinct stream_ids.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    RngStream with_stream(std::uint64_t id) const { return RngStream{seed, id}; }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
} // namespace detail

/// Deterministic Gaussian source.  Box-Muller on top of mt19937_64 so the
/// draw sequence does not depend on the standard library's
/// normal_distribution implementation.
class GaussianSampler {
  public:
    explicit GaussianSampler(RngStream stream) {
        std::uint64_t s = stream.seed ^ (0xD1B54A32D192ED03ull * (stream.stream_id + 1));
        std::seed_seq seq{detail::splitmix64(s), detail::splitmix64(s),
                          detail::splitmix64(s), detail::splitmix64(s)};
        engine_.seed(seq);
    }

    /// standard normal draw
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    /// uniform in (0, 1]
    double uniform_open() {
        return 1.0 - std::ldexp(static_cast<double>(engine_() >> 11), -53);
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace simlab
