#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mmsyn {

// Counter-based generator used for every random draw in the simulator.
// Stored in run records so other implementations can replay a run.
inline constexpr const char* kRngAlgorithm = "philox4x32-10";

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += detail::kPhiloxW0;
            key[1] += detail::kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo(detail::kPhiloxM0, ctr[0], hi0, lo0);
        detail::mulhilo(detail::kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Maps 64 random bits to a double in the open interval (0, 1).
inline double bits_to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Stream identifiers are namespaced by purpose so that, for example, the
/// programming noise of device 17 never shares draws with input spikes of
/// stream 17.
enum class StreamPurpose : std::uint8_t {
    DeviceProgram = 1,
    DeviceRead = 2,
    Initialization = 3,
    InputSpikes = 4,
    Characterization = 5,
    Experiment = 6,
};

constexpr std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
    return (static_cast<std::uint64_t>(purpose) << 56) | (index & 0x00FFFFFFFFFFFFFFull);
}

/// SplitMix64 finalizer; derives independent seeds for sub-experiments.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// A named, seekable random stream. Draw number `i` of stream `s` under seed
/// `k` is the pure function philox(ctr = {i, s}, key = k), so streams can be
/// advanced independently, in any order and on any thread.
///
/// Every draw consumes exactly one 128-bit block: `uniform()` uses the low
/// 64 bits, `normal()` uses all 128 for a Box-Muller transform.
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t position = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream),
          position_(position) {}

    PhiloxBlock block_at(std::uint64_t position) const {
        return philox4x32_10({static_cast<std::uint32_t>(position),
                              static_cast<std::uint32_t>(position >> 32),
                              static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32)},
                             key_);
    }

    PhiloxBlock next_block() { return block_at(position_++); }

    double uniform() {
        const PhiloxBlock b = next_block();
        return bits_to_unit(b[0], b[1]);
    }

    double normal() {
        const PhiloxBlock b = next_block();
        const double u1 = bits_to_unit(b[0], b[1]);
        const double u2 = bits_to_unit(b[2], b[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    std::uint64_t position() const { return position_; }
    void seek(std::uint64_t position) { position_ = position; }
    std::uint64_t stream() const { return stream_; }

private:
    PhiloxKey key_{0, 0};
    std::uint64_t stream_ = 0;
    std::uint64_t position_ = 0;
};

}  // namespace mmsyn
