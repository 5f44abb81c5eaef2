#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace starpath {

/// Philox4x32-10 block function (Salmon et al., Random123).
/// Maps a 128-bit counter and 64-bit key to 128 random bits.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Purpose tags that keep the substreams of one seed disjoint.
enum class Stream : std::uint32_t {
    schedule = 1,
    problem_data = 2,
    planted = 3,
    init = 4,
    subset = 5,
    blobs = 6,
    lipschitz = 7,
    test = 0xFFu,
};

/// Random-access generator keyed by (seed, purpose, index).
///
/// Output depends only on the key and the position in the stream, so any
/// substream (e.g. the permutation of epoch B) is reproducible without
/// replaying the others.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream purpose, std::uint64_t index = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_hi_(static_cast<std::uint32_t>(purpose)),
          stream_lo_(index) {}

    std::uint64_t next_u64() {
        if (avail_ == 0) refill();
        --avail_;
        return buffer_[avail_];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, bound); Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t bound) {
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<__uint128_t>(next_u64()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; both variates of a pair are used.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    void refill() {
        // Counter layout: {block, purpose, index lo, index hi}. 2^32 blocks per substream.
        const std::array<std::uint32_t, 4> ctr{block_, stream_hi_,
                                               static_cast<std::uint32_t>(stream_lo_),
                                               static_cast<std::uint32_t>(stream_lo_ >> 32)};
        const auto out = philox4x32(ctr, key_);
        ++block_;
        buffer_[1] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[0] = (std::uint64_t{out[3]} << 32) | out[2];
        avail_ = 2;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_hi_;
    std::uint64_t stream_lo_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int avail_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace starpath
