#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace starpath {

/// 64-bit FNV-1a, used for dataset checksums and problem fingerprints.
class Fnv1a {
public:
    Fnv1a& bytes(const void* p, std::size_t len) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= c[i];
            state_ *= 0x100000001b3ull;
        }
        return *this;
    }
    Fnv1a& u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        return bytes(b, 8);
    }
    Fnv1a& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
    Fnv1a& str(std::string_view s) { return u64(s.size()).bytes(s.data(), s.size()); }
    Fnv1a& f64s(std::span<const double> v) {
        for (double x : v) f64(x);
        return *this;
    }

    std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace starpath
