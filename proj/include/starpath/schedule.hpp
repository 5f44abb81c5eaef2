#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/rng.hpp"

namespace starpath {

/// One epoch's visiting order. order[t] is the component sampled at in-epoch step t.
using Permutation = std::vector<std::uint32_t>;

/// Fisher-Yates shuffle of {0..n-1} drawn from the substream keyed by (seed, epoch).
inline Permutation permute(std::uint64_t n, std::uint64_t seed, std::uint64_t epoch) {
    if (n == 0) throw InputError("permute: n must be positive");
    if (n > UINT32_MAX) throw InputError("permute: n exceeds 32-bit component ids");
    Permutation perm(n);
    std::iota(perm.begin(), perm.end(), std::uint32_t{0});
    CounterRng rng(seed, Stream::schedule, epoch);
    for (std::uint64_t i = n - 1; i > 0; --i) {
        const auto j = rng.below(i + 1);
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

/// Cyclic sampling with reshuffle.
///
/// Iteration k = n*B + t samples component order_B[t]. Components are 0-based;
/// in-epoch positions returned by inverse_position() are 1-based (t + 1), so
/// x_{nB + position} is the iterate right after component v was used.
class EpochSchedule {
public:
    EpochSchedule(std::uint64_t n, std::uint64_t seed) : n_(n), seed_(seed) {
        if (n == 0) throw InputError("EpochSchedule: n must be positive");
    }

    std::uint64_t n() const noexcept { return n_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::shared_ptr<const Permutation> epoch(std::uint64_t b) const { return entry(b).order; }

    /// Component sampled at iteration k.
    std::uint32_t sample_index(std::uint64_t k) const { return (*epoch(k / n_))[k % n_]; }

    /// 1-based position t+1 within epoch b at which component v is sampled.
    std::uint64_t inverse_position(std::uint64_t b, std::uint64_t v) const {
        if (v >= n_)
            throw InputError("inverse_position: component " + std::to_string(v) +
                             " out of range [0, " + std::to_string(n_) + ")");
        return std::uint64_t{(*entry(b).inverse)[v]} + 1;
    }

private:
    struct Entry {
        std::shared_ptr<const Permutation> order;
        std::shared_ptr<const Permutation> inverse;
    };
    static constexpr std::size_t kCacheLimit = 64;

    Entry entry(std::uint64_t b) const {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(b); it != cache_.end()) return it->second;
        if (cache_.size() >= kCacheLimit) cache_.clear();
        Entry e;
        e.order = std::make_shared<const Permutation>(permute(n_, seed_, b));
        Permutation inv(n_);
        for (std::uint32_t t = 0; t < n_; ++t) inv[(*e.order)[t]] = t;
        e.inverse = std::make_shared<const Permutation>(std::move(inv));
        cache_.emplace(b, e);
        return e;
    }

    std::uint64_t n_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    mutable std::map<std::uint64_t, Entry> cache_;
};

}  // namespace starpath
