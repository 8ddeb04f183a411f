#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acr {

/// splitmix64 generator. Used instead of <random> engines+distributions because
/// artifact bytes must not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [lo, hi], inclusive. Requires lo <= hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(span == 0 ? next_u64() : next_u64() % span);
    }

    /// Uniform in [0, 1).
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

    bool bernoulli(double p) { return uniform_real() < p; }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Independent child stream; adding streams never perturbs existing ones.
    Rng split(std::uint64_t key) const {
        Rng child(state_ ^ (key * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        child.next_u64();
        return child;
    }

private:
    std::uint64_t state_;
};

/// FNV-1a over bytes, with the seed folded into the offset basis.
std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed = 0);

/// Lowercase hex rendering of a 64-bit hash.
std::string hash_hex(std::uint64_t h);

}  // namespace acr
