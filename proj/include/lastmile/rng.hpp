#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace lastmile {

// Stateless 64-bit mixer (splitmix64 finalizer).  Used to derive independent
// seeds from a master seed plus a label, so that adding a consumer of
// randomness never perturbs the streams of existing consumers.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace detail {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ULL;

constexpr std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffU;
        h *= kFnvPrime;
    }
    return h;
}
}  // namespace detail

// Derive a child seed from (base, label, indices...).  Every random decision
// in the library draws from a stream seeded this way; the derivation is pure
// arithmetic and therefore identical on every platform.
template <class... Ix>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view label, Ix... idx) {
    std::uint64_t h = detail::fnv1a(detail::kFnvOffset, mix64(base));
    h = detail::fnv1a(h, label);
    ((h = detail::fnv1a(h, static_cast<std::uint64_t>(idx))), ...);
    return mix64(h);
}

// Deterministic generator wrapper.  All floating draws go through
// uniform01(), never std::uniform_real_distribution, whose output is
// implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform double in [0, 1): top 53 bits of one 64-bit draw.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n), n > 0.  Rejection-free multiply-shift would
    // bias for huge n; rejection sampling keeps it exact and portable.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    // Fisher-Yates, explicit so the sequence of draws is pinned.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Sample k distinct indices from [0, n) in selection order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t taken = 0; taken < k && taken < n; ++taken) {
            std::size_t j = taken + index(n - taken);
            std::swap(pool[taken], pool[j]);
            out.push_back(pool[taken]);
        }
        return out;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace lastmile
