#ifndef CMOEA_RNG_HPP
#define CMOEA_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace cmoea {

namespace detail {

// splitmix64 finalizer, also used as a general 64-bit avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

// Deterministic splitmix64 generator. All randomness in the library flows
// through named streams derived from a master seed, so results never depend
// on scheduling or worker count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return detail::mix64(state_);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform in [0, n); n must be > 0
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream from a master seed, a label and up to two
// counters (e.g. generation and child index).
inline Rng stream(std::uint64_t master, std::string_view label,
                  std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = detail::mix64(master ^ detail::fnv1a(label));
    s = detail::mix64(s ^ (a * 0x9e3779b97f4a7c15ull + 1));
    s = detail::mix64(s ^ (b * 0xd1342543de82ef95ull + 1));
    return Rng(s);
}

} // namespace cmoea

#endif
