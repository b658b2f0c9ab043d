#pragma once

#include <cstdint>
#include <random>

namespace colddamp {

namespace detail {
// SplitMix64 finalizer; good avalanche, cheap.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Deterministic per-source seed derivation. Streams are keyed by a stable
/// (domain, index) pair, so adding a noise source or a mode never changes
/// the stream any existing source draws from.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t domain, std::uint64_t index) {
    std::uint64_t h = detail::splitmix64(root ^ (0x517cc1b727220a95ull * (domain + 1)));
    return detail::splitmix64(h ^ (0x2545f4914f6cdd1dull * (index + 1)));
}

/// Stream domains used by the simulator and the scenario runner.
struct SeedDomain {
    static constexpr std::uint64_t thermal = 1;        // index = mode position
    static constexpr std::uint64_t electronic = 2;     // index = 0
    static constexpr std::uint64_t initial_state = 3;  // index = mode position
    static constexpr std::uint64_t task = 4;           // index = ensemble member / sweep point
};

/// Standard-normal stream with an explicit seed.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace colddamp
