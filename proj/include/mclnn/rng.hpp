#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace mclnn {

// Deterministic generator with hand-rolled distributions so streams are
// reproducible across standard libraries, not just across runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // xorshift64* keeps the generator self-contained and portable.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = n == 0 ? 0 : (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::uint64_t state_;
};

// Seed splitting: every stochastic stage gets its own stream derived from the
// run seed, a stage tag, and optional indices. Documented in the README so a
// run is reproducible from the single --seed value.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stage,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : stage) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    std::uint64_t s = mix(base ^ h);
    s = mix(s ^ a);
    s = mix(s ^ b);
    return s;
}

}  // namespace mclnn
