#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ino {

/// Counter-based 64-bit generator.
///
/// Draw n of a stream with key k is mix64(k + n * kGolden), where mix64 is the
/// SplitMix64 finalizer. The output depends only on (key, counter), so a
/// stream can be replayed from any point and is identical on every platform.
///
/// Streams split deterministically: split(id) derives a child key from the
/// parent key and the id without advancing the parent. Named splits hash the
/// name with FNV-1a first. Independent consumers (data sampling, masking,
/// parameter init, augmentation) each take their own child stream.
class Rng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

    static constexpr std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t hash_name(std::string_view name) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ULL;
        }
        return h;
    }

    std::uint64_t next_u64() { return mix64(key_ + kGolden * ++counter_); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Uses rejection to stay unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (one draw per call, two uniforms consumed).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Normal(0, std) truncated to [-2 std, 2 std] by rejection.
    double truncated_normal(double std) {
        for (;;) {
            const double z = normal();
            if (z >= -2.0 && z <= 2.0) return z * std;
        }
    }

    Rng split(std::uint64_t stream) const {
        Rng child;
        child.key_ = mix64(key_ ^ mix64(stream + kGolden));
        child.counter_ = 0;
        return child;
    }

    Rng split(std::string_view name) const { return split(hash_name(name)); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace ino
