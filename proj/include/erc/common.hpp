#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace erc {

// Exit-code carrying error categories (CLI maps them to 1/2/3).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG. mt19937_64 output is pinned by the standard and the
// transforms below avoid the implementation-defined std distributions, so
// identical seeds give identical streams on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(gen_() % static_cast<uint64_t>(hi - lo + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    uint64_t next_u64() { return gen_(); }

    // Derived stream, decorrelated from the parent by a fixed mix.
    Rng fork(uint64_t stream) {
        return Rng(gen_() ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace erc
