#pragma once

#include <cstdint>
#include <random>

namespace swg {

// All randomness in the pipeline flows through one of these, seeded
// explicitly, so every run is reproducible from the manifest seed.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : gen_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }
    uint64_t next_u64() { return gen_(); }
    size_t index(size_t n) {
        return std::uniform_int_distribution<size_t>(0, n - 1)(gen_);
    }
    // Child generator for a parallel-safe, order-independent substream.
    Rng fork() { return Rng(gen_()); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace swg
