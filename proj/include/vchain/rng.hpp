#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>

#include "vchain/bytes.hpp"

namespace vchain {

using Big = mpz_class;

/// Deterministic byte stream: SHA-256 in counter mode over a seed.
/// Used for reproducible key ceremonies and test data; callers that need
/// real entropy seed it from the OS (see Drbg::from_os_entropy).
class Drbg {
public:
    explicit Drbg(BytesView seed);
    explicit Drbg(uint64_t seed);
    static Drbg from_os_entropy();

    void fill(uint8_t* out, size_t n);
    Bytes bytes(size_t n);
    uint64_t u64();
    /// Uniform in [0, bound), bound > 0.
    uint64_t below(uint64_t bound);
    /// Uniform in [0, m) by wide reduction (64 excess bits).
    Big big_below(const Big& m);

private:
    std::array<uint8_t, 32> key_{};
    uint64_t counter_ = 0;
    std::array<uint8_t, 32> block_{};
    size_t avail_ = 0;
};

} // namespace vchain
