#include "vchain/rng.hpp"

#include <openssl/rand.h>

#include <cstring>

#include "vchain/errors.hpp"

namespace vchain {

Drbg::Drbg(BytesView seed) {
    HashDigest h = sha256(seed);
    key_ = h.d;
}

Drbg::Drbg(uint64_t seed) {
    ByteWriter w;
    w.raw(Bytes{'d', 'r', 'b', 'g'});
    w.u64(seed);
    key_ = sha256(w.out).d;
}

Drbg Drbg::from_os_entropy() {
    std::array<uint8_t, 32> buf;
    if (RAND_bytes(buf.data(), buf.size()) != 1) throw Error("OS entropy unavailable");
    return Drbg(BytesView(buf.data(), buf.size()));
}

void Drbg::fill(uint8_t* out, size_t n) {
    while (n > 0) {
        if (avail_ == 0) {
            ByteWriter w;
            w.raw(BytesView(key_.data(), key_.size()));
            w.u64(counter_++);
            block_ = sha256(w.out).d;
            avail_ = block_.size();
        }
        size_t take = std::min(n, avail_);
        std::memcpy(out, block_.data() + (block_.size() - avail_), take);
        avail_ -= take;
        out += take;
        n -= take;
    }
}

Bytes Drbg::bytes(size_t n) {
    Bytes b(n);
    fill(b.data(), n);
    return b;
}

uint64_t Drbg::u64() {
    uint8_t b[8];
    fill(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

uint64_t Drbg::below(uint64_t bound) {
    // rejection sampling over the smallest covering power of two
    uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
        uint64_t v = u64() & mask;
        if (v < bound) return v;
    }
}

Big Drbg::big_below(const Big& m) {
    size_t bits = mpz_sizeinbase(m.get_mpz_t(), 2);
    size_t nbytes = (bits + 7) / 8 + 8;
    Bytes buf = bytes(nbytes);
    Big v;
    mpz_import(v.get_mpz_t(), buf.size(), 1, 1, 0, 0, buf.data());
    return v % m;
}

} // namespace vchain
