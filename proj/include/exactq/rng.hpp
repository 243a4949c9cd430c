#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace exactq {

// Philox4x32-10 block cipher (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3", SC'11). Counter-based: output is a pure function of
// (key, counter), so streams can be split by key and skipped by counter.
namespace philox {

constexpr uint32_t kW32A = 0x9E3779B9u;
constexpr uint32_t kW32B = 0xBB67AE85u;
constexpr uint32_t kM4x32A = 0xD2511F53u;
constexpr uint32_t kM4x32B = 0xCD9E8D57u;

inline void round_once(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
    const uint64_t p0 = static_cast<uint64_t>(kM4x32A) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kM4x32B) * ctr[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW32A;
    key[1] += kW32B;
}

inline std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) round_once(ctr, key);
    return ctr;
}

}  // namespace philox

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream roles keep logically distinct draws on disjoint counters so a
// scenario can be replayed no matter how other draws interleave.
namespace stream_role {
constexpr uint32_t arrival = 0;        // nominal interarrival draws (Y walk)
constexpr uint32_t routing = 1;        // nominal routing marks (Y walk)
constexpr uint32_t tilt = 2;           // tilted up-crossing proposals + accept coins
constexpr uint32_t forward = 3;        // forward extension past time 0
constexpr uint32_t harness = 4;        // test/statistics side draws
constexpr uint32_t extension = 5;      // extension samplers (equilibrium, disciplines, FJ)
constexpr uint32_t service_base = 16;  // + server index: lazy per-server service draws
}  // namespace stream_role

// One logical random stream: (seed, replication, role) -> iid U(0,1)/etc.
class RngStream {
public:
    RngStream() : RngStream(0, 0, 0) {}
    RngStream(uint64_t seed, uint64_t replication, uint32_t role) : role_(role) {
        const uint64_t k = splitmix64(seed ^ splitmix64(replication));
        key_ = {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
    }

    uint64_t next_u64() {
        if (have_ == 0) {
            const std::array<uint32_t, 4> ctr = {static_cast<uint32_t>(idx_),
                                                 static_cast<uint32_t>(idx_ >> 32), role_, 0u};
            buf_ = philox::block(ctr, key_);
            ++idx_;
            have_ = 2;
        }
        --have_;
        const int b = 2 * have_;
        return (static_cast<uint64_t>(buf_[b]) << 32) | buf_[b + 1];
    }

    // Uniform on the open interval (0,1); safe to feed into logs.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Uniform on {0, ..., n-1} without modulo bias (Lemire with rejection).
    int uniform_int(int n) {
        const uint64_t nn = static_cast<uint64_t>(n);
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * nn;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < nn) {
            const uint64_t cutoff = (0ull - nn) % nn;  // 2^64 mod n
            while (lo < cutoff) {
                m = static_cast<unsigned __int128>(next_u64()) * nn;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<int>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::array<uint32_t, 2> key_;
    uint32_t role_;
    uint64_t idx_ = 0;
    std::array<uint32_t, 4> buf_{};
    int have_ = 0;
};

}  // namespace exactq
