#pragma once

#include <cstdint>
#include <random>

namespace specgram {

// SplitMix64: used only to derive well-mixed seeds for the per-stream
// mt19937_64 engines.  Counter-based stream derivation keeps replications
// independent of execution order and thread count.
struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// Independent generator for stream `stream_id` under a master seed.
// stream 0 is the "main" stream; replication r uses stream r+1 by convention.
inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    SplitMix64 sm{master_seed ^ (0xD1B54A32D192ED03ULL * (stream_id + 1))};
    std::seed_seq seq{static_cast<std::uint32_t>(sm.next()), static_cast<std::uint32_t>(sm.next()),
                      static_cast<std::uint32_t>(sm.next()), static_cast<std::uint32_t>(sm.next()),
                      static_cast<std::uint32_t>(sm.next()), static_cast<std::uint32_t>(sm.next())};
    return std::mt19937_64(seq);
}

}  // namespace specgram
