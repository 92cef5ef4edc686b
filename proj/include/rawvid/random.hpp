#pragma once

#include <cstdint>
#include <string_view>

namespace rawvid {

/// Counter-based random stream. Draw n of a stream depends only on the key and n,
/// so streams derived from (seed, sequence id, stage, index) give identical bits
/// regardless of how work is scheduled across threads.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    /// Uniform in the open interval (0, 1); never returns 0 or 1.
    double uniform_open();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Box-Muller, both uniforms consumed per draw).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view text);

/// Stream for one (seed, sequence, stage, frame) cell.
RngStream derive_stream(std::uint64_t seed, std::string_view sequence_id, std::string_view stage,
                        std::uint64_t index = 0);

}  // namespace rawvid
