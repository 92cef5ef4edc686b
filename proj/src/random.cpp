#include "rawvid/random.hpp"

#include <cmath>
#include <numbers>

namespace rawvid {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t hash_string(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream derive_stream(std::uint64_t seed, std::string_view sequence_id, std::string_view stage,
                        std::uint64_t index) {
    std::uint64_t key = mix64(seed ^ 0x5851f42d4c957f2dULL);
    key = mix64(key ^ hash_string(sequence_id));
    key = mix64(key ^ hash_string(stage));
    key = mix64(key + mix64(index + 0x632be59bd9b4e019ULL));
    return RngStream(key);
}

}  // namespace rawvid
