#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairvc {

// All recoverable failures surface as Error; the CLI maps what() to a
// single-line "error: ..." on stderr.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

// FNV-1a, 64-bit. Used for config hashing and parameter-blob hashing.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 14695981039346656037ull) {
    return fnv1a(s.data(), s.size(), h);
}

// Keeps string literals away from the (void*, size_t) overload above.
inline uint64_t fnv1a(const char* s, uint64_t h = 14695981039346656037ull) {
    return fnv1a(std::string(s), h);
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Deterministic RNG. One mt19937_64 per independent stream; streams are
// derived from a base seed plus a purpose tag so that adding a new consumer
// does not shift existing draws.
using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t seed, const std::string& stream) {
    uint64_t h = fnv1a(stream, fnv1a(&seed, sizeof seed));
    return Rng(h);
}

// mt19937_64 state serialization; checkpoints carry this so resumed runs
// replay the same draw sequence.
inline std::string rng_state(const Rng& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

inline void set_rng_state(Rng& r, const std::string& s) {
    std::istringstream is(s);
    is >> r;
    if (is.fail()) fail("invalid rng state string");
}

inline double uniform(Rng& r, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(r);
}

inline double normal(Rng& r, double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(r);
}

inline int64_t uniform_int(Rng& r, int64_t lo, int64_t hi) {  // inclusive
    return std::uniform_int_distribution<int64_t>(lo, hi)(r);
}

// Lower-of-two-middles median, exact for even counts. Callers rely on the
// result being an element of the input.
inline double median_lower(std::vector<double> v) {
    if (v.empty()) fail("median of empty vector");
    size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

}  // namespace pairvc
