#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mgm {

// splitmix64 step. Used both as a seed mixer and as the generation PRNG so
// sampled output is identical on every platform (std <random> distributions
// are not portable).
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}
    uint64_t next_u64() { return splitmix64(state_); }
    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derived seed for sample i of a given prompt: order- and
// concurrency-independent, so parallel runs reproduce serial ones.
inline uint64_t derive_seed(uint64_t base_seed, std::string_view prompt, uint64_t index) {
    uint64_t s = base_seed ^ fnv1a64(prompt);
    s ^= 0x632be59bd9b4e019ULL * (index + 1);
    uint64_t state = s;
    return splitmix64(state);
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }

inline std::string trim_right(std::string_view s) {
    size_t end = s.size();
    while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\n' || s[end - 1] == '\r'))
        --end;
    return std::string(s.substr(0, end));
}

}  // namespace mgm
