#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hypou {

// Stateless mixer used to derive independent per-task seeds from a master
// seed without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t task_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x517cc1b727220a95ULL));
}

// mt19937_64 with explicit float conversion and Box-Muller so streams are
// bit-reproducible across platforms and standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) {
        return -std::log(1.0 - uniform()) / rate;
    }

    int uniform_int(int n) {  // {0, ..., n-1}
        const int v = static_cast<int>(uniform() * n);
        return v < n ? v : n - 1;
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace hypou
