#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

namespace lbft::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Independent deterministic streams: each simulator concern (lottery, network
// delays, per-node tie breaks, ...) gets its own engine so that adding draws
// to one stream never shifts another.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
    return splitmix64(master ^ splitmix64(salt + 0x51a5f51a5ull));
}

// mt19937_64 is fully specified by the standard, so identical seeds give
// identical streams on every platform. Distributions are hand-rolled below
// for the same reason (std:: distribution algorithms are not pinned).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // (lo, hi]
    double uniform_in(double lo, double hi) { return hi - (hi - lo) * uniform01(); }

    double exponential(double rate) { return -std::log(1.0 - uniform01()) / rate; }

    // [0, n), Lemire's bounded rejection
    std::uint64_t bounded(std::uint64_t n) {
        if (n <= 1) return 0;
        while (true) {
            std::uint64_t x = eng_();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (0ull - n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    std::uint64_t poisson(double mu) {
        return mu < 10.0 ? poisson_inversion(mu) : poisson_ptrs(mu);
    }

    // k distinct values from [0, n) \ {exclude}, ascending
    std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t k,
                                               std::uint32_t exclude) {
        std::set<std::uint32_t> chosen;
        std::uint32_t avail = n - (exclude < n ? 1 : 0);
        if (k > avail) k = avail;
        while (chosen.size() < k) {
            auto v = static_cast<std::uint32_t>(bounded(n));
            if (v != exclude) chosen.insert(v);
        }
        return {chosen.begin(), chosen.end()};
    }

  private:
    std::uint64_t poisson_inversion(double mu) {
        const double limit = std::exp(-mu);
        double prod = 1.0;
        std::uint64_t k = 0;
        do {
            ++k;
            prod *= uniform01();
        } while (prod > limit);
        return k - 1;
    }

    // Hormann's transformed rejection (the usual choice for mu >= 10).
    std::uint64_t poisson_ptrs(double mu) {
        const double slam = std::sqrt(mu);
        const double loglam = std::log(mu);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        while (true) {
            double u = uniform01() - 0.5;
            double v = uniform01();
            if (v <= 0.0) continue;
            double us = 0.5 - std::fabs(u);
            double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
            if (kf < 0.0) continue;
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
            if (us < 0.013 && v > us) continue;
            double lhs = std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b);
            double rhs = kf * loglam - mu - std::lgamma(kf + 1.0);
            if (lhs <= rhs) return static_cast<std::uint64_t>(kf);
        }
    }

    std::mt19937_64 eng_;
};

}  // namespace lbft::detail
