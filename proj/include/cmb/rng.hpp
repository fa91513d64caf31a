#ifndef CMB_RNG_HPP
#define CMB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cmb {

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard; the distribution helpers below are hand-rolled so results do
// not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed), seed_hash_(splitmix(seed)) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // inclusive bounds
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(eng_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one deviate per two draws keeps the stream stateless.
    double normal(double mean = 0.0, double sd = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * M_PI * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent child stream (per subject, per epoch, ...).
    // Depends only on the construction seed, not on how much of this
    // stream has been consumed.
    Rng fork(uint64_t stream) const {
        return Rng(splitmix(seed_hash_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
    }

    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 eng_;
    uint64_t seed_hash_;
};

} // namespace cmb

#endif
