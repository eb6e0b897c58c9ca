#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace perk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stable substream seed for (base, id); used anywhere one user-facing seed
// fans out into independent component seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id) {
    return splitmix64(base ^ splitmix64(id + 0x51ed2701u));
}

// Deterministic RNG: standardized mt19937_64 engine plus explicit inline
// distributions, so streams do not depend on libstdc++'s distribution
// internals. Substreams are derived from the original seed, not the
// engine state, so stream(id) is independent of how much the parent drew.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    Rng stream(std::uint64_t id) const { return Rng(derive_seed(seed_, id)); }

    std::uint64_t bits() { return eng_(); }

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one value per call (pair partner discarded for statelessness)
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // [0, n); modulo bias is O(n / 2^64), negligible for our index ranges
    std::uint64_t integer(std::uint64_t n) { return eng_() % n; }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

int hardware_threads();
void set_threads(int n);  // 0 restores the hardware default
int threads();

// Runs fn(chunk_index, begin, end) over [0, total) split into fixed-size
// chunks. Chunk boundaries never depend on the thread count, so per-chunk
// results reduced in chunk order are bitwise reproducible for any --threads.
void parallel_chunks(Index total, Index chunk_size,
                     const std::function<void(Index, Index, Index)>& fn);

struct PerkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw PerkError(msg);
}

}  // namespace perk
