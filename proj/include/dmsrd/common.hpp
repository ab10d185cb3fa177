#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmsrd {

using Vec = std::vector<double>;

// Error taxonomy shared by the whole engine. Exit codes in the CLI map
// onto these: ConfigError -> 2, NumericalError/TrainingError -> 3,
// IntegrityError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

// Deterministic random stream. Gaussian draws use Box-Muller on raw
// uniforms instead of std::normal_distribution so sequences are stable
// across standard-library implementations.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Independent child stream; used to give parallelizable work units
    // (rollouts, search candidates) their own deterministic sequence.
    RandomStream spawn(std::uint64_t salt) {
        std::uint64_t s = engine_();
        return RandomStream(s ^ (salt * 0x9E3779B97F4A7C15ull));
    }

  private:
    std::mt19937_64 engine_;
};

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace dmsrd
