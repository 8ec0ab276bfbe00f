#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nnattr {

/// Deterministic normal sampler. std::normal_distribution is implementation
/// defined, so Box-Muller over raw mt19937_64 draws keeps generated models and
/// SmoothGrad perturbations identical across compilers for a given seed.
class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  private:
    /// Uniform in (0, 1]; safe for log().
    double uniform_open() { return 1.0 - uniform01(); }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace nnattr
