#ifndef IPGP_TYPES_HPP
#define IPGP_TYPES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace ipgp {

using vec = Eigen::VectorXd;
using mat = Eigen::MatrixXd;
using Eigen::Index;

inline vec linspace(double a, double b, Index n) {
    if (n == 1) return vec::Constant(1, a);
    return vec::LinSpaced(n, a, b);
}

// Counter-style splittable generator (SplitMix64 core). Every stochastic
// operation in the library takes an explicit seed and forks independent
// streams from it, so results do not depend on evaluation or thread order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

    vec normal_vec(Index n) {
        vec v(n);
        for (Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    vec rademacher_vec(Index n) {
        vec v(n);
        for (Index i = 0; i < n; ++i) v[i] = rademacher();
        return v;
    }

    vec uniform_vec(Index n, double a, double b) {
        vec v(n);
        for (Index i = 0; i < n; ++i) v[i] = uniform(a, b);
        return v;
    }

    // Independent stream derived from the original seed; insensitive to how
    // many draws this generator has already produced.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ + (stream + 1) * 0xd1b54a32d192ed03ull;
        z = (z ^ (z >> 29)) * 0xff51afd7ed558ccdull;
        z = (z ^ (z >> 32)) * 0xc4ceb9fe1a85ec53ull;
        return Rng(z ^ (z >> 32));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

} // namespace ipgp

#endif
