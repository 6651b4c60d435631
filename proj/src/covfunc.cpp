#include "ipgp/covfunc.hpp"

#include <cmath>
#include <stdexcept>

namespace ipgp {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935274463415059;

void check_params(const MaternParams& p) {
    if (!(p.s2 > 0.0)) throw std::invalid_argument("matern: amplitude s2 must be > 0");
    if (!(p.omega > 0.0)) throw std::invalid_argument("matern: length scale omega must be > 0");
}

} // namespace

Nu nu_from_double(double nu) {
    if (nu == 0.5) return Nu::Half;
    if (nu == 1.5) return Nu::ThreeHalves;
    throw std::invalid_argument("matern: unsupported nu (use 0.5 or 1.5)");
}

double nu_to_double(Nu nu) { return nu == Nu::Half ? 0.5 : 1.5; }

double matern(const MaternParams& p, double r, double rp) {
    check_params(p);
    const double u = std::abs(r - rp);
    switch (p.nu) {
        case Nu::Half:
            return p.s2 * std::exp(-u / p.omega);
        case Nu::ThreeHalves: {
            const double t = kSqrt3 * u / p.omega;
            return p.s2 * (1.0 + t) * std::exp(-t);
        }
    }
    throw std::invalid_argument("matern: unsupported nu");
}

MaternGrad matern_grad(const MaternParams& p, double r, double rp) {
    check_params(p);
    const double u = std::abs(r - rp);
    MaternGrad g{};
    switch (p.nu) {
        case Nu::Half: {
            const double e = std::exp(-u / p.omega);
            g.d_s2 = e;
            g.d_omega = p.s2 * e * u / (p.omega * p.omega);
            return g;
        }
        case Nu::ThreeHalves: {
            const double t = kSqrt3 * u / p.omega;
            const double e = std::exp(-t);
            g.d_s2 = (1.0 + t) * e;
            g.d_omega = p.s2 * e * t * t / p.omega;
            return g;
        }
    }
    throw std::invalid_argument("matern: unsupported nu");
}

mat gram(const MaternParams& p, const vec& radii_a, const vec& radii_b) {
    mat lags = radii_a.replicate(1, radii_b.size());
    lags.rowwise() -= radii_b.transpose();
    return matern_from_lags(p, lags.cwiseAbs());
}

mat matern_from_lags(const MaternParams& p, const mat& lags) {
    check_params(p);
    switch (p.nu) {
        case Nu::Half:
            return p.s2 * (-lags.array() / p.omega).exp().matrix();
        case Nu::ThreeHalves: {
            const auto t = kSqrt3 / p.omega * lags.array();
            return (p.s2 * (1.0 + t) * (-t).exp()).matrix();
        }
    }
    throw std::invalid_argument("matern: unsupported nu");
}

mat matern_domega_from_lags(const MaternParams& p, const mat& lags) {
    check_params(p);
    switch (p.nu) {
        case Nu::Half: {
            const auto u = lags.array();
            return (p.s2 / (p.omega * p.omega) * u * (-u / p.omega).exp()).matrix();
        }
        case Nu::ThreeHalves: {
            const auto t = kSqrt3 / p.omega * lags.array();
            return (p.s2 / p.omega * t.square() * (-t).exp()).matrix();
        }
    }
    throw std::invalid_argument("matern: unsupported nu");
}

} // namespace ipgp
