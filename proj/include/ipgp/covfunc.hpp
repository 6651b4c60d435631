#ifndef IPGP_COVFUNC_HPP
#define IPGP_COVFUNC_HPP

#include "ipgp/types.hpp"

namespace ipgp {

// Matern smoothness, half-integer cases only.
enum class Nu { Half, ThreeHalves };

Nu nu_from_double(double nu);
double nu_to_double(Nu nu);

struct MaternParams {
    double s2 = 1.0;    // amplitude s^2
    double omega = 1.0; // length scale
    Nu nu = Nu::ThreeHalves;
};

// Stationary Matern covariance k(|r - rp|).
//   nu = 1/2 : s^2 exp(-u/omega)
//   nu = 3/2 : s^2 (1 + sqrt(3) u/omega) exp(-sqrt(3) u/omega)
double matern(const MaternParams& p, double r, double rp);

struct MaternGrad {
    double d_s2;
    double d_omega;
};

MaternGrad matern_grad(const MaternParams& p, double r, double rp);

// Gram matrix K(i,j) = matern(p, a[i], b[j]).
mat gram(const MaternParams& p, const vec& radii_a, const vec& radii_b);

// Elementwise kernel value / omega-derivative applied to a matrix of lags
// |r - rp|; the hot path for covariance assembly.
mat matern_from_lags(const MaternParams& p, const mat& lags);
mat matern_domega_from_lags(const MaternParams& p, const mat& lags);

} // namespace ipgp

#endif
