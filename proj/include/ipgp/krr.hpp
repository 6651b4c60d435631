#ifndef IPGP_KRR_HPP
#define IPGP_KRR_HPP

#include "ipgp/gp.hpp"

namespace ipgp {

// Representer-theorem coefficients over the stacked pairwise-distance sets
// (ordering m, l, i, k). Diagonal pairs i = k carry zero difference vectors
// and therefore zero coefficients.
struct RepresenterCoefficients {
    vec c_rx;  // MLN^2, energy basis coefficients
    vec c_rv;  // MLN^2, alignment basis coefficients
    vec radii; // MLN^2, pairwise position distances (basis centers)
};

// Block-diagonal matrix r_X (or r_V): dNML x MLN^2, agent-major blocks
// [r_i1 ... r_iN] per agent row block.
mat pairwise_block_matrix(const DatasetGeometry& g, KernelType type);

// c = (1/N) r^T (K_ff + lambda N M L I)^-1 target, dense Cholesky route.
// target defaults to the stacked dataset observations.
RepresenterCoefficients representer_coefficients(const TrajectoryDataset& data,
                                                 const MaternParams& theta_E,
                                                 const MaternParams& theta_A, double lambda,
                                                 const vec* target = nullptr);

// Coupled lambda_E != lambda_A normal system, solved densely over the
// 2 M L N^2 coefficient vector. Small instances only.
RepresenterCoefficients representer_coefficients_coupled(const TrajectoryDataset& data,
                                                         const MaternParams& theta_E,
                                                         const MaternParams& theta_A,
                                                         double lambda_E, double lambda_A,
                                                         const vec* target = nullptr);

// phi_E(r*) = sum_k c_rx[k] K_E(radii[k], r*), phi_A analogous (both kernels
// evaluated at position radii).
std::pair<double, double> krr_estimate(const RepresenterCoefficients& coeffs,
                                       const MaternParams& theta_E, const MaternParams& theta_A,
                                       double r_star);
std::pair<vec, vec> krr_estimate(const RepresenterCoefficients& coeffs,
                                 const MaternParams& theta_E, const MaternParams& theta_A,
                                 const vec& r_grid);

// Sup-norm deviation between the GP posterior mean and the KRR estimate over
// r_grid, both kernel types, at the matched regularization
// lambda = sigma^2 / (M N L). Requires sigma > 0.
double check_equivalence(const TrajectoryDataset& data, const SystemSpec& spec,
                         const Hyperparameters& hyper, const vec& r_grid);

// Residual of the decomposition r_X K_E r_X^T + r_V K_A r_V^T = N^2 K_ff,
// relative Frobenius norm.
double kff_identity_residual(const TrajectoryDataset& data, const MaternParams& theta_E,
                             const MaternParams& theta_A);

} // namespace ipgp

#endif
