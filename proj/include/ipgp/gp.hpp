#ifndef IPGP_GP_HPP
#define IPGP_GP_HPP

#include <string>
#include <vector>

#include "ipgp/covfunc.hpp"
#include "ipgp/systems.hpp"

namespace ipgp {

enum class KernelType { Energy, Alignment };

struct TrainMask {
    bool theta_E = true;
    bool theta_A = true;
    bool sigma = true;
    bool alpha = true;
    bool mass = false;
};

struct Hyperparameters {
    MaternParams theta_E;
    MaternParams theta_A;
    double sigma = 0.0;
    vec alpha;        // semantics follow the system's force family
    double mass = 1.0;
    TrainMask mask;
};

// Pairwise geometry of a dataset, independent of hyperparameters; computed
// once and reused across NLML evaluations. Snapshot s = m*L + l. Row i*N+k of
// xdiff[s] is x_k - x_i; radii[s][i*N+k] = |x_k - x_i|.
struct DatasetGeometry {
    int d = 0, N = 0, M = 0, L = 0;
    Index n = 0; // d*N*M*L
    std::vector<mat> xdiff; // N^2 x d
    std::vector<mat> vdiff; // N^2 x d
    std::vector<vec> radii; // N^2
    std::vector<vec> states; // 2dN, for force evaluation
    vec z;                   // stacked observations, length n
    double max_radius = 0.0;

    explicit DatasetGeometry(const TrajectoryDataset& data);
    int snapshots() const { return M * L; }
};

// Covariance of the interaction force field, split by kernel type so that
// K_ff = E + A and dK/ds2 = part/s2 come for free.
struct KffParts {
    mat E;
    mat A;
};

KffParts assemble_kff_parts(const DatasetGeometry& g, const MaternParams& theta_E,
                            const MaternParams& theta_A);

// (i,j) block (1/N^2) sum_{k!=i,k'!=j} [K_E(r_ik,r_jk') rx_ik rx_jk'^T
//                                     + K_A(r_ik,r_jk') rv_ik rv_jk'^T],
// symmetrized as (K + K^T)/2.
mat assemble_kff(const TrajectoryDataset& data, const MaternParams& theta_E,
                 const MaternParams& theta_A);

// dK_ff/domega for one kernel type.
mat assemble_kff_domega(const DatasetGeometry& g, const MaternParams& theta, KernelType type);

// n x |r_star| cross covariance: row block (s,i) is
// (1/N) sum_{k!=i} K(r_ik, r*) diff_ik with positions (E) or velocities (A).
mat assemble_cross_cov(const DatasetGeometry& g, const vec& r_star, KernelType type,
                       const MaternParams& theta);
mat assemble_cross_cov(const TrajectoryDataset& data, const vec& r_star, KernelType type,
                       const MaternParams& theta);

// mass * Z - F_alpha(Y), stacked.
vec residual_vector(const DatasetGeometry& g, const SystemSpec& spec, const Hyperparameters& hyper);

// Gradient vector layout over unmasked fields, in order:
// [s2_E, omega_E], [s2_A, omega_A], [sigma], [alpha...], [mass].
// Natural scale throughout; the trainer applies any log-space chain rule.
std::vector<std::string> gradient_layout(const SystemSpec& spec, const Hyperparameters& hyper);

struct NlmlResult {
    double value = 0.0;
    vec grad;           // over unmasked fields (empty if not requested)
    double jitter = 0.0; // diagonal shift actually added beyond sigma^2
};

// 0.5 res^T Khat^-1 res + 0.5 log|Khat| + n/2 log(2 pi), Khat = K_ff +
// (sigma^2 + jitter) I, via one Cholesky factorization. Jitter 1e-6 when
// sigma = 0, escalated x10 on factorization failure up to 1e-2.
NlmlResult nlml_eval(const DatasetGeometry& g, const SystemSpec& spec,
                     const Hyperparameters& hyper, bool want_grad);

double nlml(const TrajectoryDataset& data, const SystemSpec& spec, const Hyperparameters& hyper);
vec nlml_grad(const TrajectoryDataset& data, const SystemSpec& spec, const Hyperparameters& hyper);

struct KernelEstimate {
    vec r_grid;
    vec mean_E, var_E;
    vec mean_A, var_A;
    MaternParams prior_E, prior_A;
};

// Posterior mean and variance of both kernels on a radius grid (Cholesky +
// two triangular solves; no explicit inverse).
KernelEstimate posterior_kernel(const TrajectoryDataset& data, const SystemSpec& spec,
                                const Hyperparameters& hyper, const vec& r_grid);

// Full posterior covariance over the grid for one kernel type (needed to
// sample kernel functions for uncertainty quantification).
struct PosteriorField {
    vec mean;
    mat cov;
};
PosteriorField posterior_grid(const TrajectoryDataset& data, const SystemSpec& spec,
                              const Hyperparameters& hyper, const vec& r_grid, KernelType type);

} // namespace ipgp

#endif
