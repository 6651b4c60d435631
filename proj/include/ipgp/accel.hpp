#ifndef IPGP_ACCEL_HPP
#define IPGP_ACCEL_HPP

#include <functional>
#include <vector>

#include "ipgp/gp.hpp"

namespace ipgp {

// Matrix-free SPD operator. from_matrix keeps a reference; the matrix must
// outlive the operator.
struct LinearOperator {
    Index n = 0;
    std::function<vec(const vec&)> matvec;

    static LinearOperator from_matrix(const mat& A);
};

using PrecondApply = std::function<vec(const vec&)>; // v -> P^-1 v

struct PcgResult {
    vec x;
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
    // CG coefficients, kept for stochastic Lanczos quadrature.
    std::vector<double> alpha;
    std::vector<double> beta;
    // residual norm in the P^-1 inner product after each accepted iteration
    std::vector<double> res_norms;
};

// Preconditioned conjugate gradients on op x = b; stops at
// |b - A x| <= tol |b| or max_iter. Throws if a non-SPD direction
// (d^T A d <= 0) is detected. With reorthogonalize set, residuals are kept
// P^-1-orthogonal to the full history (full Lanczos reorthogonalization),
// which keeps the recovered tridiagonal spectrally clean.
PcgResult pcg(const LinearOperator& op, const PrecondApply& precond, const vec& b, const vec& x0,
              double tol, int max_iter, bool reorthogonalize = false);

// Randomized Gaussian Nystrom preconditioner of A (unshifted) for the
// shifted system A + sigma2 I.
struct NystromPreconditioner {
    mat U;           // n x r, orthonormal
    vec lambda;      // r eigenvalue estimates, descending
    double sigma2 = 0.0;
    double lambda_r = 0.0; // smallest retained eigenvalue
    double nu_shift = 0.0; // stabilization actually used
    double logdet = 0.0;   // log det(P)

    // v -> (lambda_r + sigma2) U (Lambda + sigma2)^-1 U^T v + (I - U U^T) v
    vec apply_inverse(const vec& v) const;
    PrecondApply as_apply() const;
    // P^(1/2) g, for drawing variance-reduced probes ~ N(0, P)
    vec apply_sqrt(const vec& g) const;
};

NystromPreconditioner nystrom_precond(const LinearOperator& op, double sigma2, int rank,
                                      std::uint64_t seed);

// Doubles the rank from rank0 until the smallest retained eigenvalue reaches
// sigma2 (the untreated spectral tail is then flat to within a factor of
// two, which makes the SLQ probe term nearly deterministic) or rank = n.
NystromPreconditioner nystrom_precond_auto(const LinearOperator& op, double sigma2, int rank0,
                                           std::uint64_t seed);

// Rank rule used for kernel matrices: floor(30/log(12) * log(n/10)),
// clamped to [1, n].
int nystrom_default_rank(Index n);

// Stochastic Lanczos quadrature estimate of log det of the shifted system.
// Rademacher probes; each probe runs PCG for up to m_coeffs iterations and
// contributes the quadrature sum_j W_1j^2 log(lambda_j) of its tridiagonal.
// Estimator: logdet_P + (n / n_probes) sum_i gamma_i. With gaussian_probes
// the probes are drawn from N(0, P) and scaled by v^T P^-1 v instead of n,
// which removes the preconditioner-induced bias of the probe average.
double slq_logdet(const LinearOperator& op_shifted, const NystromPreconditioner* precond,
                  int n_probes, int m_coeffs, std::uint64_t seed, bool gaussian_probes = false);

struct AccelConfig {
    double pcg_tol = 1e-6;
    int pcg_max_iter = 500;
    int n_probes = 10;
    int m_coeffs = 50; // capped at n - 1
    int rank = -1;     // -1: use nystrom_default_rank
    std::uint64_t seed = 0;
    bool reorthogonalize = true;
    bool variance_reduced = false; // N(0, P) probes for the log-det term
    bool auto_rank = false;        // escalate rank until lambda_r <= sigma^2
};

// Drop-in replacement for the exact NLML evaluation: quadratic term via one
// PCG solve, log-determinant via SLQ, gradient traces via Hutchinson
// estimates sharing the same probe solves.
NlmlResult accelerated_nlml(const DatasetGeometry& g, const SystemSpec& spec,
                            const Hyperparameters& hyper, const AccelConfig& cfg);
NlmlResult accelerated_nlml(const TrajectoryDataset& data, const SystemSpec& spec,
                            const Hyperparameters& hyper, const AccelConfig& cfg);

} // namespace ipgp

#endif
