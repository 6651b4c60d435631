#ifndef IPGP_ANALYSIS_HPP
#define IPGP_ANALYSIS_HPP

#include "ipgp/gp.hpp"
#include "ipgp/systems.hpp"

namespace ipgp {

// Pairwise-distance occupation measures: rho_E deposits (r^x)^2 and rho_A
// deposits (r^v)^2 at the position radius r^x, each normalized by
// 1/(N(N-1)) and by the number of state samples.
struct EmpiricalMeasure {
    vec edges;      // n_bins + 1 over [0, R]
    vec weights_E;  // n_bins
    vec weights_A;  // n_bins
    double R = 0.0; // max observed pairwise position distance
    long samples = 0;

    double mass_E() const { return weights_E.sum(); }
    double mass_A() const { return weights_A.sum(); }
};

EmpiricalMeasure empirical_rho(const SystemSpec& spec, int n_traj, int n_bins, std::uint64_t seed,
                               int n_snapshots = 20);

// Same measure computed from an existing dataset's states.
EmpiricalMeasure empirical_rho_from_dataset(const TrajectoryDataset& data, int n_bins);

struct KernelErrors {
    double linf_rel = 0.0;  // relative when |truth|_inf > 0, absolute otherwise
    double l2rho_rel = 0.0; // L2(rho~) grid quadrature, same convention
};

KernelErrors kernel_errors(const vec& r_grid, const vec& estimate, const RadialKernel& truth,
                           const EmpiricalMeasure& measure, KernelType type);

struct CoercivityResult {
    double lhs = 0.0;   // |f_phi|^2 in the 1/N-averaged L2(rho_Y) norm
    double rhs = 0.0;   // (N-1)/N^2 (|phi_E|^2_rhoE + |phi_A|^2_rhoA)
    double ratio = 0.0; // lhs / rhs
    double se = 0.0;    // standard error of the ratio (delta method)
};

// Monte-Carlo check of the coercivity inequality ratio >= 1, sampling states
// directly from the system's i.i.d. initial distributions. n_mc counts
// ordered pair samples.
CoercivityResult coercivity_check(const RadialKernel& phi_E, const RadialKernel& phi_A,
                                  const SystemSpec& spec, long n_mc, std::uint64_t seed);

// Relative L2 discrepancy over the snapshots with times in [t0, t1].
double trajectory_error(const Trajectory& truth, const Trajectory& pred, double t0, double t1);

struct Polarisation {
    mat M;             // d x L mean unit-velocity vectors
    vec magnitude;     // L
    bool skipped_slow = false;
};

// M(t) = (1/N) sum_i v_i(t)/|v_i(t)|; agents slower than 1e-12 are skipped
// and the divisor reduced.
Polarisation group_polarisation(const Trajectory& traj, int d, int N);

// Exact order-1 Wasserstein distance between 1-D empirical distributions.
double wasserstein1(const vec& samples_a, const vec& samples_b);

struct UQEnsemble {
    mat mean;        // 2dN x L
    mat stddev;      // 2dN x L
    int n_samples = 0;
    int n_failed = 0;
    std::uint64_t seed = 0;
};

// Monte-Carlo trajectory uncertainty: each sample draws both kernels from
// their grid posteriors (full grid covariance, linear interpolation between
// grid points), simulates from ic, and is aggregated per coordinate/time.
UQEnsemble uq_ensemble(const TrajectoryDataset& data, const SystemSpec& spec,
                       const Hyperparameters& hyper, const vec& r_grid, const vec& ic,
                       const vec& times, int n_samples, std::uint64_t seed);

// Piecewise-linear interpolant of grid values, clamped at the ends.
RadialKernel interpolated_kernel(const vec& r_grid, const vec& values);

} // namespace ipgp

#endif
