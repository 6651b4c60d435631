#ifndef IPGP_SYSTEMS_HPP
#define IPGP_SYSTEMS_HPP

#include <functional>
#include <string>
#include <vector>

#include "ipgp/types.hpp"

namespace ipgp {

using RadialKernel = std::function<double(double)>;

// Non-collective force families. Stubborn carries a structural -v friction
// term so that the mass = 0 limit of the model equation is the first-order
// opinion dynamics xdot_i = -kappa (x_i - P) 1_stubborn + interactions.
enum class ForceFamily { None, Rayleigh, Drag, Stubborn };

std::string force_family_name(ForceFamily f);
ForceFamily force_family_from_name(const std::string& name);

struct SystemSpec {
    int d = 2;
    int N = 10;
    double mass = 1.0;

    ForceFamily force = ForceFamily::None;
    vec alpha;                  // (kappa,p) | (gamma,beta) | (P,kappa)
    std::vector<int> stubborn;  // agent indices, Stubborn family only

    RadialKernel phi_E; // null => identically zero
    RadialKernel phi_A;

    // i.i.d. uniform box initial conditions, per spatial dimension
    vec x_lo, x_hi;
    vec v_lo, v_hi;

    double T = 10.0;
    double T_final = 20.0;

    int state_dim() const { return 2 * d * N; }
    int accel_dim() const { return d * N; }
    int alpha_dim() const;
};

enum class Builtin { CS, FM, AD, OD, ODS };

Builtin builtin_from_name(const std::string& name);
std::string builtin_name(Builtin b);

// The five reference systems with their published parameters; FM's Morse
// kernel is replaced on [0, 0.05) by a*exp(-b r) with (a, b) solved from the
// C^1 matching conditions at r0 = 0.05.
SystemSpec builtin_system(Builtin b);
SystemSpec builtin_system(const std::string& name);

// Constants of the FM short-range replacement (exposed for tests).
struct FmTruncation {
    double r0, a, b;
};
FmTruncation fm_truncation_constants();

// Non-collective force F(x_i, v_i, alpha) stacked over agents (length dN).
vec force_eval(const SystemSpec& spec, const vec& state);

// dN x alpha_dim Jacobian of the stacked force w.r.t. alpha.
mat force_alpha_jacobian(const SystemSpec& spec, const vec& state);

// Right-hand side of the model equation at a state [x | v]:
//   mass > 0 : acceleration  (F + pairwise interactions) / mass
//   mass = 0 : xdot, read directly from F(x, v) + interactions
vec rhs(const SystemSpec& spec, const RadialKernel& phi_E, const RadialKernel& phi_A,
        const vec& state);

struct Trajectory {
    vec times;  // L
    mat states; // 2dN x L, column l = [x | v] at times[l]
};

// Adaptive Dormand-Prince 5(4) integration with exact landing on the
// requested output times. For mass = 0 systems the velocity block of the
// returned states holds the instantaneous xdot.
Trajectory simulate(const SystemSpec& spec, const RadialKernel& phi_E,
                    const RadialKernel& phi_A, const vec& initial_state, const vec& times,
                    double rtol = 1e-5, double atol = 1e-6);

struct TrajectoryDataset {
    int d = 0, N = 0, M = 0, L = 0;
    vec times;
    double noise_sigma = 0.0;
    std::vector<mat> Y; // M entries, 2dN x L
    std::vector<mat> Z; // M entries,  dN x L

    int snapshot_count() const { return M * L; }
    int total_dim() const { return d * N * M * L; }
    vec state(int m, int l) const { return Y[static_cast<size_t>(m)].col(l); }
    // Observations stacked (m outer, l, agent, dimension innermost).
    vec stacked_Z() const;
};

// M i.i.d. initial conditions, L equidistant snapshots on [0, T],
// Z = rhs + sigma * standard normal noise. For mass = 0 systems Z holds the
// second time derivative of the trajectory (the flow derivative of the
// first-order right-hand side).
TrajectoryDataset generate_dataset(const SystemSpec& spec, int M, int L, double sigma,
                                   std::uint64_t seed);

// Restrict a dataset to a subset of agents (staged training on real data).
TrajectoryDataset select_agents(const TrajectoryDataset& data, const std::vector<int>& agents);

// Moving-window average then central finite differences on the smoothed
// positions. frames: n_frames columns of length d*N. Boundary frames lacking
// a full stencil are dropped: L_out = n_frames - window - 2.
TrajectoryDataset preprocess_frames(const mat& frames, int d, int N, int window, double dt);

} // namespace ipgp

#endif
