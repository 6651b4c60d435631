#ifndef IPGP_TRAINER_HPP
#define IPGP_TRAINER_HPP

#include <functional>
#include <string>
#include <vector>

#include "ipgp/accel.hpp"
#include "ipgp/gp.hpp"

namespace ipgp {

struct EvalRecord {
    int iteration = 0;
    double nlml = 0.0;
    double grad_norm = 0.0;
};

struct MinimizeOptions {
    int max_evals = 400;
    double grad_tol = 1e-8;
};

struct MinimizeResult {
    vec x;
    double f = 0.0;
    int evals = 0;
    std::vector<EvalRecord> trace;
    std::string stop_reason;
};

// Polak-Ribiere+ nonlinear conjugate gradients with a strong-Wolfe line
// search. objective(x, grad) returns the value and fills grad.
MinimizeResult minimize_cg(const std::function<double(const vec&, vec&)>& objective,
                           const vec& x0, const MinimizeOptions& opts);

enum class Backend { Exact, Accelerated };

struct TrainConfig {
    Hyperparameters init;
    int max_evals = 400;
    int restarts = 1;
    std::uint64_t seed = 0;
    bool randomize_init = true; // alpha, sigma, mass ~ U([0,1]) per restart
    double grad_tol = 1e-8;
};

struct TrainResult {
    Hyperparameters hyper;
    double nlml = 0.0;
    int evals = 0;
    std::vector<EvalRecord> trace;
    std::string stop_reason;
};

// Minimizes the NLML over the unmasked fields; s2, omega, sigma move in log
// space, alpha and mass in natural space (mass clamped >= 0 on return).
TrainResult minimize_nlml(const TrajectoryDataset& data, const SystemSpec& spec,
                          const TrainConfig& config, Backend backend = Backend::Exact,
                          const AccelConfig& accel = {});

std::string trace_to_jsonl(const std::vector<EvalRecord>& trace);

} // namespace ipgp

#endif
