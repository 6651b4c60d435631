#include "ipgp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace ipgp {

namespace {

struct PairAccumulator {
    std::vector<double> radii;
    std::vector<double> wE, wA;
    double max_r = 0.0;
    long samples = 0;

    void add_state(int d, int N, const vec& state) {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                if (i == j) continue;
                const vec dx = state.segment(j * d, d) - state.segment(i * d, d);
                const vec dv =
                    state.segment(d * N + j * d, d) - state.segment(d * N + i * d, d);
                const double r = dx.norm();
                radii.push_back(r);
                wE.push_back(r * r);
                wA.push_back(dv.squaredNorm());
                max_r = std::max(max_r, r);
            }
        ++samples;
    }

    EmpiricalMeasure finalize(int N, int n_bins) const {
        EmpiricalMeasure m;
        m.R = max_r;
        m.samples = samples;
        m.edges = linspace(0.0, max_r > 0.0 ? max_r : 1.0, n_bins + 1);
        m.weights_E = vec::Zero(n_bins);
        m.weights_A = vec::Zero(n_bins);
        const double scale =
            1.0 / (static_cast<double>(N) * (N - 1) * static_cast<double>(samples));
        const double width = m.edges[1] - m.edges[0];
        for (size_t k = 0; k < radii.size(); ++k) {
            Index bin = width > 0.0 ? static_cast<Index>(radii[k] / width) : 0;
            bin = std::clamp<Index>(bin, 0, n_bins - 1);
            m.weights_E[bin] += wE[k] * scale;
            m.weights_A[bin] += wA[k] * scale;
        }
        return m;
    }
};

} // namespace

EmpiricalMeasure empirical_rho(const SystemSpec& spec, int n_traj, int n_bins, std::uint64_t seed,
                               int n_snapshots) {
    if (n_traj < 1) throw std::invalid_argument("empirical_rho: n_traj must be >= 1");
    if (spec.N < 2) throw std::invalid_argument("empirical_rho: need at least two agents");
    const TrajectoryDataset data = generate_dataset(spec, n_traj, n_snapshots, 0.0, seed);
    return empirical_rho_from_dataset(data, n_bins);
}

EmpiricalMeasure empirical_rho_from_dataset(const TrajectoryDataset& data, int n_bins) {
    PairAccumulator acc;
    for (int m = 0; m < data.M; ++m)
        for (int l = 0; l < data.L; ++l) acc.add_state(data.d, data.N, data.state(m, l));
    return acc.finalize(data.N, n_bins);
}

KernelErrors kernel_errors(const vec& r_grid, const vec& estimate, const RadialKernel& truth,
                           const EmpiricalMeasure& measure, KernelType type) {
    if (r_grid.size() != estimate.size())
        throw std::invalid_argument("kernel_errors: grid/estimate size mismatch");
    const RadialKernel est = interpolated_kernel(r_grid, estimate);

    double diff_inf = 0.0, truth_inf = 0.0;
    for (Index i = 0; i < r_grid.size(); ++i) {
        if (r_grid[i] > measure.R) continue;
        const double t = truth ? truth(r_grid[i]) : 0.0;
        diff_inf = std::max(diff_inf, std::abs(estimate[i] - t));
        truth_inf = std::max(truth_inf, std::abs(t));
    }

    const vec& w = (type == KernelType::Energy) ? measure.weights_E : measure.weights_A;
    double num = 0.0, den = 0.0;
    for (Index b = 0; b < w.size(); ++b) {
        if (w[b] == 0.0) continue;
        const double mid = 0.5 * (measure.edges[b] + measure.edges[b + 1]);
        const double t = truth ? truth(mid) : 0.0;
        const double e = est(mid);
        num += (e - t) * (e - t) * w[b];
        den += t * t * w[b];
    }

    KernelErrors err;
    err.linf_rel = truth_inf > 0.0 ? diff_inf / truth_inf : diff_inf;
    err.l2rho_rel = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return err;
}

CoercivityResult coercivity_check(const RadialKernel& phi_E, const RadialKernel& phi_A,
                                  const SystemSpec& spec, long n_mc, std::uint64_t seed) {
    const int d = spec.d, N = spec.N;
    const long pairs_per_state = static_cast<long>(N) * (N - 1);
    const long n_states = std::max<long>(1, (n_mc + pairs_per_state - 1) / pairs_per_state);

    Rng rng(seed);
    double sum_l = 0.0, sum_r = 0.0, sum_ll = 0.0, sum_rr = 0.0, sum_lr = 0.0;

    vec state(2 * d * N);
    for (long s = 0; s < n_states; ++s) {
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < d; ++k) {
                state[i * d + k] = rng.uniform(spec.x_lo[k], spec.x_hi[k]);
                state[d * N + i * d + k] = rng.uniform(spec.v_lo[k], spec.v_hi[k]);
            }

        double lhs_s = 0.0, rhs_s = 0.0;
        for (int i = 0; i < N; ++i) {
            vec fi = vec::Zero(d);
            for (int j = 0; j < N; ++j) {
                if (j == i) continue;
                const vec dx = state.segment(j * d, d) - state.segment(i * d, d);
                const vec dv =
                    state.segment(d * N + j * d, d) - state.segment(d * N + i * d, d);
                const double r = dx.norm();
                const double kE = phi_E ? phi_E(r) : 0.0;
                const double kA = phi_A ? phi_A(r) : 0.0;
                fi += kE * dx + kA * dv;
                rhs_s += kE * kE * dx.squaredNorm() + kA * kA * dv.squaredNorm();
            }
            lhs_s += (fi / N).squaredNorm();
        }
        lhs_s /= N;                                             // 1/N-averaged norm
        rhs_s *= static_cast<double>(N - 1) / (N * N) /
                 (static_cast<double>(N) * (N - 1));            // (N-1)/N^2 * mean over pairs
        sum_l += lhs_s;
        sum_r += rhs_s;
        sum_ll += lhs_s * lhs_s;
        sum_rr += rhs_s * rhs_s;
        sum_lr += lhs_s * rhs_s;
    }

    const double n = static_cast<double>(n_states);
    CoercivityResult res;
    res.lhs = sum_l / n;
    res.rhs = sum_r / n;
    if (res.rhs == 0.0) {
        res.ratio = res.lhs == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        return res;
    }
    res.ratio = res.lhs / res.rhs;
    // delta-method variance of the ratio of means
    const double var_l = std::max(0.0, sum_ll / n - res.lhs * res.lhs);
    const double var_r = std::max(0.0, sum_rr / n - res.rhs * res.rhs);
    const double cov_lr = sum_lr / n - res.lhs * res.rhs;
    const double var_ratio = (var_l / (res.rhs * res.rhs) -
                              2.0 * cov_lr * res.lhs / (res.rhs * res.rhs * res.rhs) +
                              var_r * res.lhs * res.lhs / (res.rhs * res.rhs * res.rhs * res.rhs)) /
                             n;
    res.se = std::sqrt(std::max(0.0, var_ratio));
    return res;
}

double trajectory_error(const Trajectory& truth, const Trajectory& pred, double t0, double t1) {
    if (truth.states.rows() != pred.states.rows() || truth.times.size() != pred.times.size())
        throw std::invalid_argument("trajectory_error: shape mismatch");
    double num = 0.0, den = 0.0;
    for (Index l = 0; l < truth.times.size(); ++l) {
        if (truth.times[l] < t0 || truth.times[l] > t1) continue;
        num += (truth.states.col(l) - pred.states.col(l)).squaredNorm();
        den += truth.states.col(l).squaredNorm();
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

Polarisation group_polarisation(const Trajectory& traj, int d, int N) {
    const Index L = traj.times.size();
    Polarisation p;
    p.M.setZero(d, L);
    p.magnitude.resize(L);
    for (Index l = 0; l < L; ++l) {
        int used = 0;
        for (int i = 0; i < N; ++i) {
            const vec vi = traj.states.col(l).segment(d * N + i * d, d);
            const double speed = vi.norm();
            if (speed < 1e-12) {
                p.skipped_slow = true;
                continue;
            }
            p.M.col(l) += vi / speed;
            ++used;
        }
        if (used == 0)
            throw std::runtime_error("group_polarisation: all agents below speed threshold");
        p.M.col(l) /= used;
        p.magnitude[l] = p.M.col(l).norm();
    }
    return p;
}

double wasserstein1(const vec& samples_a, const vec& samples_b) {
    if (samples_a.size() == 0 || samples_b.size() == 0)
        throw std::invalid_argument("wasserstein1: empty sample set");
    std::vector<double> a(samples_a.data(), samples_a.data() + samples_a.size());
    std::vector<double> b(samples_b.data(), samples_b.data() + samples_b.size());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    // integral of |F_a - F_b| over the merged support
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    size_t ia = 0, ib = 0;
    double dist = 0.0, prev = std::min(a[0], b[0]);
    while (ia < a.size() || ib < b.size()) {
        const double xa = ia < a.size() ? a[ia] : std::numeric_limits<double>::infinity();
        const double xb = ib < b.size() ? b[ib] : std::numeric_limits<double>::infinity();
        const double x = std::min(xa, xb);
        dist += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (x - prev);
        prev = x;
        while (ia < a.size() && a[ia] == x) ++ia;
        while (ib < b.size() && b[ib] == x) ++ib;
    }
    return dist;
}

RadialKernel interpolated_kernel(const vec& r_grid, const vec& values) {
    if (r_grid.size() != values.size() || r_grid.size() < 2)
        throw std::invalid_argument("interpolated_kernel: need matching grids of size >= 2");
    const vec grid = r_grid;
    const vec vals = values;
    return [grid, vals](double r) {
        if (r <= grid[0]) return vals[0];
        const Index n = grid.size();
        if (r >= grid[n - 1]) return vals[n - 1];
        Index hi = static_cast<Index>(
            std::upper_bound(grid.data(), grid.data() + n, r) - grid.data());
        hi = std::clamp<Index>(hi, 1, n - 1);
        const double t = (r - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
        return (1.0 - t) * vals[hi - 1] + t * vals[hi];
    };
}

UQEnsemble uq_ensemble(const TrajectoryDataset& data, const SystemSpec& spec,
                       const Hyperparameters& hyper, const vec& r_grid, const vec& ic,
                       const vec& times, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("uq_ensemble: n_samples must be >= 1");

    const PosteriorField fE = posterior_grid(data, spec, hyper, r_grid, KernelType::Energy);
    const PosteriorField fA = posterior_grid(data, spec, hyper, r_grid, KernelType::Alignment);

    auto sample_factor = [](const PosteriorField& f) {
        mat cov = 0.5 * (f.cov + f.cov.transpose());
        const double scale = std::max(1.0, cov.diagonal().maxCoeff());
        cov.diagonal().array() += 1e-12 * scale;
        Eigen::LLT<mat> llt(cov);
        if (llt.info() != Eigen::Success) {
            cov.diagonal().array() += 1e-8 * scale;
            llt.compute(cov);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("uq_ensemble: posterior grid covariance not PSD");
        }
        return mat(llt.matrixL());
    };
    const mat LE = sample_factor(fE);
    const mat LA = sample_factor(fA);

    SystemSpec sys = spec;
    sys.alpha = hyper.alpha;
    sys.mass = hyper.mass;

    const Rng root(seed);
    std::vector<mat> draws(static_cast<size_t>(n_samples));
    std::vector<char> ok(static_cast<size_t>(n_samples), 0);

#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < n_samples; ++s) {
        Rng rng = root.fork(static_cast<std::uint64_t>(s));
        const vec zE = fE.mean + LE * rng.normal_vec(r_grid.size());
        const vec zA = fA.mean + LA * rng.normal_vec(r_grid.size());
        try {
            const Trajectory traj =
                simulate(sys, interpolated_kernel(r_grid, zE),
                         sys.mass == 0.0 ? RadialKernel{} : interpolated_kernel(r_grid, zA), ic,
                         times);
            draws[static_cast<size_t>(s)] = traj.states;
            ok[static_cast<size_t>(s)] = 1;
        } catch (const std::exception&) {
            ok[static_cast<size_t>(s)] = 0;
        }
    }

    UQEnsemble ens;
    ens.seed = seed;
    mat sum, sumsq;
    int used = 0;
    for (int s = 0; s < n_samples; ++s) {
        if (!ok[static_cast<size_t>(s)]) continue;
        const mat& st = draws[static_cast<size_t>(s)];
        if (used == 0) {
            sum = st;
            sumsq = st.cwiseProduct(st);
        } else {
            sum += st;
            sumsq += st.cwiseProduct(st);
        }
        ++used;
    }
    if (used == 0) throw std::runtime_error("uq_ensemble: every sample simulation failed");
    ens.n_samples = used;
    ens.n_failed = n_samples - used;
    ens.mean = sum / used;
    ens.stddev = (sumsq / used - ens.mean.cwiseProduct(ens.mean)).cwiseMax(0.0).cwiseSqrt();
    return ens;
}

} // namespace ipgp
