#include "ipgp/gp.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace ipgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kJitterStart = 1e-6;
constexpr double kJitterMax = 1e-2;

} // namespace

DatasetGeometry::DatasetGeometry(const TrajectoryDataset& data) {
    d = data.d;
    N = data.N;
    M = data.M;
    L = data.L;
    n = static_cast<Index>(d) * N * M * L;
    const int S = M * L;
    xdiff.resize(static_cast<size_t>(S));
    vdiff.resize(static_cast<size_t>(S));
    radii.resize(static_cast<size_t>(S));
    states.resize(static_cast<size_t>(S));
    z = data.stacked_Z();

    for (int m = 0; m < M; ++m) {
        for (int l = 0; l < L; ++l) {
            const int s = m * L + l;
            const vec y = data.state(m, l);
            states[static_cast<size_t>(s)] = y;
            mat dx(N * N, d), dv(N * N, d);
            vec r(N * N);
            for (int i = 0; i < N; ++i) {
                const auto xi = y.segment(i * d, d);
                const auto vi = y.segment(d * N + i * d, d);
                for (int k = 0; k < N; ++k) {
                    const Index row = static_cast<Index>(i) * N + k;
                    dx.row(row) = (y.segment(k * d, d) - xi).transpose();
                    dv.row(row) = (y.segment(d * N + k * d, d) - vi).transpose();
                    r[row] = dx.row(row).norm();
                    max_radius = std::max(max_radius, r[row]);
                }
            }
            xdiff[static_cast<size_t>(s)] = std::move(dx);
            vdiff[static_cast<size_t>(s)] = std::move(dv);
            radii[static_cast<size_t>(s)] = std::move(r);
        }
    }
}

namespace {

using LagEval = std::function<mat(const mat&)>;

// Shared pairwise assembler. For every snapshot pair (s, s') it evaluates the
// kernel on all N^2 x N^2 radius combinations and contracts against the
// difference vectors:
//   block(i,j) = (1/N^2) diff_i^T G(i,j) diff'_j.
// Pairs with k = i contribute zero because their difference vector is zero.
void assemble_pairwise(const DatasetGeometry& g, const LagEval& eval_E, const LagEval& eval_A,
                       mat* out_E, mat* out_A) {
    const int S = g.snapshots();
    const int N = g.N, d = g.d;
    const Index dN = static_cast<Index>(d) * N;
    if (out_E) out_E->setZero(g.n, g.n);
    if (out_A) out_A->setZero(g.n, g.n);

    // trip parameter validation before entering the parallel region, where
    // exceptions could not propagate
    const mat probe = mat::Zero(1, 1);
    if (out_E) (void)eval_E(probe);
    if (out_A) (void)eval_A(probe);

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<size_t>(S) * (S + 1) / 2);
    for (int s = 0; s < S; ++s)
        for (int sp = s; sp < S; ++sp) pairs.emplace_back(s, sp);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(pairs.size()); ++pi) {
        const auto [s, sp] = pairs[static_cast<size_t>(pi)];
        const vec& ra = g.radii[static_cast<size_t>(s)];
        const vec& rb = g.radii[static_cast<size_t>(sp)];
        mat lags = ra.replicate(1, rb.size());
        lags.rowwise() -= rb.transpose();
        lags = lags.cwiseAbs();

        auto contract = [&](const mat& G, const std::vector<mat>& diff, mat* out) {
            const mat& Da = diff[static_cast<size_t>(s)];
            const mat& Db = diff[static_cast<size_t>(sp)];
            for (int i = 0; i < N; ++i) {
                const auto Di = Da.middleRows(static_cast<Index>(i) * N, N);
                for (int j = 0; j < N; ++j) {
                    const mat B = Di.transpose() *
                                  G.block(static_cast<Index>(i) * N, static_cast<Index>(j) * N, N, N) *
                                  Db.middleRows(static_cast<Index>(j) * N, N) /
                                  static_cast<double>(N) / static_cast<double>(N);
                    out->block(s * dN + i * d, sp * dN + j * d, d, d) = B;
                    if (sp != s) out->block(sp * dN + j * d, s * dN + i * d, d, d) = B.transpose();
                }
            }
        };
        if (out_E) contract(eval_E(lags), g.xdiff, out_E);
        if (out_A) contract(eval_A(lags), g.vdiff, out_A);
    }
}

void symmetrize(mat& K) { K = ((K + K.transpose()) * 0.5).eval(); }

} // namespace

KffParts assemble_kff_parts(const DatasetGeometry& g, const MaternParams& theta_E,
                            const MaternParams& theta_A) {
    KffParts parts;
    assemble_pairwise(
        g, [&](const mat& lags) { return matern_from_lags(theta_E, lags); },
        [&](const mat& lags) { return matern_from_lags(theta_A, lags); }, &parts.E, &parts.A);
    symmetrize(parts.E);
    symmetrize(parts.A);
    for (const mat* part : {&parts.E, &parts.A}) {
        if (part->allFinite()) continue;
        const Index dN = static_cast<Index>(g.d) * g.N;
        for (Index c = 0; c < part->cols(); ++c)
            for (Index r = 0; r < part->rows(); ++r)
                if (!std::isfinite((*part)(r, c)))
                    throw std::runtime_error(
                        "assemble_kff: non-finite entry in block (snapshot " +
                        std::to_string(r / dN) + ", agent " + std::to_string((r % dN) / g.d) +
                        ") x (snapshot " + std::to_string(c / dN) + ", agent " +
                        std::to_string((c % dN) / g.d) + ")");
    }
    return parts;
}

mat assemble_kff(const TrajectoryDataset& data, const MaternParams& theta_E,
                 const MaternParams& theta_A) {
    const DatasetGeometry g(data);
    const KffParts parts = assemble_kff_parts(g, theta_E, theta_A);
    return parts.E + parts.A;
}

mat assemble_kff_domega(const DatasetGeometry& g, const MaternParams& theta, KernelType type) {
    mat out;
    const LagEval eval = [&](const mat& lags) { return matern_domega_from_lags(theta, lags); };
    if (type == KernelType::Energy)
        assemble_pairwise(g, eval, nullptr, &out, nullptr);
    else {
        // Alignment kernel still takes position radii; only the contraction
        // vectors differ, which assemble_pairwise reads from vdiff.
        assemble_pairwise(g, nullptr, eval, nullptr, &out);
    }
    symmetrize(out);
    return out;
}

mat assemble_cross_cov(const DatasetGeometry& g, const vec& r_star, KernelType type,
                       const MaternParams& theta) {
    for (Index i = 0; i < r_star.size(); ++i)
        if (r_star[i] < 0.0) throw std::invalid_argument("cross_cov: negative radius");
    const int S = g.snapshots(), N = g.N, d = g.d;
    const Index dN = static_cast<Index>(d) * N;
    const std::vector<mat>& diff = (type == KernelType::Energy) ? g.xdiff : g.vdiff;
    mat out(g.n, r_star.size());
    for (int s = 0; s < S; ++s) {
        const mat G = gram(theta, g.radii[static_cast<size_t>(s)], r_star); // N^2 x G
        const mat& D = diff[static_cast<size_t>(s)];
        for (int i = 0; i < N; ++i) {
            out.middleRows(s * dN + i * d, d) =
                D.middleRows(static_cast<Index>(i) * N, N).transpose() *
                G.middleRows(static_cast<Index>(i) * N, N) / static_cast<double>(N);
        }
    }
    return out;
}

mat assemble_cross_cov(const TrajectoryDataset& data, const vec& r_star, KernelType type,
                       const MaternParams& theta) {
    return assemble_cross_cov(DatasetGeometry(data), r_star, type, theta);
}

vec residual_vector(const DatasetGeometry& g, const SystemSpec& spec,
                    const Hyperparameters& hyper) {
    SystemSpec s = spec;
    s.alpha = hyper.alpha;
    vec res = hyper.mass * g.z;
    const Index dN = static_cast<Index>(g.d) * g.N;
    for (int i = 0; i < g.snapshots(); ++i)
        res.segment(i * dN, dN) -= force_eval(s, g.states[static_cast<size_t>(i)]);
    return res;
}

std::vector<std::string> gradient_layout(const SystemSpec& spec, const Hyperparameters& hyper) {
    std::vector<std::string> names;
    if (hyper.mask.theta_E) {
        names.push_back("s2_E");
        names.push_back("omega_E");
    }
    if (hyper.mask.theta_A) {
        names.push_back("s2_A");
        names.push_back("omega_A");
    }
    if (hyper.mask.sigma) names.push_back("sigma");
    if (hyper.mask.alpha)
        for (int i = 0; i < spec.alpha_dim(); ++i) names.push_back("alpha_" + std::to_string(i));
    if (hyper.mask.mass) names.push_back("mass");
    return names;
}

namespace {

struct Factorization {
    Eigen::LLT<mat> llt;
    double jitter = 0.0;
};

// Cholesky of K + (sigma^2 + jitter) I with the escalation policy.
Factorization factorize_shifted(const mat& K, double sigma) {
    Factorization f;
    double jit = (sigma == 0.0) ? kJitterStart : 0.0;
    while (true) {
        mat Khat = K;
        Khat.diagonal().array() += sigma * sigma + jit;
        f.llt.compute(Khat);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = jit;
            return f;
        }
        jit = (jit == 0.0) ? kJitterStart : jit * 10.0;
        if (jit > kJitterMax * 1.0000001)
            throw std::runtime_error("gp: covariance ill-conditioned, jitter escalation exhausted");
    }
}

mat stacked_force_jacobian(const DatasetGeometry& g, const SystemSpec& spec,
                           const Hyperparameters& hyper) {
    SystemSpec s = spec;
    s.alpha = hyper.alpha;
    const Index dN = static_cast<Index>(g.d) * g.N;
    mat J(g.n, spec.alpha_dim());
    for (int i = 0; i < g.snapshots(); ++i)
        J.middleRows(i * dN, dN) = force_alpha_jacobian(s, g.states[static_cast<size_t>(i)]);
    return J;
}

} // namespace

NlmlResult nlml_eval(const DatasetGeometry& g, const SystemSpec& spec,
                     const Hyperparameters& hyper, bool want_grad) {
    if (hyper.sigma < 0.0) throw std::invalid_argument("nlml: sigma must be >= 0");
    const KffParts parts = assemble_kff_parts(g, hyper.theta_E, hyper.theta_A);
    const mat K = parts.E + parts.A;
    const Factorization f = factorize_shifted(K, hyper.sigma);

    const vec res = residual_vector(g, spec, hyper);
    const vec gamma = f.llt.solve(res);

    NlmlResult out;
    out.jitter = f.jitter;
    const double logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
    out.value = 0.5 * res.dot(gamma) + 0.5 * logdet + 0.5 * static_cast<double>(g.n) * kLog2Pi;

    if (!want_grad) return out;

    const TrainMask& m = hyper.mask;
    std::vector<double> grad;
    const bool need_trace = m.theta_E || m.theta_A || m.sigma;
    mat W;
    if (need_trace) {
        mat Kinv = f.llt.solve(mat::Identity(g.n, g.n));
        W = Kinv - gamma * gamma.transpose(); // Khat^-1 - gamma gamma^T
    }
    if (m.theta_E) {
        grad.push_back(0.5 * W.cwiseProduct(parts.E).sum() / hyper.theta_E.s2);
        grad.push_back(0.5 * W.cwiseProduct(assemble_kff_domega(g, hyper.theta_E, KernelType::Energy)).sum());
    }
    if (m.theta_A) {
        grad.push_back(0.5 * W.cwiseProduct(parts.A).sum() / hyper.theta_A.s2);
        grad.push_back(
            0.5 * W.cwiseProduct(assemble_kff_domega(g, hyper.theta_A, KernelType::Alignment)).sum());
    }
    if (m.sigma) grad.push_back(hyper.sigma * W.trace());
    if (m.alpha && spec.alpha_dim() > 0) {
        const mat J = stacked_force_jacobian(g, spec, hyper);
        const vec ga = -J.transpose() * gamma;
        for (Index i = 0; i < ga.size(); ++i) grad.push_back(ga[i]);
    }
    if (m.mass) grad.push_back(gamma.dot(g.z));

    out.grad = Eigen::Map<const vec>(grad.data(), static_cast<Index>(grad.size()));
    return out;
}

double nlml(const TrajectoryDataset& data, const SystemSpec& spec, const Hyperparameters& hyper) {
    return nlml_eval(DatasetGeometry(data), spec, hyper, false).value;
}

vec nlml_grad(const TrajectoryDataset& data, const SystemSpec& spec, const Hyperparameters& hyper) {
    return nlml_eval(DatasetGeometry(data), spec, hyper, true).grad;
}

KernelEstimate posterior_kernel(const TrajectoryDataset& data, const SystemSpec& spec,
                                const Hyperparameters& hyper, const vec& r_grid) {
    const DatasetGeometry g(data);
    const KffParts parts = assemble_kff_parts(g, hyper.theta_E, hyper.theta_A);
    const mat K = parts.E + parts.A;
    const Factorization f = factorize_shifted(K, hyper.sigma);
    const vec res = residual_vector(g, spec, hyper);
    const vec gamma = f.llt.solve(res);

    KernelEstimate est;
    est.r_grid = r_grid;
    est.prior_E = hyper.theta_E;
    est.prior_A = hyper.theta_A;

    const auto Lfac = f.llt.matrixL();
    auto one_type = [&](KernelType type, const MaternParams& theta, vec& mean, vec& var) {
        const mat Ks = assemble_cross_cov(g, r_grid, type, theta);
        mean = Ks.transpose() * gamma;
        const mat v = Lfac.solve(Ks);
        var.resize(r_grid.size());
        for (Index i = 0; i < r_grid.size(); ++i) var[i] = theta.s2 - v.col(i).squaredNorm();
    };
    one_type(KernelType::Energy, hyper.theta_E, est.mean_E, est.var_E);
    one_type(KernelType::Alignment, hyper.theta_A, est.mean_A, est.var_A);
    return est;
}

PosteriorField posterior_grid(const TrajectoryDataset& data, const SystemSpec& spec,
                              const Hyperparameters& hyper, const vec& r_grid, KernelType type) {
    const DatasetGeometry g(data);
    const KffParts parts = assemble_kff_parts(g, hyper.theta_E, hyper.theta_A);
    const mat K = parts.E + parts.A;
    const Factorization f = factorize_shifted(K, hyper.sigma);
    const vec res = residual_vector(g, spec, hyper);
    const vec gamma = f.llt.solve(res);

    const MaternParams& theta = (type == KernelType::Energy) ? hyper.theta_E : hyper.theta_A;
    const mat Ks = assemble_cross_cov(g, r_grid, type, theta);
    PosteriorField field;
    field.mean = Ks.transpose() * gamma;
    const mat v = f.llt.matrixL().solve(Ks);
    field.cov = gram(theta, r_grid, r_grid) - v.transpose() * v;
    return field;
}

} // namespace ipgp
