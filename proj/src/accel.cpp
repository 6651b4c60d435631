#include "ipgp/accel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace ipgp {

LinearOperator LinearOperator::from_matrix(const mat& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("LinearOperator: matrix not square");
    LinearOperator op;
    op.n = A.rows();
    op.matvec = [&A](const vec& v) { return vec(A * v); };
    return op;
}

PcgResult pcg(const LinearOperator& op, const PrecondApply& precond, const vec& b, const vec& x0,
              double tol, int max_iter, bool reorthogonalize) {
    if (!(tol > 0.0)) throw std::invalid_argument("pcg: tol must be > 0");
    const double bnorm = b.norm();
    PcgResult out;
    out.x = x0.size() ? x0 : vec::Zero(op.n);
    if (bnorm == 0.0) {
        out.x.setZero();
        out.converged = true;
        return out;
    }

    auto apply_p = [&](const vec& v) { return precond ? precond(v) : v; };

    vec r = b - op.matvec(out.x);
    vec z = apply_p(r);
    vec d = z;
    double rz = r.dot(z);

    std::vector<vec> r_hist, z_hist;
    std::vector<double> rz_hist;
    if (reorthogonalize) {
        r_hist.push_back(r);
        z_hist.push_back(z);
        rz_hist.push_back(rz);
    }

    for (int it = 0; it < max_iter; ++it) {
        if (r.norm() <= tol * bnorm) {
            out.converged = true;
            break;
        }
        const vec v = op.matvec(d);
        const double dv = d.dot(v);
        if (dv <= 0.0) throw std::runtime_error("pcg: operator not positive definite");
        const double alpha = rz / dv;
        out.x += alpha * d;
        r -= alpha * v;
        if (reorthogonalize) {
            // keep residuals P^-1-orthogonal to the full history
            for (size_t k = 0; k < r_hist.size(); ++k)
                r -= (z_hist[k].dot(r) / rz_hist[k]) * r_hist[k];
        }
        z = apply_p(r);
        const double rz_new = r.dot(z);
        const double beta = rz_new / rz;
        d = z + beta * d;
        rz = rz_new;
        out.alpha.push_back(alpha);
        out.beta.push_back(beta);
        out.res_norms.push_back(rz_new > 0.0 ? std::sqrt(rz_new) : 0.0);
        ++out.iterations;
        if (rz_new <= 0.0) break; // breakdown
        if (reorthogonalize) {
            r_hist.push_back(r);
            z_hist.push_back(z);
            rz_hist.push_back(rz);
        }
    }
    out.rel_residual = (b - op.matvec(out.x)).norm() / bnorm;
    out.converged = out.converged || out.rel_residual <= tol;
    return out;
}

int nystrom_default_rank(Index n) {
    const double r = std::floor(30.0 / std::log(12.0) * std::log(static_cast<double>(n) / 10.0));
    return static_cast<int>(std::clamp(r, 1.0, static_cast<double>(n)));
}

vec NystromPreconditioner::apply_inverse(const vec& v) const {
    const vec Utv = U.transpose() * v;
    const vec scaled =
        ((lambda.array() + sigma2).inverse() * Utv.array()).matrix() * (lambda_r + sigma2);
    return U * scaled + v - U * Utv;
}

PrecondApply NystromPreconditioner::as_apply() const {
    return [this](const vec& v) { return apply_inverse(v); };
}

vec NystromPreconditioner::apply_sqrt(const vec& g) const {
    const vec Utg = U.transpose() * g;
    const vec scaled =
        (((lambda.array() + sigma2) / (lambda_r + sigma2)).sqrt() * Utg.array()).matrix();
    return U * scaled + g - U * Utg;
}

NystromPreconditioner nystrom_precond_auto(const LinearOperator& op, double sigma2, int rank0,
                                           std::uint64_t seed) {
    // The sketch underestimates eigenvalues near its edge, so require the
    // estimate to clear sigma2 by a wide margin before stopping.
    int rank = std::min<Index>(std::max(rank0, 1), op.n);
    while (true) {
        NystromPreconditioner P = nystrom_precond(op, sigma2, rank, seed);
        if (P.lambda_r <= 0.01 * sigma2 || rank >= op.n) return P;
        rank = static_cast<int>(std::min<Index>(2 * rank, op.n));
    }
}

NystromPreconditioner nystrom_precond(const LinearOperator& op, double sigma2, int rank,
                                      std::uint64_t seed) {
    const Index n = op.n;
    if (rank < 1 || rank > n) throw std::invalid_argument("nystrom: rank out of range");

    Rng rng(seed);
    mat omega(n, rank);
    for (Index j = 0; j < rank; ++j)
        for (Index i = 0; i < n; ++i) omega(i, j) = rng.normal();

    const mat Q = Eigen::HouseholderQR<mat>(omega).householderQ() * mat::Identity(n, rank);
    mat Y(n, rank);
    for (Index j = 0; j < rank; ++j) Y.col(j) = op.matvec(Q.col(j));

    double nu = std::numeric_limits<double>::epsilon() * Y.norm();
    if (nu == 0.0) nu = std::numeric_limits<double>::epsilon();

    mat B;
    bool ok = false;
    for (int attempt = 0; attempt < 4; ++attempt) {
        const mat Ynu = Y + nu * Q;
        const mat C = Q.transpose() * Ynu;
        Eigen::LLT<mat> llt(0.5 * (C + C.transpose()));
        if (llt.info() == Eigen::Success) {
            // B = Ynu * chol(C)^-1
            B = llt.matrixU().transpose().solve(Ynu.transpose()).transpose();
            ok = true;
            break;
        }
        nu *= 10.0;
    }
    if (!ok) throw std::runtime_error("nystrom: inner Cholesky failed after shift escalation");

    Eigen::JacobiSVD<mat> svd(B, Eigen::ComputeThinU);
    NystromPreconditioner P;
    P.U = svd.matrixU();
    P.lambda = (svd.singularValues().array().square() - nu).max(0.0).matrix();
    P.sigma2 = sigma2;
    P.lambda_r = P.lambda[P.lambda.size() - 1];
    P.nu_shift = nu;
    P.logdet = ((P.lambda.array() + sigma2) / (P.lambda_r + sigma2)).log().sum();
    return P;
}

namespace {

// Quadrature weight sum_j W_1j^2 log(lambda_j) of the CG tridiagonal.
double lanczos_quadrature(const std::vector<double>& alpha, const std::vector<double>& beta) {
    const int m = static_cast<int>(alpha.size());
    if (m == 0) return 0.0;
    vec diag(m), sub(std::max(m - 1, 0));
    for (int j = 0; j < m; ++j) {
        diag[j] = 1.0 / alpha[static_cast<size_t>(j)];
        if (j > 0) diag[j] += beta[static_cast<size_t>(j - 1)] / alpha[static_cast<size_t>(j - 1)];
        if (j + 1 < m) {
            const double bj = beta[static_cast<size_t>(j)];
            if (!(bj > 0.0)) {
                // Lanczos breakdown: truncate the quadrature here.
                diag.conservativeResize(j + 1);
                sub.conservativeResize(j);
                break;
            }
            sub[j] = std::sqrt(bj) / alpha[static_cast<size_t>(j)];
        }
    }
    Eigen::SelfAdjointEigenSolver<mat> es;
    es.computeFromTridiagonal(diag, sub);
    double q = 0.0;
    for (Index j = 0; j < es.eigenvalues().size(); ++j) {
        const double lam = es.eigenvalues()[j];
        if (lam > 0.0) {
            const double w = es.eigenvectors()(0, j);
            q += w * w * std::log(lam);
        }
    }
    return q;
}

} // namespace

double slq_logdet(const LinearOperator& op_shifted, const NystromPreconditioner* precond,
                  int n_probes, int m_coeffs, std::uint64_t seed, bool gaussian_probes) {
    if (n_probes < 1 || m_coeffs < 1)
        throw std::invalid_argument("slq: probes and coefficients must be >= 1");
    const Index n = op_shifted.n;
    const int m = static_cast<int>(std::min<Index>(m_coeffs, n));
    const PrecondApply apply = precond ? precond->as_apply() : PrecondApply{};

    const Rng root(seed);
    vec contrib = vec::Zero(n_probes);
    std::vector<std::string> errors(static_cast<size_t>(n_probes));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_probes; ++i) {
        try {
            Rng rng = root.fork(static_cast<std::uint64_t>(i));
            if (gaussian_probes && precond) {
                // spherically normalized so that v^T P^-1 v = n exactly; unbiased
                // for tr log of the preconditioned system without chi-square noise
                vec gdir = rng.normal_vec(n);
                gdir *= std::sqrt(static_cast<double>(n)) / gdir.norm();
                const vec v = precond->apply_sqrt(gdir);
                const PcgResult run = pcg(op_shifted, apply, v, vec::Zero(n), 1e-12, m, true);
                contrib[i] = static_cast<double>(n) * lanczos_quadrature(run.alpha, run.beta);
            } else {
                const vec v = rng.rademacher_vec(n);
                const PcgResult run = pcg(op_shifted, apply, v, vec::Zero(n), 1e-12, m, true);
                contrib[i] = static_cast<double>(n) * lanczos_quadrature(run.alpha, run.beta);
            }
        } catch (const std::exception& e) {
            errors[static_cast<size_t>(i)] = e.what();
        }
    }
    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error("slq: " + err);
    const double base = precond ? precond->logdet : 0.0;
    return base + contrib.sum() / n_probes;
}

NlmlResult accelerated_nlml(const DatasetGeometry& g, const SystemSpec& spec,
                            const Hyperparameters& hyper, const AccelConfig& cfg) {
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    const KffParts parts = assemble_kff_parts(g, hyper.theta_E, hyper.theta_A);
    const double jitter = (hyper.sigma == 0.0) ? 1e-6 : 0.0;
    const double shift = hyper.sigma * hyper.sigma + jitter;
    const Index n = g.n;

    const mat K = parts.E + parts.A;
    LinearOperator opK; // unshifted
    opK.n = n;
    opK.matvec = [&K](const vec& v) { return vec(K * v); };
    LinearOperator op; // shifted
    op.n = n;
    op.matvec = [&K, shift](const vec& v) { return vec(K * v + shift * v); };

    const int rank = cfg.rank > 0 ? cfg.rank : nystrom_default_rank(n);
    const NystromPreconditioner P =
        cfg.auto_rank ? nystrom_precond_auto(opK, shift, std::min<Index>(rank, n), cfg.seed)
                      : nystrom_precond(opK, shift, std::min<Index>(rank, n), cfg.seed);
    const PrecondApply apply = P.as_apply();

    const vec res = residual_vector(g, spec, hyper);
    const PcgResult solve = pcg(op, apply, res, vec::Zero(n), cfg.pcg_tol, cfg.pcg_max_iter);
    const vec& gamma = solve.x;

    const int m = static_cast<int>(std::min<Index>(cfg.m_coeffs, n > 1 ? n - 1 : 1));
    const Rng root(cfg.seed + 1);

    // Hutchinson probes: Rademacher, shared between the log-det quadrature
    // (default path) and the gradient traces.
    std::vector<vec> probe_u(static_cast<size_t>(cfg.n_probes));
    std::vector<vec> probe_v(static_cast<size_t>(cfg.n_probes));
    vec quad_contrib = vec::Zero(cfg.n_probes);
    vec trinv_contrib = vec::Zero(cfg.n_probes);
    std::vector<std::string> errors(static_cast<size_t>(cfg.n_probes));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < cfg.n_probes; ++i) {
        try {
            Rng rng = root.fork(static_cast<std::uint64_t>(i));
            const vec v = rng.rademacher_vec(n);
            const PcgResult run =
                pcg(op, apply, v, vec::Zero(n), cfg.pcg_tol, m, cfg.reorthogonalize);
            quad_contrib[i] = static_cast<double>(n) * lanczos_quadrature(run.alpha, run.beta);
            trinv_contrib[i] = v.dot(run.x);
            probe_u[static_cast<size_t>(i)] = run.x;
            probe_v[static_cast<size_t>(i)] = v;
        } catch (const std::exception& e) {
            errors[static_cast<size_t>(i)] = e.what();
        }
    }
    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error("accelerated_nlml: " + err);

    double logdet;
    if (cfg.variance_reduced) {
        logdet = slq_logdet(op, &P, cfg.n_probes, m, cfg.seed + 2, true);
    } else {
        logdet = P.logdet + quad_contrib.sum() / cfg.n_probes;
    }
    const double tr_inv = trinv_contrib.sum() / cfg.n_probes;

    NlmlResult out;
    out.jitter = jitter;
    out.value = 0.5 * res.dot(gamma) + 0.5 * logdet + 0.5 * static_cast<double>(n) * kLog2Pi;

    const TrainMask& msk = hyper.mask;
    std::vector<double> grad;
    auto hutchinson_trace = [&](const mat& dK) {
        double tr = 0.0;
        for (int i = 0; i < cfg.n_probes; ++i)
            tr += probe_u[static_cast<size_t>(i)].dot(dK * probe_v[static_cast<size_t>(i)]);
        return tr / cfg.n_probes;
    };
    if (msk.theta_E) {
        grad.push_back(0.5 * (hutchinson_trace(parts.E) - gamma.dot(parts.E * gamma)) /
                       hyper.theta_E.s2);
        const mat dE = assemble_kff_domega(g, hyper.theta_E, KernelType::Energy);
        grad.push_back(0.5 * (hutchinson_trace(dE) - gamma.dot(dE * gamma)));
    }
    if (msk.theta_A) {
        grad.push_back(0.5 * (hutchinson_trace(parts.A) - gamma.dot(parts.A * gamma)) /
                       hyper.theta_A.s2);
        const mat dA = assemble_kff_domega(g, hyper.theta_A, KernelType::Alignment);
        grad.push_back(0.5 * (hutchinson_trace(dA) - gamma.dot(dA * gamma)));
    }
    if (msk.sigma) grad.push_back(hyper.sigma * (tr_inv - gamma.squaredNorm()));
    if (msk.alpha && spec.alpha_dim() > 0) {
        SystemSpec s = spec;
        s.alpha = hyper.alpha;
        const Index dN = static_cast<Index>(g.d) * g.N;
        vec ga = vec::Zero(spec.alpha_dim());
        for (int i = 0; i < g.snapshots(); ++i) {
            const mat J = force_alpha_jacobian(s, g.states[static_cast<size_t>(i)]);
            ga -= J.transpose() * gamma.segment(i * dN, dN);
        }
        for (Index i = 0; i < ga.size(); ++i) grad.push_back(ga[i]);
    }
    if (msk.mass) grad.push_back(gamma.dot(g.z));

    out.grad = Eigen::Map<const vec>(grad.data(), static_cast<Index>(grad.size()));
    return out;
}

NlmlResult accelerated_nlml(const TrajectoryDataset& data, const SystemSpec& spec,
                            const Hyperparameters& hyper, const AccelConfig& cfg) {
    return accelerated_nlml(DatasetGeometry(data), spec, hyper, cfg);
}

} // namespace ipgp
