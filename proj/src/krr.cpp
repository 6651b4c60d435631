#include "ipgp/krr.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace ipgp {

namespace {

vec stacked_radii(const DatasetGeometry& g) {
    const Index NN = static_cast<Index>(g.N) * g.N;
    vec r(NN * g.snapshots());
    for (int s = 0; s < g.snapshots(); ++s) r.segment(s * NN, NN) = g.radii[static_cast<size_t>(s)];
    return r;
}

} // namespace

mat pairwise_block_matrix(const DatasetGeometry& g, KernelType type) {
    const int N = g.N, d = g.d, S = g.snapshots();
    const Index dN = static_cast<Index>(d) * N;
    const Index NN = static_cast<Index>(N) * N;
    const std::vector<mat>& diff = (type == KernelType::Energy) ? g.xdiff : g.vdiff;
    mat R = mat::Zero(g.n, NN * S);
    for (int s = 0; s < S; ++s) {
        const mat& D = diff[static_cast<size_t>(s)];
        for (int i = 0; i < N; ++i)
            R.block(s * dN + i * d, s * NN + static_cast<Index>(i) * N, d, N) =
                D.middleRows(static_cast<Index>(i) * N, N).transpose();
    }
    return R;
}

RepresenterCoefficients representer_coefficients(const TrajectoryDataset& data,
                                                 const MaternParams& theta_E,
                                                 const MaternParams& theta_A, double lambda,
                                                 const vec* target) {
    if (!(lambda > 0.0)) throw std::invalid_argument("representer: lambda must be > 0");
    const DatasetGeometry g(data);
    const KffParts parts = assemble_kff_parts(g, theta_E, theta_A);
    mat Khat = parts.E + parts.A;
    const double shift = lambda * g.N * g.M * g.L;
    Khat.diagonal().array() += shift;

    Eigen::LLT<mat> llt(Khat);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("representer: Cholesky factorization failed");
    const vec y = target ? *target : g.z;
    const vec w = llt.solve(y);

    RepresenterCoefficients coeffs;
    coeffs.radii = stacked_radii(g);
    coeffs.c_rx = pairwise_block_matrix(g, KernelType::Energy).transpose() * w / g.N;
    coeffs.c_rv = pairwise_block_matrix(g, KernelType::Alignment).transpose() * w / g.N;
    return coeffs;
}

RepresenterCoefficients representer_coefficients_coupled(const TrajectoryDataset& data,
                                                         const MaternParams& theta_E,
                                                         const MaternParams& theta_A,
                                                         double lambda_E, double lambda_A,
                                                         const vec* target) {
    if (!(lambda_E > 0.0) || !(lambda_A > 0.0))
        throw std::invalid_argument("representer: lambdas must be > 0");
    const DatasetGeometry g(data);
    const vec radii = stacked_radii(g);
    const Index p = radii.size();
    const mat RX = pairwise_block_matrix(g, KernelType::Energy);
    const mat RV = pairwise_block_matrix(g, KernelType::Alignment);
    const mat KE = gram(theta_E, radii, radii);
    const mat KA = gram(theta_A, radii, radii);
    const vec y = target ? *target : g.z;

    const double scale = static_cast<double>(g.N) * g.N * g.N * g.M * g.L;
    mat A(2 * p, 2 * p);
    A.topLeftCorner(p, p) = RX.transpose() * RX * KE;
    A.topLeftCorner(p, p).diagonal().array() += lambda_E * scale;
    A.topRightCorner(p, p) = RX.transpose() * RV * KA;
    A.bottomLeftCorner(p, p) = RV.transpose() * RX * KE;
    A.bottomRightCorner(p, p) = RV.transpose() * RV * KA;
    A.bottomRightCorner(p, p).diagonal().array() += lambda_A * scale;

    vec b(2 * p);
    b.head(p) = g.N * (RX.transpose() * y);
    b.tail(p) = g.N * (RV.transpose() * y);

    const vec c = A.partialPivLu().solve(b);
    RepresenterCoefficients coeffs;
    coeffs.radii = radii;
    coeffs.c_rx = c.head(p);
    coeffs.c_rv = c.tail(p);
    return coeffs;
}

std::pair<vec, vec> krr_estimate(const RepresenterCoefficients& coeffs,
                                 const MaternParams& theta_E, const MaternParams& theta_A,
                                 const vec& r_grid) {
    const mat GE = gram(theta_E, coeffs.radii, r_grid);
    const mat GA = gram(theta_A, coeffs.radii, r_grid);
    return {GE.transpose() * coeffs.c_rx, GA.transpose() * coeffs.c_rv};
}

std::pair<double, double> krr_estimate(const RepresenterCoefficients& coeffs,
                                       const MaternParams& theta_E, const MaternParams& theta_A,
                                       double r_star) {
    const auto [e, a] = krr_estimate(coeffs, theta_E, theta_A, vec::Constant(1, r_star));
    return {e[0], a[0]};
}

double check_equivalence(const TrajectoryDataset& data, const SystemSpec& spec,
                         const Hyperparameters& hyper, const vec& r_grid) {
    if (!(hyper.sigma > 0.0)) throw std::invalid_argument("check_equivalence: sigma must be > 0");
    const KernelEstimate post = posterior_kernel(data, spec, hyper, r_grid);

    const DatasetGeometry g(data);
    const vec res = residual_vector(g, spec, hyper);
    const double lambda =
        hyper.sigma * hyper.sigma / (static_cast<double>(data.M) * data.N * data.L);
    const RepresenterCoefficients coeffs =
        representer_coefficients(data, hyper.theta_E, hyper.theta_A, lambda, &res);
    const auto [krr_E, krr_A] = krr_estimate(coeffs, hyper.theta_E, hyper.theta_A, r_grid);

    const double dev_E = (post.mean_E - krr_E).cwiseAbs().maxCoeff();
    const double dev_A = (post.mean_A - krr_A).cwiseAbs().maxCoeff();
    return std::max(dev_E, dev_A);
}

double kff_identity_residual(const TrajectoryDataset& data, const MaternParams& theta_E,
                             const MaternParams& theta_A) {
    const DatasetGeometry g(data);
    const vec radii = stacked_radii(g);
    const mat RX = pairwise_block_matrix(g, KernelType::Energy);
    const mat RV = pairwise_block_matrix(g, KernelType::Alignment);
    const mat lhs = RX * gram(theta_E, radii, radii) * RX.transpose() +
                    RV * gram(theta_A, radii, radii) * RV.transpose();
    const KffParts parts = assemble_kff_parts(g, theta_E, theta_A);
    const mat rhs = static_cast<double>(g.N) * g.N * (parts.E + parts.A);
    return (lhs - rhs).norm() / rhs.norm();
}

} // namespace ipgp
