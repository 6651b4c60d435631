#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ipgp/gp.hpp"
#include "test_helpers.hpp"

using namespace ipgp;
using ipgp::testing::dataset_from_states;
using ipgp::testing::plain_spec;
using ipgp::testing::random_dataset;

TEST_SUITE_BEGIN("gp");

namespace {

TrajectoryDataset toy_pair_dataset(double z0 = 0.0, double z1 = 0.0) {
    // N = 2, d = 1, one snapshot: x = (0, 1), v = (0, 1)
    mat states(4, 1), obs(2, 1);
    states << 0.0, 1.0, 0.0, 1.0;
    obs << z0, z1;
    return dataset_from_states(1, 2, 1, 1, states, obs);
}

Hyperparameters default_hyper(int n_alpha = 0) {
    Hyperparameters h;
    h.theta_E = {1.0, 1.0, Nu::ThreeHalves};
    h.theta_A = {1.0, 1.0, Nu::ThreeHalves};
    h.sigma = 0.0;
    h.alpha = vec::Zero(n_alpha);
    h.mass = 1.0;
    return h;
}

} // namespace

TEST_CASE("assemble_kff toy block values") {
    const TrajectoryDataset data = toy_pair_dataset();
    const MaternParams theta{1.0, 1.0, Nu::ThreeHalves};
    const mat K = assemble_kff(data, theta, theta);
    REQUIRE(K.rows() == 2);
    CHECK(K(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(K(0, 1) == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(K(1, 0) == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(K(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("assemble_kff additive structure and edge cases") {
    Rng rng(31);
    const TrajectoryDataset data = random_dataset(2, 3, 2, 2, rng);
    const DatasetGeometry g(data);
    const MaternParams tE{1.3, 0.9, Nu::ThreeHalves};
    const MaternParams tA{0.7, 1.4, Nu::Half};

    const KffParts parts = assemble_kff_parts(g, tE, tA);
    const mat K = assemble_kff(data, tE, tA);
    CHECK((K - parts.E - parts.A).cwiseAbs().maxCoeff() < 1e-14);

    // vanishing alignment amplitude leaves the energy-only covariance
    const MaternParams tiny{1e-300, 1.4, Nu::Half};
    const mat K_E_only = assemble_kff(data, tE, tiny);
    CHECK((K_E_only - parts.E).cwiseAbs().maxCoeff() < 1e-12);

    // single agent: empty pair sums
    const TrajectoryDataset solo = random_dataset(2, 1, 1, 3, rng);
    CHECK(assemble_kff(solo, tE, tA).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assemble_kff symmetry and PSD") {
    Rng rng(32);
    const TrajectoryDataset data = random_dataset(2, 4, 2, 2, rng);
    const mat K = assemble_kff(data, {1.0, 1.0, Nu::ThreeHalves}, {1.0, 1.0, Nu::ThreeHalves});
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<mat> es(K);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);

    // cross-snapshot block law Cov(f(Y), f(Y'))^T = Cov(f(Y'), f(Y))
    const int dN = 8;
    CHECK((K.block(0, dN, dN, dN).transpose() - K.block(dN, 0, dN, dN)).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("assemble_cross_cov toy and properties") {
    const TrajectoryDataset data = toy_pair_dataset();
    const MaternParams theta{1.0, 1.0, Nu::ThreeHalves};
    const vec r_star = vec::Constant(1, 1.0);

    const mat CE = assemble_cross_cov(data, r_star, KernelType::Energy, theta);
    CHECK(CE(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(CE(1, 0) == doctest::Approx(-0.5).epsilon(1e-14));

    // amplitude linearity
    const MaternParams twice{2.0, 1.0, Nu::ThreeHalves};
    const mat C2 = assemble_cross_cov(data, r_star, KernelType::Energy, twice);
    CHECK((C2 - 2.0 * CE).cwiseAbs().maxCoeff() < 1e-14);

    // single agent: zero matrix
    Rng rng(33);
    const TrajectoryDataset solo = random_dataset(1, 1, 1, 2, rng);
    CHECK(assemble_cross_cov(solo, r_star, KernelType::Energy, theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nlml degenerate single observation") {
    mat states(2, 1), obs(1, 1);
    states << 0.5, 0.2;
    obs << 0.0;
    const TrajectoryDataset data = dataset_from_states(1, 1, 1, 1, states, obs);
    Hyperparameters h = default_hyper();
    h.sigma = 1.0;
    const double v = nlml(data, plain_spec(1, 1), h);
    CHECK(v == doctest::Approx(0.5 * std::log(2.0 * 3.14159265358979323846)).epsilon(1e-12));
}

TEST_CASE("nlml quadratic term scales with residual") {
    Rng rng(34);
    const SystemSpec spec = plain_spec(1, 3);
    TrajectoryDataset data = random_dataset(1, 3, 1, 2, rng);
    Hyperparameters h = default_hyper();
    h.sigma = 0.3;

    TrajectoryDataset zero = data;
    for (auto& Z : zero.Z) Z.setZero();
    TrajectoryDataset twice = data;
    for (auto& Z : twice.Z) Z *= 2.0;

    const double f0 = nlml(zero, spec, h);
    const double f1 = nlml(data, spec, h);
    const double f2 = nlml(twice, spec, h);
    CHECK(f2 - f0 == doctest::Approx(4.0 * (f1 - f0)).epsilon(1e-10));
}

TEST_CASE("nlml matches naive dense oracle") {
    Rng rng(35);
    for (int rep = 0; rep < 4; ++rep) {
        // d N M L = 40
        const TrajectoryDataset data = random_dataset(2, 2, 5, 2, rng);
        const SystemSpec spec = plain_spec(2, 2);
        Hyperparameters h = default_hyper();
        h.theta_E = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), Nu::ThreeHalves};
        h.theta_A = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), Nu::Half};
        h.sigma = rng.uniform(0.2, 1.0);

        const double fast = nlml(data, spec, h);

        // oracle: explicit inverse, log-determinant from eigenvalues
        mat K = assemble_kff(data, h.theta_E, h.theta_A);
        K.diagonal().array() += h.sigma * h.sigma;
        const vec res = data.stacked_Z();
        Eigen::SelfAdjointEigenSolver<mat> es(K);
        const double logdet = es.eigenvalues().array().log().sum();
        const double quad = 0.5 * res.dot(K.inverse() * res);
        const double oracle =
            quad + 0.5 * logdet + 0.5 * 40.0 * std::log(2.0 * 3.14159265358979323846);
        CHECK(fast == doctest::Approx(oracle).epsilon(1e-8));
    }
}

namespace {

void check_gradient_fd(const TrajectoryDataset& data, const SystemSpec& spec,
                       const Hyperparameters& h, double tol) {
    const DatasetGeometry g(data);
    const vec grad = nlml_eval(g, spec, h, true).grad;
    const auto layout = gradient_layout(spec, h);
    REQUIRE(grad.size() == static_cast<Index>(layout.size()));

    auto value_at = [&](const Hyperparameters& hh) { return nlml_eval(g, spec, hh, false).value; };

    vec fd(grad.size());
    for (size_t k = 0; k < layout.size(); ++k) {
        const std::string& name = layout[k];
        auto perturb = [&](double eps) {
            Hyperparameters hh = h;
            if (name == "s2_E") hh.theta_E.s2 += eps;
            else if (name == "omega_E") hh.theta_E.omega += eps;
            else if (name == "s2_A") hh.theta_A.s2 += eps;
            else if (name == "omega_A") hh.theta_A.omega += eps;
            else if (name == "sigma") hh.sigma += eps;
            else if (name == "mass") hh.mass += eps;
            else if (name.rfind("alpha_", 0) == 0)
                hh.alpha[std::stoi(name.substr(6))] += eps;
            return value_at(hh);
        };
        double base = 1.0;
        if (name == "s2_E") base = h.theta_E.s2;
        else if (name == "omega_E") base = h.theta_E.omega;
        else if (name == "s2_A") base = h.theta_A.s2;
        else if (name == "omega_A") base = h.theta_A.omega;
        else if (name == "sigma") base = h.sigma;
        else if (name == "mass") base = h.mass;
        else if (name.rfind("alpha_", 0) == 0) base = std::abs(h.alpha[std::stoi(name.substr(6))]);
        const double hstep = 1e-5 * std::max(1.0, std::abs(base));
        fd[static_cast<Index>(k)] = (perturb(hstep) - perturb(-hstep)) / (2.0 * hstep);
    }
    // vector-norm relative error; per-component ratios drown in the
    // finite-difference noise floor of a large objective
    const double rel =
        (grad - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
    CHECK_MESSAGE(rel < tol, "gradient check: rel=", rel);
}

} // namespace

TEST_CASE("nlml_grad matches finite differences") {
    Rng rng(36);

    SUBCASE("plain system, theta and sigma") {
        const TrajectoryDataset data = random_dataset(2, 3, 1, 2, rng);
        Hyperparameters h = default_hyper();
        h.theta_E = {1.2, 0.8, Nu::ThreeHalves};
        h.theta_A = {0.6, 1.1, Nu::Half};
        h.sigma = 0.4;
        check_gradient_fd(data, plain_spec(2, 3), h, 1e-5);
    }

    SUBCASE("CS alpha gradient") {
        SystemSpec small = builtin_system(Builtin::CS);
        small.N = 4;
        const TrajectoryDataset data = generate_dataset(small, 1, 3, 0.0, 21);
        Hyperparameters h = default_hyper(2);
        h.alpha << 0.8, 1.5;
        h.sigma = 0.25;
        check_gradient_fd(data, small, h, 1e-5);
    }

    SUBCASE("ODS mass and alpha gradient") {
        SystemSpec small = builtin_system(Builtin::ODS);
        small.N = 4;
        small.stubborn = {0};
        const TrajectoryDataset data = generate_dataset(small, 2, 2, 0.0, 22);
        Hyperparameters h = default_hyper(2);
        h.alpha << 0.7, 5.0;
        h.sigma = 0.3;
        h.mass = 0.4;
        h.mask.mass = true;
        check_gradient_fd(data, small, h, 1e-5);
    }
}

TEST_CASE("nlml sigma profile increases at large sigma") {
    Rng rng(37);
    const TrajectoryDataset data = random_dataset(1, 3, 1, 3, rng);
    const SystemSpec spec = plain_spec(1, 3);
    Hyperparameters h = default_hyper();
    h.sigma = 50.0; // far above the residual scale
    const DatasetGeometry g(data);
    const vec grad = nlml_eval(g, spec, h, true).grad;
    const auto layout = gradient_layout(spec, h);
    for (size_t k = 0; k < layout.size(); ++k)
        if (layout[k] == "sigma") CHECK(grad[static_cast<Index>(k)] > 0.0);
}

TEST_CASE("masked fields are not emitted") {
    Rng rng(38);
    const TrajectoryDataset data = random_dataset(1, 2, 1, 2, rng);
    Hyperparameters h = default_hyper();
    h.sigma = 0.5;
    h.mask.theta_E = false;
    h.mask.sigma = false;
    const auto layout = gradient_layout(plain_spec(1, 2), h);
    CHECK(layout == std::vector<std::string>{"s2_A", "omega_A"});
    const vec grad = nlml_grad(data, plain_spec(1, 2), h);
    CHECK(grad.size() == 2);
}

TEST_CASE("posterior_kernel zero residual and variance bounds") {
    Rng rng(39);
    TrajectoryDataset data = random_dataset(2, 3, 1, 2, rng);
    for (auto& Z : data.Z) Z.setZero();
    Hyperparameters h = default_hyper();
    h.sigma = 0.2;
    const vec grid = linspace(0.0, 3.0, 25);
    const KernelEstimate est = posterior_kernel(data, plain_spec(2, 3), h, grid);
    CHECK(est.mean_E.cwiseAbs().maxCoeff() == 0.0);
    CHECK(est.mean_A.cwiseAbs().maxCoeff() == 0.0);
    for (Index i = 0; i < grid.size(); ++i) {
        CHECK(est.var_E[i] <= h.theta_E.s2 + 1e-12);
        CHECK(est.var_E[i] >= -1e-10);
        CHECK(est.var_A[i] <= h.theta_A.s2 + 1e-12);
        CHECK(est.var_A[i] >= -1e-10);
    }
}

TEST_CASE("posterior_kernel matches a hand 2x2 solve") {
    TrajectoryDataset data = toy_pair_dataset(0.7, -0.3);
    Hyperparameters h = default_hyper();
    h.sigma = 0.5;
    const vec grid = vec::Constant(1, 0.6);
    const KernelEstimate est = posterior_kernel(data, plain_spec(1, 2), h, grid);

    // oracle by explicit 2x2 linear algebra
    const mat K = assemble_kff(data, h.theta_E, h.theta_A);
    mat Khat = K;
    Khat.diagonal().array() += h.sigma * h.sigma;
    const mat Kinv = Khat.inverse();
    const vec res = data.stacked_Z();
    const mat CE = assemble_cross_cov(data, grid, KernelType::Energy, h.theta_E);
    const mat CA = assemble_cross_cov(data, grid, KernelType::Alignment, h.theta_A);
    const double mean_E = (CE.transpose() * Kinv * res)(0);
    const double mean_A = (CA.transpose() * Kinv * res)(0);
    const double var_E = h.theta_E.s2 - (CE.transpose() * Kinv * CE)(0);
    const double var_A = h.theta_A.s2 - (CA.transpose() * Kinv * CA)(0);

    CHECK(est.mean_E[0] == doctest::Approx(mean_E).epsilon(1e-12));
    CHECK(est.mean_A[0] == doctest::Approx(mean_A).epsilon(1e-12));
    CHECK(est.var_E[0] == doctest::Approx(var_E).epsilon(1e-12));
    CHECK(est.var_A[0] == doctest::Approx(var_A).epsilon(1e-12));
}

TEST_CASE("posterior_grid covariance diagonal equals variance") {
    Rng rng(40);
    const TrajectoryDataset data = random_dataset(2, 3, 1, 2, rng);
    Hyperparameters h = default_hyper();
    h.sigma = 0.3;
    const vec grid = linspace(0.1, 2.0, 8);
    const SystemSpec spec = plain_spec(2, 3);
    const KernelEstimate est = posterior_kernel(data, spec, h, grid);
    const PosteriorField field = posterior_grid(data, spec, h, grid, KernelType::Energy);
    CHECK((field.mean - est.mean_E).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((field.cov.diagonal() - est.var_E).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<mat> es(field.cov);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
}

TEST_SUITE_END();
