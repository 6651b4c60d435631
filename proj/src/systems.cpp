#include "ipgp/systems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ipgp {

namespace {

bool is_zero(const RadialKernel& phi) { return !phi; }

} // namespace

int SystemSpec::alpha_dim() const { return static_cast<int>(alpha.size()); }

std::string force_family_name(ForceFamily f) {
    switch (f) {
        case ForceFamily::None: return "none";
        case ForceFamily::Rayleigh: return "rayleigh";
        case ForceFamily::Drag: return "drag";
        case ForceFamily::Stubborn: return "stubborn";
    }
    return "none";
}

ForceFamily force_family_from_name(const std::string& name) {
    if (name == "none") return ForceFamily::None;
    if (name == "rayleigh") return ForceFamily::Rayleigh;
    if (name == "drag") return ForceFamily::Drag;
    if (name == "stubborn") return ForceFamily::Stubborn;
    throw std::invalid_argument("unknown force family: " + name);
}

Builtin builtin_from_name(const std::string& name) {
    if (name == "CS") return Builtin::CS;
    if (name == "FM") return Builtin::FM;
    if (name == "AD") return Builtin::AD;
    if (name == "OD") return Builtin::OD;
    if (name == "ODS") return Builtin::ODS;
    throw std::invalid_argument("unknown system: " + name);
}

std::string builtin_name(Builtin b) {
    switch (b) {
        case Builtin::CS: return "CS";
        case Builtin::FM: return "FM";
        case Builtin::AD: return "AD";
        case Builtin::OD: return "OD";
        case Builtin::ODS: return "ODS";
    }
    return "CS";
}

FmTruncation fm_truncation_constants() {
    // Match value and derivative of (-exp(-2r) + exp(-r/4)) / r at r0.
    const double r0 = 0.05;
    const double f = (-std::exp(-2.0 * r0) + std::exp(-r0 / 4.0)) / r0;
    const double num = (2.0 * std::exp(-2.0 * r0) - 0.25 * std::exp(-r0 / 4.0)) * r0 -
                       (-std::exp(-2.0 * r0) + std::exp(-r0 / 4.0));
    const double fp = num / (r0 * r0);
    const double b = -fp / f;
    const double a = f * std::exp(b * r0);
    return {r0, a, b};
}

namespace {

RadialKernel fm_morse_kernel() {
    const FmTruncation t = fm_truncation_constants();
    return [t](double r) {
        if (r < t.r0) return t.a * std::exp(-t.b * r);
        return (-std::exp(-2.0 * r) + std::exp(-r / 4.0)) / r;
    };
}

RadialKernel od_kernel() {
    return [](double r) {
        if (r < 0.4) return 25.0 * r;
        if (r < 0.6) return 10.0;
        if (r < 1.0) return 25.0 - 25.0 * r;
        return 0.0;
    };
}

vec const_box(int d, double v) { return vec::Constant(d, v); }

} // namespace

SystemSpec builtin_system(Builtin b) {
    SystemSpec s;
    switch (b) {
        case Builtin::CS:
            s.d = 2;
            s.N = 10;
            s.mass = 1.0;
            s.force = ForceFamily::Rayleigh;
            s.alpha = vec{{1.0, 2.0}}; // (kappa, p)
            s.phi_E = nullptr;
            s.phi_A = [](double r) { return 1.0 / std::pow(1.0 + r * r, 0.25); };
            s.x_lo = const_box(2, -2.0);
            s.x_hi = const_box(2, 2.0);
            s.v_lo = const_box(2, -1.0);
            s.v_hi = const_box(2, 1.0);
            s.T = 10.0;
            s.T_final = 20.0;
            return s;
        case Builtin::FM:
            s.d = 2;
            s.N = 10;
            s.mass = 1.0;
            s.force = ForceFamily::Drag;
            s.alpha = vec{{1.5, 0.5}}; // (gamma, beta)
            s.phi_E = fm_morse_kernel();
            s.phi_A = nullptr;
            s.x_lo = const_box(2, -0.5);
            s.x_hi = const_box(2, 0.5);
            s.v_lo = const_box(2, 0.0);
            s.v_hi = const_box(2, 0.0);
            s.T = 5.0;
            s.T_final = 10.0;
            return s;
        case Builtin::AD:
            s.d = 2;
            s.N = 10;
            s.mass = 1.0;
            s.force = ForceFamily::None;
            s.alpha = vec(0);
            s.phi_E = [](double r) {
                return 0.1 / std::pow(1.0 + r, 2.5) + 1.0 / std::sqrt(1.0 + r);
            };
            s.phi_A = [](double r) { return 0.1 / std::sqrt(1.0 + r * r); };
            s.x_lo = const_box(2, 0.0);
            s.x_hi = const_box(2, 5.0);
            s.v_lo = const_box(2, 0.0);
            s.v_hi = const_box(2, 5.0);
            s.T = 10.0;
            s.T_final = 20.0;
            return s;
        case Builtin::OD:
            s.d = 1;
            s.N = 5;
            s.mass = 0.0;
            s.force = ForceFamily::Stubborn;
            s.alpha = vec(0); // no stubborn agents: pure -v friction
            s.stubborn = {};
            s.phi_E = od_kernel();
            s.phi_A = nullptr;
            s.x_lo = const_box(1, -1.0);
            s.x_hi = const_box(1, 1.0);
            s.v_lo = const_box(1, 0.0);
            s.v_hi = const_box(1, 0.0);
            s.T = 2.0;
            s.T_final = 20.0;
            return s;
        case Builtin::ODS:
            s = builtin_system(Builtin::OD);
            s.N = 10;
            s.alpha = vec{{1.0, 10.0}}; // (P, kappa)
            s.stubborn = {0};
            return s;
    }
    throw std::invalid_argument("unknown builtin system");
}

SystemSpec builtin_system(const std::string& name) { return builtin_system(builtin_from_name(name)); }

vec force_eval(const SystemSpec& spec, const vec& state) {
    const int d = spec.d, N = spec.N;
    vec F = vec::Zero(d * N);
    const auto x = state.head(d * N);
    const auto v = state.tail(d * N);
    switch (spec.force) {
        case ForceFamily::None:
            return F;
        case ForceFamily::Rayleigh: {
            const double kappa = spec.alpha[0], p = spec.alpha[1];
            for (int i = 0; i < N; ++i) {
                const auto vi = v.segment(i * d, d);
                F.segment(i * d, d) = kappa * (1.0 - std::pow(vi.norm(), p)) * vi;
            }
            return F;
        }
        case ForceFamily::Drag: {
            const double gamma = spec.alpha[0], beta = spec.alpha[1];
            for (int i = 0; i < N; ++i) {
                const auto vi = v.segment(i * d, d);
                F.segment(i * d, d) = (gamma - beta * vi.squaredNorm()) * vi;
            }
            return F;
        }
        case ForceFamily::Stubborn: {
            F = -v;
            if (!spec.stubborn.empty()) {
                if (spec.alpha.size() < 2)
                    throw std::invalid_argument("stubborn force requires alpha = (P, kappa)");
                const double P = spec.alpha[0], kappa = spec.alpha[1];
                for (int i : spec.stubborn)
                    F.segment(i * d, d) -= kappa * (x.segment(i * d, d).array() - P).matrix();
            }
            return F;
        }
    }
    return F;
}

mat force_alpha_jacobian(const SystemSpec& spec, const vec& state) {
    const int d = spec.d, N = spec.N;
    const int na = spec.alpha_dim();
    mat J = mat::Zero(d * N, na);
    if (na == 0) return J;
    const auto x = state.head(d * N);
    const auto v = state.tail(d * N);
    switch (spec.force) {
        case ForceFamily::None:
            return J;
        case ForceFamily::Rayleigh: {
            const double kappa = spec.alpha[0], p = spec.alpha[1];
            for (int i = 0; i < N; ++i) {
                const auto vi = v.segment(i * d, d);
                const double sp = vi.norm();
                J.block(i * d, 0, d, 1) = (1.0 - std::pow(sp, p)) * vi;
                if (sp > 0.0)
                    J.block(i * d, 1, d, 1) = -kappa * std::pow(sp, p) * std::log(sp) * vi;
            }
            return J;
        }
        case ForceFamily::Drag: {
            for (int i = 0; i < N; ++i) {
                const auto vi = v.segment(i * d, d);
                J.block(i * d, 0, d, 1) = vi;
                J.block(i * d, 1, d, 1) = -vi.squaredNorm() * vi;
            }
            return J;
        }
        case ForceFamily::Stubborn: {
            const double P = spec.alpha[0], kappa = spec.alpha[1];
            for (int i : spec.stubborn) {
                J.block(i * d, 0, d, 1) = vec::Constant(d, kappa);
                J.block(i * d, 1, d, 1) = -(x.segment(i * d, d).array() - P).matrix();
            }
            return J;
        }
    }
    return J;
}

vec rhs(const SystemSpec& spec, const RadialKernel& phi_E, const RadialKernel& phi_A,
        const vec& state) {
    const int d = spec.d, N = spec.N;
    if (state.size() != 2 * d * N) throw std::invalid_argument("rhs: bad state size");
    if (!state.allFinite()) throw std::invalid_argument("rhs: non-finite state");
    if (spec.mass == 0.0 && !is_zero(phi_A))
        throw std::invalid_argument("rhs: first-order system requires phi_A == 0");

    const auto x = state.head(d * N);
    const auto v = state.tail(d * N);
    vec out = force_eval(spec, state);

    const bool haveE = !is_zero(phi_E), haveA = !is_zero(phi_A);
    if (haveE || haveA) {
        for (int i = 0; i < N; ++i) {
            vec acc = vec::Zero(d);
            const auto xi = x.segment(i * d, d);
            const auto vi = v.segment(i * d, d);
            for (int j = 0; j < N; ++j) {
                if (j == i) continue;
                const vec dx = x.segment(j * d, d) - xi;
                const double r = dx.norm();
                if (haveE) {
                    const double kE = phi_E(r);
                    if (!std::isfinite(kE))
                        throw std::runtime_error("rhs: non-finite phi_E at pair (" +
                                                 std::to_string(i) + "," + std::to_string(j) + ")");
                    acc += kE * dx;
                }
                if (haveA) {
                    const double kA = phi_A(r);
                    if (!std::isfinite(kA))
                        throw std::runtime_error("rhs: non-finite phi_A at pair (" +
                                                 std::to_string(i) + "," + std::to_string(j) + ")");
                    acc += kA * (v.segment(j * d, d) - vi);
                }
            }
            out.segment(i * d, d) += acc / N;
        }
    }
    if (spec.mass > 0.0) out /= spec.mass;
    return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct OdeOutput {
    mat states; // dim x times
};

OdeOutput integrate_dopri5(const std::function<vec(double, const vec&)>& f, const vec& y0,
                           const vec& times, double rtol, double atol) {
    const Index dim = y0.size();
    OdeOutput out;
    out.states.resize(dim, times.size());

    double t = times[0];
    vec y = y0;
    out.states.col(0) = y;
    vec k1 = f(t, y);

    double h = 1e-3 * std::max(1.0, std::abs(times[times.size() - 1] - t));

    for (Index idx = 1; idx < times.size(); ++idx) {
        const double t_target = times[idx];
        while (t < t_target) {
            h = std::min(h, t_target - t);
            if (h < 1e-14 * std::max(1.0, std::abs(t)))
                throw std::runtime_error("simulate: step size underflow at t = " + std::to_string(t));

            const vec k2 = f(t + c2 * h, y + h * (a21 * k1));
            const vec k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
            const vec k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            const vec k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const vec k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const vec y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const vec k7 = f(t + h, y5);
            const vec err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

            double err = 0.0;
            for (Index i = 0; i < dim; ++i) {
                const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
                const double q = err_vec[i] / sc;
                err += q * q;
            }
            err = std::sqrt(err / static_cast<double>(dim));

            if (err <= 1.0) {
                t += h;
                y = y5;
                k1 = k7; // FSAL
            }
            const double fac = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
            h *= std::clamp(fac, 0.2, 5.0);
        }
        out.states.col(idx) = y;
    }
    return out;
}

} // namespace

Trajectory simulate(const SystemSpec& spec, const RadialKernel& phi_E, const RadialKernel& phi_A,
                    const vec& initial_state, const vec& times, double rtol, double atol) {
    if (times.size() < 1) throw std::invalid_argument("simulate: empty time grid");
    for (Index i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("simulate: times not increasing");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("simulate: tolerances must be > 0");

    const int d = spec.d, N = spec.N;
    Trajectory traj;
    traj.times = times;
    traj.states.resize(2 * d * N, times.size());

    if (spec.mass == 0.0) {
        // First-order evolution on positions; v block reports xdot.
        auto f = [&](double, const vec& x) {
            vec st(2 * d * N);
            st << x, vec::Zero(d * N);
            return rhs(spec, phi_E, phi_A, st);
        };
        const OdeOutput out = integrate_dopri5(f, initial_state.head(d * N), times, rtol, atol);
        for (Index l = 0; l < times.size(); ++l) {
            traj.states.col(l).head(d * N) = out.states.col(l);
            traj.states.col(l).tail(d * N) = f(times[l], out.states.col(l));
        }
        return traj;
    }

    auto f = [&](double, const vec& y) {
        vec dy(2 * d * N);
        dy.head(d * N) = y.tail(d * N);
        dy.tail(d * N) = rhs(spec, phi_E, phi_A, y);
        return dy;
    };
    const OdeOutput out = integrate_dopri5(f, initial_state, times, rtol, atol);
    traj.states = out.states;
    return traj;
}

vec TrajectoryDataset::stacked_Z() const {
    vec z(total_dim());
    Index at = 0;
    for (int m = 0; m < M; ++m)
        for (int l = 0; l < L; ++l) {
            z.segment(at, d * N) = Z[static_cast<size_t>(m)].col(l);
            at += d * N;
        }
    return z;
}

namespace {

// d/dt of a first-order right-hand side g along its own flow, via a central
// difference in the flow direction: d/dt g(x(t)) = Jg(x) g(x).
vec flow_second_derivative(const SystemSpec& spec, const RadialKernel& phi_E,
                           const RadialKernel& phi_A, const vec& x) {
    const int dN = spec.d * spec.N;
    auto g = [&](const vec& xx) {
        vec st(2 * dN);
        st << xx, vec::Zero(dN);
        return rhs(spec, phi_E, phi_A, st);
    };
    const vec gx = g(x);
    const double gn = gx.norm();
    if (gn == 0.0) return vec::Zero(dN);
    const double h = 1e-6 * (1.0 + x.norm()) / gn;
    return (g(x + h * gx) - g(x - h * gx)) / (2.0 * h);
}

} // namespace

TrajectoryDataset generate_dataset(const SystemSpec& spec, int M, int L, double sigma,
                                   std::uint64_t seed) {
    if (M < 1 || L < 1) throw std::invalid_argument("generate_dataset: M, L must be >= 1");
    if (sigma < 0.0) throw std::invalid_argument("generate_dataset: sigma must be >= 0");

    const int d = spec.d, N = spec.N, dN = d * N;
    TrajectoryDataset data;
    data.d = d;
    data.N = N;
    data.M = M;
    data.L = L;
    data.times = linspace(0.0, spec.T, L);
    data.noise_sigma = sigma;
    data.Y.assign(static_cast<size_t>(M), mat());
    data.Z.assign(static_cast<size_t>(M), mat());

    const Rng root(seed);
    std::vector<std::string> errors(static_cast<size_t>(M));

#pragma omp parallel for schedule(dynamic)
    for (int m = 0; m < M; ++m) {
        try {
            Rng rng = root.fork(static_cast<std::uint64_t>(m));
            vec y0(2 * dN);
            for (int i = 0; i < N; ++i)
                for (int k = 0; k < d; ++k)
                    y0[i * d + k] = rng.uniform(spec.x_lo[k], spec.x_hi[k]);
            for (int i = 0; i < N; ++i)
                for (int k = 0; k < d; ++k)
                    y0[dN + i * d + k] =
                        spec.mass == 0.0 ? 0.0 : rng.uniform(spec.v_lo[k], spec.v_hi[k]);

            const Trajectory traj = simulate(spec, spec.phi_E, spec.phi_A, y0, data.times);

            mat Zm(dN, L);
            for (int l = 0; l < L; ++l) {
                if (spec.mass == 0.0)
                    Zm.col(l) = flow_second_derivative(spec, spec.phi_E, spec.phi_A,
                                                       traj.states.col(l).head(dN));
                else
                    Zm.col(l) = rhs(spec, spec.phi_E, spec.phi_A, traj.states.col(l));
            }
            if (sigma > 0.0) {
                Rng noise = root.fork(0x10000ull + static_cast<std::uint64_t>(m));
                for (int l = 0; l < L; ++l)
                    for (int i = 0; i < dN; ++i) Zm(i, l) += sigma * noise.normal();
            }
            data.Y[static_cast<size_t>(m)] = traj.states;
            data.Z[static_cast<size_t>(m)] = Zm;
        } catch (const std::exception& e) {
            errors[static_cast<size_t>(m)] = e.what();
        }
    }
    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error("generate_dataset: " + err);
    return data;
}

TrajectoryDataset select_agents(const TrajectoryDataset& data, const std::vector<int>& agents) {
    if (agents.empty()) return data;
    for (int a : agents)
        if (a < 0 || a >= data.N) throw std::invalid_argument("select_agents: index out of range");
    const int d = data.d;
    const int n = static_cast<int>(agents.size());
    TrajectoryDataset out;
    out.d = d;
    out.N = n;
    out.M = data.M;
    out.L = data.L;
    out.times = data.times;
    out.noise_sigma = data.noise_sigma;
    out.Y.resize(data.Y.size());
    out.Z.resize(data.Z.size());
    for (int m = 0; m < data.M; ++m) {
        mat Ym(2 * d * n, data.L), Zm(d * n, data.L);
        for (int a = 0; a < n; ++a) {
            const int src = agents[static_cast<size_t>(a)];
            Ym.middleRows(a * d, d) = data.Y[static_cast<size_t>(m)].middleRows(src * d, d);
            Ym.middleRows(d * n + a * d, d) =
                data.Y[static_cast<size_t>(m)].middleRows(d * data.N + src * d, d);
            Zm.middleRows(a * d, d) = data.Z[static_cast<size_t>(m)].middleRows(src * d, d);
        }
        out.Y[static_cast<size_t>(m)] = Ym;
        out.Z[static_cast<size_t>(m)] = Zm;
    }
    return out;
}

TrajectoryDataset preprocess_frames(const mat& frames, int d, int N, int window, double dt) {
    if (window < 1) throw std::invalid_argument("preprocess_frames: window must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("preprocess_frames: dt must be > 0");
    if (frames.rows() != d * N) throw std::invalid_argument("preprocess_frames: bad frame size");
    const Index L_in = frames.cols();
    const Index L_out = L_in - window - 2;
    if (L_out < 1)
        throw std::invalid_argument("preprocess_frames: too few frames (need >= window + 3)");

    // Near-centered average over [t - h1, t + h2], h1 + h2 = window.
    const int h1 = (window + 1) / 2, h2 = window - h1;
    const Index L_s = L_in - window; // frames with a full averaging stencil
    mat smooth(d * N, L_s);
    for (Index t = 0; t < L_s; ++t) {
        smooth.col(t).setZero();
        for (int k = -h1; k <= h2; ++k) smooth.col(t) += frames.col(t + h1 + k);
        smooth.col(t) /= static_cast<double>(window + 1);
    }

    TrajectoryDataset data;
    data.d = d;
    data.N = N;
    data.M = 1;
    data.L = static_cast<int>(L_out);
    data.noise_sigma = 0.0;
    data.times = linspace(0.0, static_cast<double>(L_out - 1) * dt, L_out);

    mat Y(2 * d * N, L_out), Z(d * N, L_out);
    for (Index t = 0; t < L_out; ++t) {
        const Index c = t + 1; // interior index into the smoothed sequence
        Y.col(t).head(d * N) = smooth.col(c);
        Y.col(t).tail(d * N) = (smooth.col(c + 1) - smooth.col(c - 1)) / (2.0 * dt);
        Z.col(t) = (smooth.col(c + 1) - 2.0 * smooth.col(c) + smooth.col(c - 1)) / (dt * dt);
    }
    data.Y.push_back(Y);
    data.Z.push_back(Z);
    return data;
}

} // namespace ipgp
