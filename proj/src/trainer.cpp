#include "ipgp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ipgp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kC1 = 1e-4; // sufficient decrease
constexpr double kC2 = 0.1;  // curvature, CG-appropriate

struct LineSearchEval {
    double phi = kInf;
    double dphi = 0.0;
    vec grad;
};

} // namespace

MinimizeResult minimize_cg(const std::function<double(const vec&, vec&)>& objective, const vec& x0,
                           const MinimizeOptions& opts) {
    MinimizeResult res;
    res.x = x0;
    int evals = 0;

    auto eval = [&](const vec& x, vec& grad) -> double {
        ++evals;
        if (!x.allFinite()) {
            grad.setZero(x.size());
            return kInf;
        }
        try {
            const double f = objective(x, grad);
            if (!grad.allFinite()) return kInf;
            return std::isfinite(f) ? f : kInf;
        } catch (const std::exception&) {
            grad.setZero(x.size());
            return kInf;
        }
    };

    vec g(x0.size());
    double f = eval(res.x, g);
    if (!std::isfinite(f)) throw std::runtime_error("minimize: objective failed at initial point");
    res.trace.push_back({0, f, g.norm()});

    vec x_best = res.x;
    double f_best = f;

    vec d = -g;
    double alpha_prev = 0.0;
    int iteration = 0;

    while (true) {
        if (g.norm() < opts.grad_tol) {
            res.stop_reason = "gradient";
            break;
        }
        if (evals >= opts.max_evals) {
            res.stop_reason = "budget";
            break;
        }
        if (d.dot(g) >= 0.0) d = -g; // restart on a non-descent direction

        const double dphi0 = d.dot(g);
        const double phi0 = f;
        double a = (alpha_prev > 0.0) ? alpha_prev : 1.0 / (1.0 + g.norm());
        a = std::min(a, 1.0);

        // Strong Wolfe search: bracket then zoom.
        double a_lo = 0.0, a_hi = -1.0;
        double phi_lo = phi0, dphi_lo = dphi0, phi_hi = 0.0;
        double a_prev_ls = 0.0, phi_prev = phi0, dphi_prev = dphi0;
        LineSearchEval cur;
        bool bracketed = false, accepted = false;

        for (int i = 0; i < 12 && evals < opts.max_evals; ++i) {
            cur.grad.resize(res.x.size());
            cur.phi = eval(res.x + a * d, cur.grad);
            cur.dphi = std::isfinite(cur.phi) ? cur.grad.dot(d) : 0.0;
            if (cur.phi > phi0 + kC1 * a * dphi0 || (i > 0 && cur.phi >= phi_prev) ||
                !std::isfinite(cur.phi)) {
                a_lo = a_prev_ls;
                phi_lo = phi_prev;
                dphi_lo = dphi_prev;
                a_hi = a;
                phi_hi = cur.phi;
                bracketed = true;
                break;
            }
            if (std::abs(cur.dphi) <= -kC2 * dphi0) {
                accepted = true;
                break;
            }
            if (cur.dphi >= 0.0) {
                a_lo = a;
                phi_lo = cur.phi;
                dphi_lo = cur.dphi;
                a_hi = a_prev_ls;
                phi_hi = phi_prev;
                bracketed = true;
                break;
            }
            // secant step on the slope (exact for quadratics), else double
            double a_next = 2.0 * a;
            if (cur.dphi > dphi0) {
                const double secant = a * dphi0 / (dphi0 - cur.dphi);
                if (std::isfinite(secant)) a_next = std::clamp(secant, 1.05 * a, 10.0 * a);
            }
            a_prev_ls = a;
            phi_prev = cur.phi;
            dphi_prev = cur.dphi;
            a = a_next;
        }

        if (bracketed && !accepted) {
            for (int i = 0; i < 25 && evals < opts.max_evals; ++i) {
                // quadratic interpolation with bisection fallback
                double a_mid = a_lo - 0.5 * dphi_lo * (a_hi - a_lo) * (a_hi - a_lo) /
                                          (phi_hi - phi_lo - dphi_lo * (a_hi - a_lo));
                const double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
                if (!std::isfinite(a_mid) || a_mid <= lo + 0.1 * (hi - lo) ||
                    a_mid >= hi - 0.1 * (hi - lo))
                    a_mid = 0.5 * (a_lo + a_hi);
                cur.grad.resize(res.x.size());
                cur.phi = eval(res.x + a_mid * d, cur.grad);
                cur.dphi = std::isfinite(cur.phi) ? cur.grad.dot(d) : 0.0;
                if (cur.phi > phi0 + kC1 * a_mid * dphi0 || cur.phi >= phi_lo ||
                    !std::isfinite(cur.phi)) {
                    a_hi = a_mid;
                    phi_hi = cur.phi;
                } else {
                    if (std::abs(cur.dphi) <= -kC2 * dphi0) {
                        a = a_mid;
                        accepted = true;
                        break;
                    }
                    if (cur.dphi * (a_hi - a_lo) >= 0.0) {
                        a_hi = a_lo;
                        phi_hi = phi_lo;
                    }
                    a_lo = a_mid;
                    phi_lo = cur.phi;
                    dphi_lo = cur.dphi;
                }
                if (std::abs(a_hi - a_lo) < 1e-14 * std::max(1.0, std::abs(a_lo))) break;
                a = a_mid;
            }
            // fall back to the best sufficient-decrease point found
            if (!accepted && std::isfinite(phi_lo) && phi_lo < phi0 && a_lo > 0.0) {
                a = a_lo;
                cur.grad.resize(res.x.size());
                cur.phi = eval(res.x + a * d, cur.grad);
                cur.dphi = std::isfinite(cur.phi) ? cur.grad.dot(d) : 0.0;
                accepted = std::isfinite(cur.phi) && cur.phi < phi0;
            }
        }

        if (!accepted || !(cur.phi < phi0)) {
            if (d != -g) { // one steepest-descent retry before giving up
                d = -g;
                alpha_prev = 0.0;
                continue;
            }
            res.stop_reason = "line_search";
            break;
        }

        const vec g_old = g;
        res.x += a * d;
        f = cur.phi;
        g = cur.grad;
        alpha_prev = a;
        ++iteration;
        res.trace.push_back({iteration, f, g.norm()});
        if (f < f_best) {
            f_best = f;
            x_best = res.x;
        }

        const double g_old_sq = g_old.squaredNorm();
        const double beta_pr = g_old_sq > 0.0 ? g.dot(g - g_old) / g_old_sq : 0.0;
        const double beta = std::isfinite(beta_pr) ? std::max(0.0, beta_pr) : 0.0;
        d = -g + beta * d;
    }

    res.x = x_best;
    res.f = f_best;
    res.evals = evals;
    if (res.stop_reason.empty()) res.stop_reason = "budget";
    return res;
}

namespace {

struct Packing {
    bool theta_E, theta_A, sigma, alpha, mass;
    int n_alpha;

    explicit Packing(const SystemSpec& spec, const Hyperparameters& h)
        : theta_E(h.mask.theta_E),
          theta_A(h.mask.theta_A),
          sigma(h.mask.sigma),
          alpha(h.mask.alpha && spec.alpha_dim() > 0),
          mass(h.mask.mass),
          n_alpha(spec.alpha_dim()) {}

    int size() const {
        return (theta_E ? 2 : 0) + (theta_A ? 2 : 0) + (sigma ? 1 : 0) + (alpha ? n_alpha : 0) +
               (mass ? 1 : 0);
    }

    vec pack(const Hyperparameters& h) const {
        vec x(size());
        int at = 0;
        if (theta_E) {
            x[at++] = std::log(h.theta_E.s2);
            x[at++] = std::log(h.theta_E.omega);
        }
        if (theta_A) {
            x[at++] = std::log(h.theta_A.s2);
            x[at++] = std::log(h.theta_A.omega);
        }
        if (sigma) x[at++] = std::log(h.sigma);
        if (alpha)
            for (int i = 0; i < n_alpha; ++i) x[at++] = h.alpha[i];
        if (mass) x[at++] = h.mass;
        return x;
    }

    Hyperparameters unpack(const vec& x, const Hyperparameters& base) const {
        Hyperparameters h = base;
        int at = 0;
        if (theta_E) {
            h.theta_E.s2 = std::exp(x[at++]);
            h.theta_E.omega = std::exp(x[at++]);
        }
        if (theta_A) {
            h.theta_A.s2 = std::exp(x[at++]);
            h.theta_A.omega = std::exp(x[at++]);
        }
        if (sigma) h.sigma = std::exp(x[at++]);
        if (alpha)
            for (int i = 0; i < n_alpha; ++i) h.alpha[i] = x[at++];
        if (mass) h.mass = x[at++];
        return h;
    }

    // natural-scale gradient -> packed-space gradient
    vec chain_rule(const vec& g_natural, const Hyperparameters& h) const {
        vec g(size());
        int at = 0, src = 0;
        if (theta_E) {
            g[at++] = g_natural[src++] * h.theta_E.s2;
            g[at++] = g_natural[src++] * h.theta_E.omega;
        }
        if (theta_A) {
            g[at++] = g_natural[src++] * h.theta_A.s2;
            g[at++] = g_natural[src++] * h.theta_A.omega;
        }
        if (sigma) g[at++] = g_natural[src++] * h.sigma;
        if (alpha)
            for (int i = 0; i < n_alpha; ++i) g[at++] = g_natural[src++];
        if (mass) g[at++] = g_natural[src++];
        return g;
    }
};

} // namespace

TrainResult minimize_nlml(const TrajectoryDataset& data, const SystemSpec& spec,
                          const TrainConfig& config, Backend backend, const AccelConfig& accel) {
    if (config.max_evals < 1) throw std::invalid_argument("train: max_evals must be >= 1");
    const DatasetGeometry geom(data);
    const Packing packing(spec, config.init);
    if (packing.size() == 0) throw std::invalid_argument("train: every field is masked off");

    TrainResult best;
    best.nlml = kInf;

    for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
        Rng rng = Rng(config.seed).fork(static_cast<std::uint64_t>(restart));
        Hyperparameters init = config.init;
        if (init.alpha.size() != spec.alpha_dim()) init.alpha = spec.alpha;
        if (config.randomize_init) {
            if (packing.alpha)
                for (Index i = 0; i < init.alpha.size(); ++i) init.alpha[i] = rng.uniform();
            if (packing.sigma) init.sigma = rng.uniform();
            if (packing.mass) init.mass = rng.uniform();
        }
        if (packing.sigma && init.sigma <= 0.0) init.sigma = 0.5;

        auto objective = [&](const vec& x, vec& grad) -> double {
            const Hyperparameters h = packing.unpack(x, init);
            const NlmlResult r = (backend == Backend::Exact)
                                     ? nlml_eval(geom, spec, h, true)
                                     : accelerated_nlml(geom, spec, h, accel);
            grad = packing.chain_rule(r.grad, h);
            return r.value;
        };

        MinimizeOptions opts;
        opts.max_evals = config.max_evals;
        opts.grad_tol = config.grad_tol;
        const MinimizeResult run = minimize_cg(objective, packing.pack(init), opts);

        if (run.f < best.nlml) {
            best.hyper = packing.unpack(run.x, init);
            best.nlml = run.f;
            best.evals = run.evals;
            best.trace = run.trace;
            best.stop_reason = run.stop_reason;
        }
    }
    best.hyper.mass = std::max(0.0, best.hyper.mass);
    return best;
}

std::string trace_to_jsonl(const std::vector<EvalRecord>& trace) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& rec : trace)
        out << "{\"iteration\":" << rec.iteration << ",\"nlml\":" << rec.nlml
            << ",\"grad_norm\":" << rec.grad_norm << "}\n";
    return out.str();
}

} // namespace ipgp
