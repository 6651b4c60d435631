// Command-line experiment runner: data generation, training, prediction,
// verification, acceleration benchmarks, and frame ingestion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipgp/analysis.hpp"
#include "ipgp/dataset_io.hpp"
#include "ipgp/krr.hpp"
#include "ipgp/trainer.hpp"

using namespace ipgp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    json j;
    in >> j;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

vec json_to_vec(const json& arr) {
    vec v(static_cast<Index>(arr.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = arr[static_cast<size_t>(i)].get<double>();
    return v;
}

json vec_to_json(const vec& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

struct Experiment {
    json config;
    std::string system = "CS";
    SystemSpec spec;
    int M = 3, L = 3;
    double sigma = 0.0;
    std::uint64_t seed = 1;

    int grid_size = 200;
    double grid_max = -1.0;
    double horizon = -1.0;
    int uq_samples = 30;
    std::vector<int> agent_subset;

    TrainConfig train;
    Backend backend = Backend::Exact;
    AccelConfig accel;
};

SystemSpec spec_from_config(const json& cfg) {
    SystemSpec spec = builtin_system(cfg.value("system", std::string("CS")));
    if (cfg.contains("overrides")) {
        const json& ov = cfg["overrides"];
        if (ov.contains("N")) spec.N = ov["N"].get<int>();
        if (ov.contains("mass")) spec.mass = ov["mass"].get<double>();
        if (ov.contains("T")) spec.T = ov["T"].get<double>();
        if (ov.contains("T_final")) spec.T_final = ov["T_final"].get<double>();
        if (ov.contains("x_lo")) spec.x_lo = json_to_vec(ov["x_lo"]);
        if (ov.contains("x_hi")) spec.x_hi = json_to_vec(ov["x_hi"]);
        if (ov.contains("v_lo")) spec.v_lo = json_to_vec(ov["v_lo"]);
        if (ov.contains("v_hi")) spec.v_hi = json_to_vec(ov["v_hi"]);
        if (ov.contains("alpha")) spec.alpha = json_to_vec(ov["alpha"]);
        if (ov.contains("stubborn")) spec.stubborn = ov["stubborn"].get<std::vector<int>>();
    }
    return spec;
}

Experiment parse_experiment(const std::string& config_path, long seed_override,
                            const std::string& backend_override) {
    Experiment ex;
    ex.config = config_path.empty() ? json::object() : load_json_file(config_path);
    const json& cfg = ex.config;

    ex.system = cfg.value("system", std::string("CS"));
    ex.spec = spec_from_config(cfg);
    ex.M = cfg.value("M", 3);
    ex.L = cfg.value("L", 3);
    ex.sigma = cfg.value("sigma", 0.0);
    ex.seed = cfg.value("seed", 1ull);
    if (seed_override >= 0) ex.seed = static_cast<std::uint64_t>(seed_override);

    ex.grid_size = cfg.value("grid_size", 200);
    ex.grid_max = cfg.value("grid_max", -1.0);
    ex.horizon = cfg.value("horizon", -1.0);
    ex.uq_samples = cfg.value("uq_samples", 30);
    if (cfg.contains("agent_subset")) ex.agent_subset = cfg["agent_subset"].get<std::vector<int>>();

    const json tr = cfg.value("train", json::object());
    ex.train.max_evals = tr.value("max_evals", 400);
    ex.train.restarts = tr.value("restarts", 1);
    ex.train.grad_tol = tr.value("grad_tol", 1e-8);
    ex.train.randomize_init = tr.value("randomize_init", true);
    ex.train.seed = ex.seed;

    Hyperparameters& h = ex.train.init;
    h.theta_E = {tr.value("init_s2_E", 1.0), tr.value("init_omega_E", 1.0),
                 nu_from_double(cfg.value("nu_E", 1.5))};
    h.theta_A = {tr.value("init_s2_A", 1.0), tr.value("init_omega_A", 1.0),
                 nu_from_double(cfg.value("nu_A", 1.5))};
    h.sigma = tr.value("init_sigma", ex.sigma);
    h.mass = tr.value("init_mass", ex.spec.mass);
    h.alpha = tr.contains("init_alpha") ? json_to_vec(tr["init_alpha"]) : ex.spec.alpha;
    h.mask.theta_E = tr.value("train_theta_E", true);
    h.mask.theta_A = tr.value("train_theta_A", true);
    h.mask.sigma = tr.value("train_sigma", ex.sigma > 0.0);
    h.mask.alpha = tr.value("train_alpha", ex.spec.alpha_dim() > 0);
    h.mask.mass = tr.value("train_mass", false);

    std::string backend = cfg.value("backend", std::string("exact"));
    if (!backend_override.empty()) backend = backend_override;
    if (backend == "exact") ex.backend = Backend::Exact;
    else if (backend == "accel") ex.backend = Backend::Accelerated;
    else throw std::runtime_error("unknown backend: " + backend);

    const json ac = cfg.value("accel", json::object());
    ex.accel.pcg_tol = ac.value("pcg_tol", 1e-6);
    ex.accel.pcg_max_iter = ac.value("pcg_max_iter", 500);
    ex.accel.n_probes = ac.value("probes", 10);
    ex.accel.m_coeffs = ac.value("m_coeffs", 50);
    ex.accel.rank = ac.value("rank", -1);
    ex.accel.variance_reduced = ac.value("variance_reduced", false);
    ex.accel.auto_rank = ac.value("auto_rank", false);
    ex.accel.seed = ex.seed;
    return ex;
}

void write_provenance(const Experiment& ex, const std::string& out_dir) {
    json cfg = ex.config;
    cfg["seed"] = ex.seed;
    write_text(out_dir + "/config.json", cfg.dump(2) + "\n");
}

json hyper_to_json(const Hyperparameters& h) {
    json j;
    j["s2_E"] = h.theta_E.s2;
    j["omega_E"] = h.theta_E.omega;
    j["nu_E"] = nu_to_double(h.theta_E.nu);
    j["s2_A"] = h.theta_A.s2;
    j["omega_A"] = h.theta_A.omega;
    j["nu_A"] = nu_to_double(h.theta_A.nu);
    j["sigma"] = h.sigma;
    j["alpha"] = vec_to_json(h.alpha);
    j["mass"] = h.mass;
    return j;
}

Hyperparameters hyper_from_json(const json& j) {
    Hyperparameters h;
    h.theta_E = {j.at("s2_E").get<double>(), j.at("omega_E").get<double>(),
                 nu_from_double(j.value("nu_E", 1.5))};
    h.theta_A = {j.at("s2_A").get<double>(), j.at("omega_A").get<double>(),
                 nu_from_double(j.value("nu_A", 1.5))};
    h.sigma = j.at("sigma").get<double>();
    h.alpha = json_to_vec(j.at("alpha"));
    h.mass = j.at("mass").get<double>();
    return h;
}

int cmd_simulate(const Experiment& ex, const std::string& out_dir) {
    const TrajectoryDataset data = generate_dataset(ex.spec, ex.M, ex.L, ex.sigma, ex.seed);
    fs::create_directories(out_dir);
    save_dataset(data, out_dir + "/dataset.json");
    write_provenance(ex, out_dir);
    std::printf("dataset: d=%d N=%d M=%d L=%d sigma=%g -> %s/dataset.json\n", data.d, data.N,
                data.M, data.L, data.noise_sigma, out_dir.c_str());
    return 0;
}

int cmd_train(const Experiment& ex, const std::string& dataset_path, const std::string& out_dir) {
    TrajectoryDataset data = load_dataset(dataset_path);
    SystemSpec spec = ex.spec;
    if (!ex.agent_subset.empty()) {
        data = select_agents(data, ex.agent_subset);
        spec.N = data.N;
    }
    const TrainResult result = minimize_nlml(data, spec, ex.train, ex.backend, ex.accel);

    fs::create_directories(out_dir);
    json model;
    model["system"] = ex.system;
    model["hyper"] = hyper_to_json(result.hyper);
    model["final_nlml"] = result.nlml;
    model["evals"] = result.evals;
    model["stop_reason"] = result.stop_reason;
    model["config"] = ex.config;
    write_text(out_dir + "/model.json", model.dump(2) + "\n");
    write_text(out_dir + "/trace.jsonl", trace_to_jsonl(result.trace));
    write_provenance(ex, out_dir);

    std::printf("train: nlml=%.6f evals=%d stop=%s\n", result.nlml, result.evals,
                result.stop_reason.c_str());
    const json hj = hyper_to_json(result.hyper);
    std::printf("hyper: %s\n", hj.dump().c_str());
    return 0;
}

vec radius_grid(const Experiment& ex, const TrajectoryDataset& data) {
    double rmax = ex.grid_max;
    if (rmax <= 0.0) {
        const DatasetGeometry g(data);
        rmax = 1.1 * std::max(g.max_radius, 1e-6);
    }
    return linspace(0.0, rmax, std::max(2, ex.grid_size));
}

int cmd_predict(const Experiment& ex, const std::string& model_path,
                const std::string& dataset_path, const std::string& out_dir) {
    const json model = load_json_file(model_path);
    const Hyperparameters hyper = hyper_from_json(model.at("hyper"));
    const TrajectoryDataset data = load_dataset(dataset_path);

    json mcfg = ex.config;
    mcfg["system"] = model.value("system", ex.system);
    SystemSpec spec = spec_from_config(mcfg);
    spec.alpha = hyper.alpha;

    // order selection: a trained mass close to zero identifies a first-order
    // system; prediction then runs the selected model
    const bool mass_trained =
        model.value("config", json::object()).value("train", json::object()).value("train_mass", false);
    const double order_threshold = ex.config.value("order_threshold", 1e-2);
    Hyperparameters selected = hyper;
    if (mass_trained && std::abs(selected.mass) <= order_threshold) selected.mass = 0.0;
    spec.mass = selected.mass;

    const vec grid = radius_grid(ex, data);
    const KernelEstimate est = posterior_kernel(data, spec, selected, grid);
    const EmpiricalMeasure rho = empirical_rho_from_dataset(data, std::max(2, ex.grid_size));

    fs::create_directories(out_dir);

    // kernels.csv: r, posterior means, +-2 std bands, empirical densities
    {
        std::ostringstream csv;
        csv.precision(17);
        csv << "r,mean_E,lo_E,hi_E,mean_A,lo_A,hi_A,rho_E,rho_A\n";
        const double bin_w = rho.edges[1] - rho.edges[0];
        for (Index i = 0; i < grid.size(); ++i) {
            const double sE = 2.0 * std::sqrt(std::max(0.0, est.var_E[i]));
            const double sA = 2.0 * std::sqrt(std::max(0.0, est.var_A[i]));
            Index bin = bin_w > 0.0 ? static_cast<Index>(grid[i] / bin_w) : 0;
            const bool in_range = grid[i] <= rho.R;
            bin = std::clamp<Index>(bin, 0, rho.weights_E.size() - 1);
            csv << grid[i] << ',' << est.mean_E[i] << ',' << est.mean_E[i] - sE << ','
                << est.mean_E[i] + sE << ',' << est.mean_A[i] << ',' << est.mean_A[i] - sA << ','
                << est.mean_A[i] + sA << ',' << (in_range ? rho.weights_E[bin] / bin_w : 0.0)
                << ',' << (in_range ? rho.weights_A[bin] / bin_w : 0.0) << '\n';
        }
        write_text(out_dir + "/kernels.csv", csv.str());
    }

    // trajectories simulated with the learned model from the training ICs
    const double t_end = ex.horizon > 0.0 ? ex.horizon : spec.T;
    vec times;
    if (t_end <= data.times[data.L - 1] * 1.0000001) {
        times = data.times;
    } else {
        times = linspace(0.0, t_end, std::max<Index>(data.L, 40));
    }
    const RadialKernel phiE = interpolated_kernel(grid, est.mean_E);
    const RadialKernel phiA = spec.mass == 0.0 ? RadialKernel{} : interpolated_kernel(grid, est.mean_A);

    TrajectoryDataset predicted;
    predicted.d = data.d;
    predicted.N = data.N;
    predicted.M = data.M;
    predicted.L = static_cast<int>(times.size());
    predicted.times = times;
    predicted.noise_sigma = 0.0;
    json metrics;
    json traj_errors = json::array();
    for (int m = 0; m < data.M; ++m) {
        const Trajectory pred = simulate(spec, phiE, phiA, data.state(m, 0), times);
        mat Z(data.d * data.N, times.size());
        for (Index l = 0; l < times.size(); ++l)
            Z.col(l) = rhs(spec, phiE, phiA, pred.states.col(l));
        predicted.Y.push_back(pred.states);
        predicted.Z.push_back(Z);
        if (times.size() == data.times.size()) {
            Trajectory truth;
            truth.times = data.times;
            truth.states = data.Y[static_cast<size_t>(m)];
            traj_errors.push_back(trajectory_error(truth, pred, times[0], times[times.size() - 1]));
        }
    }
    save_dataset(predicted, out_dir + "/predicted.json");
    metrics["trajectory_rel_l2"] = traj_errors;

    // Monte-Carlo uncertainty band around the first training IC
    const UQEnsemble ens =
        uq_ensemble(data, spec, selected, grid, data.state(0, 0), times, ex.uq_samples, ex.seed);
    json uq;
    uq["times"] = vec_to_json(times);
    uq["n_samples"] = ens.n_samples;
    uq["n_failed"] = ens.n_failed;
    json mean_rows = json::array(), std_rows = json::array();
    for (Index l = 0; l < times.size(); ++l) {
        mean_rows.push_back(vec_to_json(ens.mean.col(l)));
        std_rows.push_back(vec_to_json(ens.stddev.col(l)));
    }
    uq["mean"] = std::move(mean_rows);
    uq["stddev"] = std::move(std_rows);
    write_text(out_dir + "/uq.json", uq.dump() + "\n");

    metrics["grid_size"] = grid.size();
    metrics["grid_max"] = grid[grid.size() - 1];
    metrics["config"] = ex.config;
    write_text(out_dir + "/metrics.json", metrics.dump(2) + "\n");
    write_provenance(ex, out_dir);
    std::printf("predict: grid=%ld kernels.csv predicted.json uq.json written to %s\n",
                static_cast<long>(grid.size()), out_dir.c_str());
    return 0;
}

int cmd_verify(const Experiment& ex, const std::string& model_path,
               const std::string& dataset_path, const std::string& out_dir) {
    const json model = load_json_file(model_path);
    Hyperparameters hyper = hyper_from_json(model.at("hyper"));
    const TrajectoryDataset data = load_dataset(dataset_path);

    json mcfg = ex.config;
    mcfg["system"] = model.value("system", ex.system);
    SystemSpec spec = spec_from_config(mcfg);
    spec.alpha = hyper.alpha;
    spec.mass = hyper.mass;

    const json vcfg = ex.config.value("verify", json::object());
    const double grad_tol = vcfg.value("gradient_tol", 1e-5);
    const double krr_tol = vcfg.value("krr_tol", 1e-8);
    const double identity_tol = vcfg.value("identity_tol", 1e-10);

    json report;
    bool all_pass = true;
    auto record = [&](const std::string& name, double value, double threshold, bool pass) {
        json entry;
        entry["value"] = value;
        entry["threshold"] = threshold;
        entry["pass"] = pass;
        report[name] = entry;
        all_pass = all_pass && pass;
        std::printf("%-22s %-10.3e (threshold %.1e) %s\n", name.c_str(), value, threshold,
                    pass ? "pass" : "FAIL");
    };

    // finite-difference gradient agreement at the model's hyperparameters
    {
        Hyperparameters h = hyper;
        if (h.sigma <= 0.0) h.sigma = 0.1;
        h.mask = TrainMask{};
        h.mask.alpha = spec.alpha_dim() > 0;
        h.mask.mass = true;
        const DatasetGeometry g(data);
        const vec grad = nlml_eval(g, spec, h, true).grad;
        const auto layout = gradient_layout(spec, h);
        vec fd(grad.size());
        for (size_t k = 0; k < layout.size(); ++k) {
            auto value_with = [&](double eps) {
                Hyperparameters hh = h;
                const std::string& name = layout[k];
                if (name == "s2_E") hh.theta_E.s2 += eps;
                else if (name == "omega_E") hh.theta_E.omega += eps;
                else if (name == "s2_A") hh.theta_A.s2 += eps;
                else if (name == "omega_A") hh.theta_A.omega += eps;
                else if (name == "sigma") hh.sigma += eps;
                else if (name == "mass") hh.mass += eps;
                else hh.alpha[std::stoi(name.substr(6))] += eps;
                return nlml_eval(g, spec, hh, false).value;
            };
            const double step = 1e-5;
            fd[static_cast<Index>(k)] = (value_with(step) - value_with(-step)) / (2.0 * step);
        }
        const double rel =
            (grad - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
        record("gradient_check", rel, grad_tol, rel <= grad_tol);
    }

    // GP posterior mean vs kernel ridge regression at matched regularization
    {
        Hyperparameters h = hyper;
        if (h.sigma <= 0.0) h.sigma = 0.1;
        const vec grid = radius_grid(ex, data);
        const double dev = check_equivalence(data, spec, h, grid);
        record("gp_krr_deviation", dev, krr_tol, dev <= krr_tol);
    }

    // coercivity of the learned kernels under the system's initial law
    {
        const vec grid = radius_grid(ex, data);
        const KernelEstimate est = posterior_kernel(data, spec, hyper, grid);
        const RadialKernel phiE = interpolated_kernel(grid, est.mean_E);
        const RadialKernel phiA = interpolated_kernel(grid, est.mean_A);
        const long n_mc = vcfg.value("n_mc", 100000);
        const CoercivityResult c = coercivity_check(phiE, phiA, spec, n_mc, ex.seed);
        const bool pass = c.ratio >= 1.0 - 3.0 * c.se;
        record("coercivity_ratio", c.ratio, 1.0, pass);
    }

    // covariance decomposition identity
    {
        const double residual = kff_identity_residual(data, hyper.theta_E, hyper.theta_A);
        record("kff_identity", residual, identity_tol, residual <= identity_tol);
    }

    fs::create_directories(out_dir);
    report["all_pass"] = all_pass;
    write_text(out_dir + "/report.json", report.dump(2) + "\n");
    write_provenance(ex, out_dir);
    return all_pass ? 0 : kExitVerification;
}

int cmd_bench(const Experiment& ex, const std::string& out_dir) {
    const json bc = ex.config.value("bench", json::object());
    const std::vector<int> M_values = bc.contains("M_values")
                                          ? bc["M_values"].get<std::vector<int>>()
                                          : std::vector<int>{2, 4, 8};
    const int L = bc.value("L", 6);

    SystemSpec fm = builtin_system(Builtin::FM);
    fm.N = bc.value("N", 20);
    fm.x_lo = vec::Constant(2, -1.0);
    fm.x_hi = vec::Constant(2, 1.0);
    const double sigma = bc.value("sigma", 0.01);

    std::ostringstream csv;
    csv << "n,backend,wall_ms,value,rel_err_vs_exact,seed\n";
    std::printf("%8s %8s %12s %16s %14s\n", "n", "backend", "wall_ms", "value", "rel_err");

    for (const int M : M_values) {
        const TrajectoryDataset data = generate_dataset(fm, M, L, sigma, ex.seed);
        const DatasetGeometry g(data);

        Hyperparameters h;
        h.theta_E = {1.0, 1.0, nu_from_double(ex.config.value("nu_E", 1.5))};
        h.theta_A = {1.0, 1.0, nu_from_double(ex.config.value("nu_A", 1.5))};
        h.sigma = sigma;
        h.alpha = fm.alpha;
        h.mass = 1.0;
        h.mask.theta_E = false; // default prior, train sigma and alpha only
        h.mask.theta_A = false;

        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        const NlmlResult exact = nlml_eval(g, fm, h, true);
        const auto t1 = clock::now();
        AccelConfig acfg = ex.accel;
        acfg.seed = ex.seed;
        const NlmlResult fast = accelerated_nlml(g, fm, h, acfg);
        const auto t2 = clock::now();

        const double ms_exact = std::chrono::duration<double, std::milli>(t1 - t0).count();
        const double ms_accel = std::chrono::duration<double, std::milli>(t2 - t1).count();
        const double rel = std::abs(fast.value - exact.value) / std::abs(exact.value);

        csv.precision(17);
        csv << g.n << ",exact," << ms_exact << ',' << exact.value << ",0," << ex.seed << '\n';
        csv << g.n << ",accel," << ms_accel << ',' << fast.value << ',' << rel << ',' << ex.seed
            << '\n';
        std::printf("%8ld %8s %12.1f %16.6f %14s\n", static_cast<long>(g.n), "exact", ms_exact,
                    exact.value, "-");
        std::printf("%8ld %8s %12.1f %16.6f %14.3e\n", static_cast<long>(g.n), "accel", ms_accel,
                    fast.value, rel);
    }

    fs::create_directories(out_dir);
    write_text(out_dir + "/bench.csv", csv.str());
    write_provenance(ex, out_dir);
    return 0;
}

int cmd_ingest(const Experiment& ex, const std::string& csv_path, const std::string& out_dir) {
    const json ic = ex.config.value("ingest", json::object());
    const int d = ic.value("d", 2);
    const int window = ic.value("window", 10);
    const double dt = ic.value("dt", 0.1);
    const bool normalize = ic.value("normalize", true);

    mat frames = load_frames_csv(csv_path, d);
    if (normalize) normalize_frames(frames, d);
    const int N = static_cast<int>(frames.rows()) / d;
    const TrajectoryDataset data = preprocess_frames(frames, d, N, window, dt);

    fs::create_directories(out_dir);
    save_dataset(data, out_dir + "/dataset.json");
    write_provenance(ex, out_dir);
    std::printf("ingest: %ld frames -> d=%d N=%d L=%d snapshots, %s/dataset.json\n",
                static_cast<long>(frames.cols()), d, N, data.L, out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-process learning of interaction kernels in particle systems"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", dataset_path, model_path, csv_path;
    std::string backend_override;
    long seed_override = -1;

    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--seed", seed_override, "seed override");
    app.add_option("--backend", backend_override, "exact | accel")
        ->check(CLI::IsMember({"exact", "accel", ""}));
    app.add_option("--out", out_dir, "output directory");

    auto* sim = app.add_subcommand("simulate", "generate a synthetic trajectory dataset");
    auto* train = app.add_subcommand("train", "minimize the NLML over hyperparameters");
    train->add_option("--dataset", dataset_path, "dataset JSON")->required();
    auto* predict = app.add_subcommand("predict", "kernel posterior + trajectory prediction + UQ");
    predict->add_option("--dataset", dataset_path, "dataset JSON")->required();
    predict->add_option("--model", model_path, "trained model JSON")->required();
    auto* verify = app.add_subcommand("verify", "cross-checks: gradient, KRR, coercivity, identity");
    verify->add_option("--dataset", dataset_path, "dataset JSON")->required();
    verify->add_option("--model", model_path, "trained model JSON")->required();
    auto* bench = app.add_subcommand("bench", "exact vs accelerated NLML timings");
    auto* ingest = app.add_subcommand("ingest", "frame CSV -> dataset via smoothing + differences");
    ingest->add_option("--csv", csv_path, "frames CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        const Experiment ex = parse_experiment(config_path, seed_override, backend_override);
        if (sim->parsed()) return cmd_simulate(ex, out_dir);
        if (train->parsed()) return cmd_train(ex, dataset_path, out_dir);
        if (predict->parsed()) return cmd_predict(ex, model_path, dataset_path, out_dir);
        if (verify->parsed()) return cmd_verify(ex, model_path, dataset_path, out_dir);
        if (bench->parsed()) return cmd_bench(ex, out_dir);
        if (ingest->parsed()) return cmd_ingest(ex, csv_path, out_dir);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
