// csimg: command-line front end for the array-imaging toolkit.
//
// Subcommands: simulate, recover, phase-transition, roc, certify.
// Every subcommand requires --seed; all randomness flows from it through
// deterministic substreams, so reruns with the same flags are byte-identical
// (wall-clock duration lives only in the .manifest.json sidecar).
//
// Exit codes: 0 success, 1 runtime/configuration error, 2 usage error.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csimg/certificates.hpp"
#include "csimg/experiments.hpp"
#include "csimg/geometry.hpp"
#include "csimg/operator.hpp"
#include "csimg/solver.hpp"
#include "measurement_io.hpp"

namespace {

constexpr const char* kVersion = "csimg 1.0.0";

using json = nlohmann::ordered_json;
using namespace csimg;

// --- shared option blocks ---------------------------------------------------

struct ConfigFlags {
    std::string config_path;
    double lambda_m = 0.03;
    double aperture_m = 30.0;
    double range_m = 10000.0;
    double mesh_m = 10.0;
    double halfsize_m = 400.0;
    double domain_center_x_m = 0.0;
    double domain_center_y_m = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "imaging config file (key = value lines)");
        cmd->add_option("--lambda_m", lambda_m, "wavelength in meters");
        cmd->add_option("--aperture_m", aperture_m, "antenna square side B in meters");
        cmd->add_option("--range_m", range_m, "standoff distance z0 in meters");
        cmd->add_option("--mesh_m", mesh_m, "target grid mesh d0 in meters");
        cmd->add_option("--halfsize_m", halfsize_m, "target domain half-size L in meters");
        cmd->add_option("--domain_center_x_m", domain_center_x_m, "antenna square center x");
        cmd->add_option("--domain_center_y_m", domain_center_y_m, "antenna square center y");
    }

    // File values first, then any explicitly passed flag overrides them.
    ImagingConfig build(const CLI::App* cmd) const {
        double l = lambda_m, B = aperture_m, z0 = range_m, d0 = mesh_m, L = halfsize_m;
        double cx = domain_center_x_m, cy = domain_center_y_m;
        if (!config_path.empty()) {
            const ImagingConfig fc = ImagingConfig::from_file(config_path);
            if (!cmd->count("--lambda_m")) l = fc.wavelength();
            if (!cmd->count("--aperture_m")) B = fc.aperture();
            if (!cmd->count("--range_m")) z0 = fc.range();
            if (!cmd->count("--mesh_m")) d0 = fc.mesh();
            if (!cmd->count("--halfsize_m")) L = fc.halfsize();
            if (!cmd->count("--domain_center_x_m")) cx = fc.antenna_domain_center().x();
            if (!cmd->count("--domain_center_y_m")) cy = fc.antenna_domain_center().y();
        }
        return ImagingConfig(l, B, z0, d0, L, {cx, cy});
    }

    void record(json& params) const {
        params["lambda_m"] = lambda_m;
        params["aperture_m"] = aperture_m;
        params["range_m"] = range_m;
        params["mesh_m"] = mesh_m;
        params["halfsize_m"] = halfsize_m;
        params["domain_center_x_m"] = domain_center_x_m;
        params["domain_center_y_m"] = domain_center_y_m;
        if (!config_path.empty()) params["config"] = config_path;
    }
};

void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const json& params, std::uint64_t seed, double duration_s) {
    json m;
    m["subcommand"] = subcommand;
    m["parameters"] = params;
    m["seed"] = seed;
    m["version"] = kVersion;
    m["duration_seconds"] = duration_s;
    std::ofstream f(out_path + ".manifest.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest for " + out_path);
    f << m.dump(2) << "\n";
}

std::vector<std::int64_t> range_list(std::int64_t lo, std::int64_t hi, std::int64_t step) {
    if (step < 1 || hi < lo) throw std::invalid_argument("bad range: need step >= 1 and max >= min");
    std::vector<std::int64_t> v;
    for (std::int64_t n = lo; n <= hi; n += step) v.push_back(n);
    return v;
}

json complex_vector_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
    return a;
}

// --- subcommands ------------------------------------------------------------

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

int cmd_simulate(const CLI::App* cmd, const ConfigFlags& cf, std::uint64_t seed,
                 std::int64_t n, std::int64_t s, double lo, double hi, double eta,
                 const std::string& out) {
    Timer timer;
    const ImagingConfig cfg = cf.build(cmd);
    std::cout << "aperture ratio rho = " << cfg.aperture_ratio() << "\n";
    std::cout << "grid: " << cfg.grid_side() << " x " << cfg.grid_side() << " = "
              << cfg.grid_size() << " points\n";

    Rng rng(seed);
    Rng scene_rng = rng.split(0), antenna_rng = rng.split(1), noise_rng = rng.split(2);
    const Scene scene = s == 0 ? Scene{Vec::Zero(cfg.grid_size()), {}, lo, hi}
                               : random_scene(cfg.grid_size(), s, lo, hi, scene_rng);
    const AntennaArray arr = sample_antennas(cfg, n, antenna_rng);
    const ScatteringOperator op = ScatteringOperator::build(cfg, arr);

    tools::Measurement m;
    m.config_text = cfg.to_text();
    m.array = arr;
    m.x = scene.x;
    m.support = scene.support;
    m.eta = eta;
    if (eta > 0.0) {
        m.y = op.measure(scene.x, gaussian_noise(op.rows(), eta, noise_rng));
    } else {
        m.y = op.measure(scene.x);
    }
    tools::write_measurement(out, m);

    json params;
    cf.record(params);
    params["n"] = n;
    params["s"] = s;
    params["range-lo"] = lo;
    params["range-hi"] = hi;
    params["eta"] = eta;
    params["out"] = out;
    write_manifest(out, "simulate", params, seed, timer.seconds());
    std::cout << "wrote " << op.rows() << " measurements to " << out << "\n";
    return 0;
}

int cmd_recover(std::uint64_t seed, const std::string& in, const std::string& mode,
                std::optional<double> eta_flag, std::int64_t max_iters, double tol_flag,
                bool uncertified, const std::string& out, const std::string& log_path) {
    Timer timer;
    const tools::Measurement m = tools::read_measurement(in);
    std::istringstream cfg_in(m.config_text);
    const ImagingConfig cfg = ImagingConfig::from_text(cfg_in);
    const ScatteringOperator op = ScatteringOperator::build(cfg, m.array);
    if (op.rows() != m.y.size())
        throw std::runtime_error(in + ": measurement length does not match the antenna count");
    if (op.N() != m.x.size())
        throw std::runtime_error(in + ": scene length does not match the config grid");

    PdhgParams p = uncertified ? experiment_solver_params(max_iters) : PdhgParams{};
    p.max_iters = max_iters;
    p.residual_tol = tol_flag > 0.0 ? tol_flag : default_residual_tol(op.N(), m.y.norm());
    p.keep_iterate_log = !log_path.empty();

    const double eta = eta_flag ? *eta_flag : m.eta;
    const double radius = eta * static_cast<double>(op.n());
    const SolveResult res = mode == "bp" ? solve_bp(op, m.y, p) : solve_bpdn(op, m.y, radius, p);

    json r;
    r["mode"] = mode;
    r["iterations_run"] = res.iterations_run;
    r["converged"] = res.converged;
    r["objective_l1"] = res.objective;
    r["final_feasibility"] = res.final_feasibility;
    r["step_certificate"] = res.step_certificate;
    r["eta"] = eta;
    r["ball_radius"] = mode == "bp" ? 0.0 : radius;
    r["error_l2_vs_scene"] = (res.x_hat - m.x).norm();
    r["recovery_success"] = recovery_success(m.x, res.x_hat);
    r["x_hat"] = complex_vector_json(res.x_hat);
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + out);
    f << r.dump(2) << "\n";

    if (!log_path.empty()) {
        std::ofstream lf(log_path, std::ios::binary);
        if (!lf) throw std::runtime_error("cannot open for writing: " + log_path);
        lf << "iter,objective,feasibility\n";
        lf.precision(17);
        for (const auto& rec : res.iterate_log)
            lf << rec.iter << ',' << rec.objective << ',' << rec.feasibility << "\n";
    }

    json params;
    params["in"] = in;
    params["mode"] = mode;
    params["eta"] = eta;
    params["max-iters"] = max_iters;
    params["residual-tol"] = p.residual_tol;
    params["uncertified-steps"] = uncertified;
    params["out"] = out;
    if (!log_path.empty()) params["iterate-log"] = log_path;
    write_manifest(out, "recover", params, seed, timer.seconds());
    std::cout << "recover: " << res.iterations_run << " iterations, l2 error "
              << (res.x_hat - m.x).norm() << "\n";
    return 0;
}

int cmd_phase_transition(const CLI::App* cmd, const ConfigFlags& cf, std::uint64_t seed,
                         std::int64_t s, std::int64_t n_min, std::int64_t n_max,
                         std::int64_t n_step, std::int64_t trials, std::int64_t max_iters,
                         double lo, double hi, std::int64_t jobs, const std::string& out) {
    Timer timer;
    (void)jobs;  // trials are sequential on this target; outputs do not depend on jobs
    const ImagingConfig cfg = cf.build(cmd);
    Rng rng(seed);
    const TransitionCurve curve =
        phase_transition(cfg, s, range_list(n_min, n_max, n_step), trials, rng,
                         experiment_solver_params(max_iters), {lo, hi});

    std::map<std::string, std::string> meta;
    meta["version"] = kVersion;
    meta["trials"] = std::to_string(trials);
    meta["max_iters"] = std::to_string(max_iters);
    meta["dynamic_range"] = "[" + std::to_string(lo) + "," + std::to_string(hi) + "]";
    meta["config"] = "lambda_m=" + std::to_string(cfg.wavelength()) +
                     " aperture_m=" + std::to_string(cfg.aperture()) +
                     " range_m=" + std::to_string(cfg.range()) +
                     " mesh_m=" + std::to_string(cfg.mesh()) +
                     " halfsize_m=" + std::to_string(cfg.halfsize());
    write_transition_csv(out, curve, meta);

    json params;
    cf.record(params);
    params["s"] = s;
    params["n-min"] = n_min;
    params["n-max"] = n_max;
    params["n-step"] = n_step;
    params["trials"] = trials;
    params["max-iters"] = max_iters;
    params["out"] = out;
    write_manifest(out, "phase-transition", params, seed, timer.seconds());
    const auto crossing = half_crossing(curve);
    std::cout << "transition curve written to " << out << "; 0.5-crossing at n = "
              << (crossing ? std::to_string(*crossing) : std::string("none")) << "\n";
    return 0;
}

int cmd_roc(const CLI::App* cmd, const ConfigFlags& cf, std::uint64_t seed, std::int64_t s,
            std::int64_t n, std::optional<double> eta, std::optional<double> snr_db,
            const std::vector<double>& tau_list, std::int64_t trials, std::int64_t max_iters,
            double lo, double hi, std::int64_t jobs, const std::string& out) {
    Timer timer;
    (void)jobs;
    const ImagingConfig cfg = cf.build(cmd);
    Rng rng(seed);
    Rng scene_rng = rng.split(0xa11ce);
    const Scene scene = random_scene(cfg.grid_size(), s, lo, hi, scene_rng);
    NoiseSpec noise;
    noise.eta = eta;
    noise.snr_db = snr_db;
    const std::vector<RocPoint> roc =
        roc_curve(scene, n, noise, tau_list, trials, cfg, rng, experiment_solver_params(max_iters));

    std::map<std::string, std::string> meta;
    meta["version"] = kVersion;
    meta["master_seed"] = std::to_string(seed);
    meta["s"] = std::to_string(s);
    meta["n"] = std::to_string(n);
    meta["N"] = std::to_string(cfg.grid_size());
    if (eta) meta["eta"] = std::to_string(*eta);
    if (snr_db) {
        meta["snr_db"] = std::to_string(*snr_db);
        meta["snr_convention"] = "snr_db = 20*log10(||Ax||/(n*eta)); eta resolved per trial";
    }
    meta["ball_radius_rule"] = "eta*n";
    meta["trials"] = std::to_string(trials);
    write_roc_csv(out, roc, meta);

    json params;
    cf.record(params);
    params["s"] = s;
    params["n"] = n;
    if (eta) params["eta"] = *eta;
    if (snr_db) params["snr-db"] = *snr_db;
    params["tau-list"] = tau_list;
    params["trials"] = trials;
    params["max-iters"] = max_iters;
    params["out"] = out;
    write_manifest(out, "roc", params, seed, timer.seconds());
    std::cout << "roc curve written to " << out << "\n";
    return 0;
}

int cmd_certify(const CLI::App* cmd, const ConfigFlags& cf, std::uint64_t seed, std::int64_t s,
                std::int64_t n, std::int64_t draws, const std::string& out) {
    Timer timer;
    const ImagingConfig cfg = cf.build(cmd);
    const std::int64_t N = cfg.grid_size();
    Rng rng(seed);

    json records = json::array();
    std::int64_t passes = 0;
    double dev_sum = 0.0;
    for (std::int64_t t = 0; t < draws; ++t) {
        Rng sub = rng.split(static_cast<std::uint64_t>(t));
        Rng scene_rng = sub.split(0), antenna_rng = sub.split(1);
        const Scene scene = random_scene(N, s, 1.0, 10.0, scene_rng);
        const AntennaArray arr = sample_antennas(cfg, n, antenna_rng);
        const ScatteringOperator op = ScatteringOperator::build(cfg, arr);
        Vec sign_T(s);
        for (std::int64_t i = 0; i < s; ++i) sign_T[i] = complex_sign(scene.x[scene.support[i]]);
        const CertificateReport rep = verify_certificate(op, scene.support, sign_T, s);
        passes += rep.passed ? 1 : 0;
        dev_sum += rep.gram_deviation;
        records.push_back(json::parse(rep.to_json()));
    }

    json r;
    r["draws"] = draws;
    r["s"] = s;
    r["n"] = n;
    r["N"] = N;
    r["pass_fraction"] = static_cast<double>(passes) / static_cast<double>(draws);
    r["mean_gram_deviation"] = dev_sum / static_cast<double>(draws);
    r["reports"] = records;
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + out);
    f << r.dump(2) << "\n";

    json params;
    cf.record(params);
    params["s"] = s;
    params["n"] = n;
    params["draws"] = draws;
    params["out"] = out;
    write_manifest(out, "certify", params, seed, timer.seconds());
    std::cout << "certify: " << passes << "/" << draws << " draws passed; report in " << out
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compressive array-imaging toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "draw a scene + antenna array and write measurements");
    ConfigFlags sim_cf;
    sim_cf.attach(sim);
    std::uint64_t sim_seed = 0;
    std::int64_t sim_n = 0, sim_s = 10;
    double sim_lo = 1.0, sim_hi = 10.0, sim_eta = 0.0;
    std::string sim_out;
    sim->add_option("--seed", sim_seed, "master seed (required)")->required();
    sim->add_option("--n", sim_n, "number of antennas")->required();
    sim->add_option("--s", sim_s, "scene sparsity");
    sim->add_option("--range-lo", sim_lo, "dynamic range lower bound");
    sim->add_option("--range-hi", sim_hi, "dynamic range upper bound");
    sim->add_option("--eta", sim_eta, "per-entry complex Gaussian noise scale");
    sim->add_option("--out", sim_out, "output measurement file")->required();

    // recover
    auto* rec = app.add_subcommand("recover", "run l1 recovery on a measurement file");
    std::uint64_t rec_seed = 0;
    std::string rec_in, rec_mode = "bp", rec_out, rec_log;
    double rec_eta = -1.0, rec_tol = 0.0;
    std::int64_t rec_iters = 2000;
    bool rec_uncert = false;
    rec->add_option("--seed", rec_seed, "master seed (required)")->required();
    rec->add_option("--in", rec_in, "measurement file from simulate")->required();
    rec->add_option("--mode", rec_mode, "bp | bpdn")->check(CLI::IsMember({"bp", "bpdn"}));
    rec->add_option("--eta", rec_eta, "noise scale override (default: value stored in the file)");
    rec->add_option("--max-iters", rec_iters, "iteration cap");
    rec->add_option("--residual-tol", rec_tol, "stopping tolerance (default: size-scaled)");
    rec->add_flag("--uncertified-steps", rec_uncert,
                  "use the aggressive theta=1, sigma=1, tau=0.5 step profile");
    rec->add_option("--out", rec_out, "solution JSON")->required();
    rec->add_option("--iterate-log", rec_log, "optional per-iteration CSV");

    // phase-transition
    auto* pt = app.add_subcommand("phase-transition", "recovery rate vs antenna count, CSV out");
    ConfigFlags pt_cf;
    pt_cf.attach(pt);
    std::uint64_t pt_seed = 0;
    std::int64_t pt_s = 0, pt_nmin = 0, pt_nmax = 0, pt_nstep = 2, pt_trials = 100,
                 pt_iters = 800, pt_jobs = 1;
    double pt_lo = 1.0, pt_hi = 10.0;
    std::string pt_out;
    pt->add_option("--seed", pt_seed, "master seed (required)")->required();
    pt->add_option("--s", pt_s, "scene sparsity")->required();
    pt->add_option("--n-min", pt_nmin, "smallest antenna count")->required();
    pt->add_option("--n-max", pt_nmax, "largest antenna count")->required();
    pt->add_option("--n-step", pt_nstep, "antenna count step");
    pt->add_option("--trials", pt_trials, "trials per point");
    pt->add_option("--max-iters", pt_iters, "solver iteration cap");
    pt->add_option("--range-lo", pt_lo, "dynamic range lower bound");
    pt->add_option("--range-hi", pt_hi, "dynamic range upper bound");
    pt->add_option("--jobs", pt_jobs, "worker hint; outputs are independent of it");
    pt->add_option("--out", pt_out, "output CSV")->required();

    // roc
    auto* roc = app.add_subcommand("roc", "detection/false-alarm curve vs threshold, CSV out");
    ConfigFlags roc_cf;
    roc_cf.attach(roc);
    std::uint64_t roc_seed = 0;
    std::int64_t roc_s = 0, roc_n = 0, roc_trials = 100, roc_iters = 800, roc_jobs = 1;
    double roc_eta = -1.0, roc_snr = 0.0, roc_lo = 1.0, roc_hi = 10.0;
    std::vector<double> roc_taus;
    std::string roc_out;
    roc->add_option("--seed", roc_seed, "master seed (required)")->required();
    roc->add_option("--s", roc_s, "scene sparsity")->required();
    roc->add_option("--n", roc_n, "number of antennas")->required();
    auto* eta_opt = roc->add_option("--eta", roc_eta, "per-entry noise scale");
    auto* snr_opt = roc->add_option("--snr-db", roc_snr, "SNR in dB (resolves eta per trial)");
    eta_opt->excludes(snr_opt);
    roc->add_option("--tau", roc_taus, "threshold list")->required()->expected(1, 10000);
    roc->add_option("--trials", roc_trials, "trials");
    roc->add_option("--max-iters", roc_iters, "solver iteration cap");
    roc->add_option("--range-lo", roc_lo, "dynamic range lower bound");
    roc->add_option("--range-hi", roc_hi, "dynamic range upper bound");
    roc->add_option("--jobs", roc_jobs, "worker hint; outputs are independent of it");
    roc->add_option("--out", roc_out, "output CSV")->required();

    // certify
    auto* cert = app.add_subcommand("certify", "Monte Carlo dual-certificate verification, JSON out");
    ConfigFlags cert_cf;
    cert_cf.attach(cert);
    std::uint64_t cert_seed = 0;
    std::int64_t cert_s = 0, cert_n = 0, cert_draws = 100;
    std::string cert_out;
    cert->add_option("--seed", cert_seed, "master seed (required)")->required();
    cert->add_option("--s", cert_s, "support size")->required();
    cert->add_option("--n", cert_n, "number of antennas")->required();
    cert->add_option("--draws", cert_draws, "Monte Carlo draws");
    cert->add_option("--out", cert_out, "output JSON report")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help/version or the usage error
        return code == 0 ? 0 : 2;      // usage errors are exit code 2
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim, sim_cf, sim_seed, sim_n, sim_s, sim_lo, sim_hi, sim_eta,
                                sim_out);
        if (rec->parsed())
            return cmd_recover(rec_seed, rec_in, rec_mode,
                               rec_eta >= 0.0 ? std::optional<double>(rec_eta) : std::nullopt,
                               rec_iters, rec_tol, rec_uncert, rec_out, rec_log);
        if (pt->parsed())
            return cmd_phase_transition(pt, pt_cf, pt_seed, pt_s, pt_nmin, pt_nmax, pt_nstep,
                                        pt_trials, pt_iters, pt_lo, pt_hi, pt_jobs, pt_out);
        if (roc->parsed())
            return cmd_roc(roc, roc_cf, roc_seed, roc_s, roc_n,
                           roc->count("--eta") ? std::optional<double>(roc_eta) : std::nullopt,
                           roc->count("--snr-db") ? std::optional<double>(roc_snr) : std::nullopt,
                           roc_taus, roc_trials, roc_iters, roc_lo, roc_hi, roc_jobs, roc_out);
        if (cert->parsed())
            return cmd_certify(cert, cert_cf, cert_seed, cert_s, cert_n, cert_draws, cert_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
