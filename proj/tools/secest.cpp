// secest: command-line front end for the secure state estimation library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "secest/design_io.hpp"
#include "secest/model_io.hpp"
#include "secest/simulator.hpp"

namespace {

using namespace secest;

enum ExitCode : int { ok = 0, io_error = 1, validation_error = 2, assumption_error = 3, insecure = 4 };

constexpr const char* kFooter = R"(Exit codes:
  0  success (certify: secure)
  1  I/O, parse or usage error
  2  model validation failed
  3  design assumption violated (detectability, distinct closed-loop spectrum,
     canonical form)
  4  certify: the model is not resilient to the requested p

Model file (JSON object, matrices as row-major nested arrays):
  A      n x n, real Jordan form with one block per eigenvalue, nonsingular
  C      m x n
  Q      n x n process noise covariance, PSD
  R      m x m measurement noise covariance, PD
  Sigma  n x n initial state covariance, PSD
  B      n x q (optional; a flat array is read as one column)
  K_lqr  q x n state feedback, u = -K_lqr x (optional; flat array = one row)
  sensor_labels  array of m strings (optional)
  state_basis    n x n invertible T (optional); errors e are reported as T e,
                 so MSE is measured in the coordinates x_phys = T x
  Any other key is rejected.

Design file (written by `design`): {"format": "secest-design", "version": 1,
  "model": <model file>, "spectral": {P, P_plus, K, charpoly, V, Pi, ...},
  "decomposition": {G, H, P, F, Qtilde, Wtilde, Mtilde}}; complex entries are
  [re, im] pairs.

Trace CSV (simulate, states in model coordinates): k, x_1..x_n, u_1..u_q, y_1..y_m, a_1..a_m,
  xhat_kal_1..n, xhat_sec_1..n, xhat_ls_1..n, solver_iters, kkt_residual,
  solver_warning (1 when the fusion solver hit its iteration cap).

Sweep CSV (sweep-gamma, sweep-attack): sweep_value, mse_secure_no_attack,
  mse_secure_attack, mse_kalman_no_attack, mse_kalman_attack,
  stderr_secure_no_attack, stderr_secure_attack, stderr_kalman_no_attack,
  stderr_kalman_attack, nonconverged_steps.
  MSE is the mean of ||T (xhat(k) - x(k))||^2 over k >= burn-in, averaged over trials;
  stderr is the standard error across trials.

All floating-point CSV output uses 17 significant digits. The same flags and
--seed give byte-identical output for any --threads value.)";

struct AttackFlags {
    std::vector<int> sensors;  // 1-based; empty = last sensor
    std::string kind = "uniform";
    double magnitude = std::numbers::pi / 2.0;
    long start = 0;

    AttackSpec spec(const SystemModel& model) const
    {
        AttackSpec a;
        a.kind = parse_attack_kind(kind);
        a.magnitude = magnitude;
        a.start_step = start;
        if (start < 0) throw std::invalid_argument("--attack-start must be >= 0");
        if (sensors.empty()) {
            a.support.push_back(model.sensors() - 1);
        } else {
            for (int s : sensors) {
                if (s < 1 || s > model.sensors())
                    throw std::invalid_argument("--attack-sensor " + std::to_string(s) + " is outside 1.." +
                                                std::to_string(model.sensors()));
                a.support.push_back(s - 1);
            }
        }
        return a;
    }
};

void add_attack_flags(CLI::App* cmd, AttackFlags& f, const std::string& default_kind)
{
    f.kind = default_kind;
    cmd->add_option("--attack-sensor", f.sensors, "Attacked sensors, 1-based, comma separated (default: last)")
        ->delimiter(',');
    cmd->add_option("--attack-kind", f.kind, "none | constant | uniform | ramp")->capture_default_str();
    cmd->add_option("--attack-magnitude", f.magnitude,
                    "Value (constant), half-width (uniform) or slope per step (ramp)")
        ->capture_default_str();
    cmd->add_option("--attack-start", f.start, "First attacked step")->capture_default_str();
}

struct Source {
    std::string model_path;
    std::string design_path;
};

void add_source(CLI::App* cmd, Source& s)
{
    cmd->add_option("model", s.model_path, "Model file (JSON)");
    cmd->add_option("--design", s.design_path, "Precomputed design file; replaces the model argument");
}

DesignBundle load_bundle(const Source& s)
{
    if (!s.design_path.empty() && !s.model_path.empty())
        throw std::invalid_argument("give either a model file or --design, not both");
    if (!s.design_path.empty()) return load_design(s.design_path);
    if (s.model_path.empty()) throw std::invalid_argument("a model file or --design is required");
    DesignBundle b;
    b.model = load_model(s.model_path);
    require_valid(b.model);
    b.spectral = build_spectral_design(b.model);
    b.decomposition = build_decomposition(b.model, b.spectral);
    return b;
}

std::string join_sensors(const std::vector<Index>& s)
{
    std::ostringstream os;
    os << '{';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i] + 1;
    os << '}';
    return os.str();
}

int run_analyze(const std::string& path, const std::string& json_out)
{
    const SystemModel model = load_model(path);
    const ValidationReport report = validate_model(model);
    std::cout << "model: " << path << "\n"
              << "states: " << model.states() << ", sensors: " << model.sensors() << ", inputs: " << model.inputs()
              << "\n";
    for (const auto& c : report.checks)
        std::cout << "  check " << c.name << ": " << (c.passed ? "ok" : "FAILED") << (c.message.empty() ? "" : " (")
                  << c.message << (c.message.empty() ? "" : ")") << "\n";
    if (!report.ok()) {
        std::cerr << "error: model validation failed: " << report.first_failure() << "\n";
        return validation_error;
    }

    const ObservabilityStructure obs = observability_structure(model);
    nlohmann::json doc;
    doc["states"] = model.states();
    doc["sensors"] = model.sensors();
    nlohmann::json sets = nlohmann::json::array();
    for (Index j = 0; j < model.states(); ++j) {
        const auto& S = obs.support_sets[static_cast<size_t>(j)];
        std::cout << "S_" << j + 1 << " (sensors observing state " << j + 1 << "): " << join_sensors(S) << "\n";
        nlohmann::json one = nlohmann::json::array();
        for (Index i : S) one.push_back(i + 1);
        sets.push_back(one);
    }
    doc["support_sets"] = sets;
    doc["sparse_observability_index"] = obs.sparse_index;
    if (obs.observable()) {
        const int p = obs.sparse_index / 2;
        std::cout << "sparse observability index: " << obs.sparse_index << "; tolerates p = " << p << " attacked sensor"
                  << (p == 1 ? "" : "s") << "\n";
        doc["max_tolerable_p"] = p;
    } else {
        std::cout << "sparse observability index: -1 (the full sensor set does not observe every state)\n";
        doc["max_tolerable_p"] = nullptr;
    }
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw ParseError("cannot open '" + json_out + "' for writing");
        out << doc.dump(2) << "\n";
    }
    return ok;
}

int run_design(const std::string& path, const std::string& out)
{
    DesignBundle b;
    b.model = load_model(path);
    require_valid(b.model);
    b.spectral = build_spectral_design(b.model);
    b.decomposition = build_decomposition(b.model, b.spectral);
    save_design(out, b);
    std::cout << "design written to " << out << " (riccati residual " << b.spectral.riccati_residual
              << ", eigen residual " << b.spectral.eig_residual << ", M ridge " << b.decomposition.Mtilde_factor.ridge()
              << ")\n";
    return ok;
}

int run_certify(const std::string& path, int p)
{
    const SystemModel model = load_model(path);
    require_valid(model);
    const ObservabilityStructure obs = observability_structure(model);
    const ResilienceCertificate cert = certify_resilience(obs, p);
    std::cout << "sparse observability index: " << obs.sparse_index << "; p = " << p << ": "
              << (cert.secure ? "secure (s >= 2p)" : "NOT secure (s < 2p)") << "\n";
    return cert.secure ? ok : insecure;
}

std::ostream& open_out(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw ParseError("cannot open '" + path + "' for writing");
    return file;
}

struct RunFlags {
    double gamma = 5.0;
    int horizon = 1000;
    int burn_in = 50;
    int trials = 20;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
};

SweepOptions sweep_options(const RunFlags& f)
{
    SweepOptions o;
    o.horizon = f.horizon;
    o.burn_in = f.burn_in;
    o.trials = f.trials;
    o.seed = f.seed;
    o.threads = f.threads;
    return o;
}

void report_nonconverged(long count, std::ostream& log)
{
    if (count > 0) log << "warning: fusion solver hit its iteration cap at " << count << " steps\n";
}

int run_simulate(const Source& src, const RunFlags& f, const AttackFlags& af, std::uint64_t trial,
                 const std::vector<double>& x0)
{
    const DesignBundle b = load_bundle(src);
    SimulationOptions so;
    so.horizon = f.horizon;
    so.seed = f.seed;
    so.trial = trial;
    if (!x0.empty()) so.initial_state = Eigen::Map<const Vector>(x0.data(), static_cast<Index>(x0.size()));
    const AttackSpec attack = af.spec(b.model);
    const SimulationTrace trace = simulate(b.model, b.spectral, b.decomposition, attack, f.gamma, so);

    std::ofstream file;
    std::ostream& out = open_out(f.out, file);
    write_trace_csv(out, trace);
    std::ostream& log = (&out == &std::cout) ? std::cerr : std::cout;
    if (f.horizon > f.burn_in) {
        const MseReport r = mse(trace, f.burn_in);
        log << "mse (k >= " << f.burn_in << "): kalman " << r.kalman << ", secure " << r.secure << ", least-squares "
            << r.ls << "\n";
    }
    report_nonconverged(trace.nonconverged_steps(), log);
    return ok;
}

int run_sweep(const Source& src, const RunFlags& f, const AttackFlags& af, const std::vector<double>& values,
              bool gamma_sweep)
{
    const DesignBundle b = load_bundle(src);
    const AttackSpec attack = af.spec(b.model);
    const SweepOptions o = sweep_options(f);
    const std::vector<SweepRow> rows =
        gamma_sweep ? sweep_gamma(b.model, b.spectral, b.decomposition, values, attack, o)
                    : sweep_attack_magnitude(b.model, b.spectral, b.decomposition, values, f.gamma, attack, o);
    std::ofstream file;
    std::ostream& out = open_out(f.out, file);
    write_sweep_csv(out, rows);
    std::ostream& log = (&out == &std::cout) ? std::cerr : std::cout;
    long nonconverged = 0;
    for (const auto& r : rows) nonconverged += r.nonconverged_steps;
    log << rows.size() << " rows, " << f.trials << " trials x " << f.horizon << " steps each\n";
    report_nonconverged(nonconverged, log);
    return ok;
}

int run_probability(const Source& src, const RunFlags& f)
{
    const DesignBundle b = load_bundle(src);
    const ProbabilityEstimate est = empirical_equivalence_probability(b.model, b.spectral, b.decomposition, f.gamma,
                                                                      f.trials, f.horizon, f.seed, f.burn_in);
    std::cout << std::setprecision(6) << "P(||M^-1 mu_ls||_inf <= " << f.gamma << ") = " << est.probability
              << " +/- " << est.standard_error << " (" << est.samples << " steps)\n";
    return ok;
}

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_gamma, bool with_trials)
{
    if (with_gamma) cmd->add_option("--gamma", f.gamma, "l1 weight, > 0")->capture_default_str();
    cmd->add_option("--horizon", f.horizon, "Steps per run")->capture_default_str();
    cmd->add_option("--burn-in", f.burn_in, "Steps excluded from MSE")->capture_default_str();
    cmd->add_option("--seed", f.seed, "RNG seed")->capture_default_str();
    if (with_trials) {
        cmd->add_option("--trials", f.trials, "Monte-Carlo trials")->capture_default_str();
        cmd->add_option("--threads", f.threads, "Worker threads (0: all cores)")->capture_default_str();
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"secest: secure state estimation under sparse sensor attacks"};
    app.footer(kFooter);
    app.require_subcommand(1);

    std::string model_path, json_out, design_out;
    auto* analyze = app.add_subcommand("analyze", "Validate a model and report its sparse observability");
    analyze->add_option("model", model_path, "Model file (JSON)")->required();
    analyze->add_option("--json", json_out, "Also write the report as JSON");

    auto* design = app.add_subcommand("design", "Build and persist the estimator design");
    design->add_option("model", model_path, "Model file (JSON)")->required();
    design->add_option("--out", design_out, "Design file to write")->required();

    int p = 1;
    auto* certify = app.add_subcommand("certify", "Exit 0 if the model withstands p attacked sensors, 4 otherwise");
    certify->add_option("model", model_path, "Model file (JSON)")->required();
    certify->add_option("--p", p, "Number of attacked sensors")->required()->check(CLI::NonNegativeNumber);

    Source src;
    RunFlags sim_flags;
    AttackFlags sim_attack;
    std::uint64_t trial = 0;
    std::vector<double> x0;
    auto* simulate_cmd = app.add_subcommand("simulate", "Single closed-loop run; writes a trace CSV");
    add_source(simulate_cmd, src);
    add_run_flags(simulate_cmd, sim_flags, true, false);
    add_attack_flags(simulate_cmd, sim_attack, "none");
    simulate_cmd->add_option("--trial", trial, "Trial index (selects the noise substream)")->capture_default_str();
    simulate_cmd->add_option("--x0", x0, "Initial state, comma separated (default: drawn from Sigma)")->delimiter(',');
    simulate_cmd->add_option("--out", sim_flags.out, "Trace CSV (default: stdout)");

    RunFlags gamma_flags;
    AttackFlags gamma_attack;
    std::vector<double> gammas{0.05, 0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100};
    auto* sweep_gamma_cmd = app.add_subcommand("sweep-gamma", "MSE with and without attack over a gamma grid");
    add_source(sweep_gamma_cmd, src);
    add_run_flags(sweep_gamma_cmd, gamma_flags, false, true);
    add_attack_flags(sweep_gamma_cmd, gamma_attack, "uniform");
    sweep_gamma_cmd->add_option("--gammas", gammas, "Comma-separated gamma values")->delimiter(',')->capture_default_str();
    sweep_gamma_cmd->add_option("--out", gamma_flags.out, "Sweep CSV (default: stdout)");

    RunFlags mag_flags;
    AttackFlags mag_attack;
    std::vector<double> magnitudes{0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 1.75, 2};
    auto* sweep_attack_cmd = app.add_subcommand("sweep-attack", "MSE over attack magnitudes at fixed gamma");
    add_source(sweep_attack_cmd, src);
    add_run_flags(sweep_attack_cmd, mag_flags, true, true);
    add_attack_flags(sweep_attack_cmd, mag_attack, "uniform");
    sweep_attack_cmd->add_option("--magnitudes", magnitudes, "Comma-separated attack magnitudes")
        ->delimiter(',')
        ->capture_default_str();
    sweep_attack_cmd->add_option("--out", mag_flags.out, "Sweep CSV (default: stdout)");

    RunFlags prob_flags;
    prob_flags.gamma = 100.0;
    auto* probability = app.add_subcommand(
        "probability", "Attack-free frequency of the condition under which secure fusion equals the Kalman filter");
    add_source(probability, src);
    add_run_flags(probability, prob_flags, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Error& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : io_error;
    }

    try {
        if (*analyze) return run_analyze(model_path, json_out);
        if (*design) return run_design(model_path, design_out);
        if (*certify) return run_certify(model_path, p);
        if (*simulate_cmd) return run_simulate(src, sim_flags, sim_attack, trial, x0);
        if (*sweep_gamma_cmd) return run_sweep(src, gamma_flags, gamma_attack, gammas, true);
        if (*sweep_attack_cmd) return run_sweep(src, mag_flags, mag_attack, magnitudes, false);
        if (*probability) return run_probability(src, prob_flags);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io_error;
    } catch (const ValidationError& e) {
        std::cerr << "error: model validation failed: " << e.what() << "\n";
        return validation_error;
    } catch (const AssumptionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return assumption_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io_error;
    }
    return io_error;
}
