#include "secest/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include "secest/random.hpp"

namespace secest {

AttackKind parse_attack_kind(const std::string& name)
{
    if (name == "none") return AttackKind::none;
    if (name == "constant") return AttackKind::constant;
    if (name == "uniform") return AttackKind::uniform;
    if (name == "ramp") return AttackKind::ramp;
    throw std::invalid_argument("unknown attack kind '" + name + "' (expected none, constant, uniform or ramp)");
}

std::string to_string(AttackKind kind)
{
    switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::constant: return "constant";
    case AttackKind::uniform: return "uniform";
    case AttackKind::ramp: return "ramp";
    }
    return "none";
}

long SimulationTrace::nonconverged_steps() const
{
    return std::count_if(steps.begin(), steps.end(), [](const StepRecord& r) { return !r.converged; });
}

namespace {

constexpr std::uint64_t noise_stream = 0;
constexpr std::uint64_t attack_stream = 1;

Vector attack_vector(const AttackSpec& attack, long k, Index m, Engine& rng)
{
    Vector a = Vector::Zero(m);
    if (!attack.active() || k < attack.start_step) return a;
    for (Index s : attack.support) {
        switch (attack.kind) {
        case AttackKind::none: break;
        case AttackKind::constant: a(s) = attack.magnitude; break;
        case AttackKind::ramp: a(s) = static_cast<double>(k - attack.start_step) * attack.magnitude; break;
        case AttackKind::uniform: {
            std::uniform_real_distribution<double> dist(-attack.magnitude, attack.magnitude);
            double v = dist(rng);
            while (attack.magnitude > 0.0 && v == -attack.magnitude) v = dist(rng);
            a(s) = v;
            break;
        }
        }
    }
    return a;
}

void check_attack(const AttackSpec& attack, Index m)
{
    for (Index s : attack.support)
        if (s < 0 || s >= m) throw std::invalid_argument("attack support names sensor " + std::to_string(s + 1) +
                                                         " but the model has " + std::to_string(m) + " sensors");
    if (!std::isfinite(attack.magnitude)) throw std::invalid_argument("attack magnitude must be finite");
}

}  // namespace

SimulationTrace simulate(const SystemModel& model, const SpectralDesign& design,
                         const SensorDecomposition& decomposition, const AttackSpec& attack, double gamma,
                         const SimulationOptions& options)
{
    const Index n = model.states();
    const Index m = model.sensors();
    const Index q = model.inputs();
    check_attack(attack, m);
    if (options.horizon <= 0) throw std::invalid_argument("horizon must be positive");
    if (options.run_secure && !(gamma > 0.0))
        throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");

    Engine noise = make_engine(options.seed, options.trial, noise_stream);
    Engine attack_rng = make_engine(options.seed, options.trial, attack_stream);
    const Matrix LQ = covariance_factor(model.Q);
    const Matrix LR = covariance_factor(model.R);
    const Matrix LS = covariance_factor(model.Sigma);

    SimulationTrace trace;
    trace.seed = options.seed;
    trace.trial = options.trial;
    trace.horizon = options.horizon;
    trace.gamma = gamma;
    trace.attack = attack;
    trace.error_basis = model.state_basis;
    trace.steps.reserve(static_cast<size_t>(options.horizon));

    Vector x = options.initial_state ? *options.initial_state : sample_gaussian(noise, LS);
    if (x.size() != n) throw std::invalid_argument("initial state has wrong length");
    Vector xhat = Vector::Zero(n);
    Vector u_prev = Vector::Zero(q);
    LocalBankState bank = make_local_bank(decomposition);
    SecureFusion fusion(decomposition.H_stack, decomposition.Mtilde_factor, options.lasso);
    const Matrix& Klqr = model.K_lqr;

    for (long k = 0; k < options.horizon; ++k) {
        StepRecord r;
        r.k = k;
        const Vector v = sample_gaussian(noise, LR);
        r.z = model.C * x + v;
        r.a = attack_vector(attack, k, m, attack_rng);
        r.y = r.z + r.a;

        xhat = fixed_gain_kalman_step(xhat, r.y, u_prev, design, model);
        bank = local_estimator_step(bank, r.y, u_prev, decomposition, design, model);
        const CVector Y = assemble_canonical_measurement(bank, decomposition);

        if (options.run_secure) {
            const FusionResult f = fusion.solve(Y, gamma);
            r.xhat_secure = f.x_tilde;
            r.xhat_ls = f.x_ls;
            r.solver_iterations = f.iterations;
            r.kkt_residual = f.kkt_residual;
            r.converged = f.converged;
            r.kalman_equivalent = f.kalman_equivalent;
            r.equivalence_statistic = f.equivalence_statistic;
        } else {
            const LeastSquaresResult ls = weighted_least_squares(Y, decomposition.H_stack, decomposition.Mtilde_factor);
            r.xhat_ls = ls.x;
            r.xhat_secure = ls.x;
            r.equivalence_statistic = equivalence_statistic(ls.mu, decomposition.Mtilde_factor);
            r.kalman_equivalent = gamma > 0.0 && r.equivalence_statistic <= gamma;
        }
        r.xhat_kalman = xhat;

        r.u = q > 0 ? Vector(-Klqr * x) : Vector::Zero(0);
        r.x = x;
        const Vector w = sample_gaussian(noise, LQ);
        x = model.A * x + model.B * r.u + w;
        u_prev = r.u;
        trace.steps.push_back(std::move(r));
    }
    return trace;
}

MseReport mse(const SimulationTrace& trace, int burn_in)
{
    if (burn_in < 0 || static_cast<long>(trace.steps.size()) <= burn_in)
        throw std::invalid_argument("mse: horizon must exceed burn_in");
    const Index n = trace.steps.front().x.size();
    MseReport out;
    out.kalman_per_state = Vector::Zero(n);
    out.secure_per_state = Vector::Zero(n);
    out.ls_per_state = Vector::Zero(n);
    for (size_t k = static_cast<size_t>(burn_in); k < trace.steps.size(); ++k) {
        const StepRecord& r = trace.steps[k];
        out.kalman_per_state += trace.error(r.xhat_kalman - r.x).cwiseAbs2();
        out.secure_per_state += trace.error(r.xhat_secure - r.x).cwiseAbs2();
        out.ls_per_state += trace.error(r.xhat_ls - r.x).cwiseAbs2();
        ++out.samples;
    }
    const double count = static_cast<double>(out.samples);
    out.kalman_per_state /= count;
    out.secure_per_state /= count;
    out.ls_per_state /= count;
    out.kalman = out.kalman_per_state.sum();
    out.secure = out.secure_per_state.sum();
    out.ls = out.ls_per_state.sum();
    return out;
}

GapSeries security_gap(const SimulationTrace& clean, const SimulationTrace& attacked)
{
    if (clean.seed != attacked.seed || clean.trial != attacked.trial)
        throw std::invalid_argument("security_gap: traces were generated from different seeds");
    if (clean.horizon != attacked.horizon || clean.steps.size() != attacked.steps.size())
        throw std::invalid_argument("security_gap: traces have different horizons");

    GapSeries g;
    const size_t H = clean.steps.size();
    g.kalman.resize(H);
    g.secure.resize(H);
    g.ls.resize(H);
    double tk = 0.0, ts = 0.0, tl = 0.0;
    long tail = 0;
    for (size_t k = 0; k < H; ++k) {
        const StepRecord& c = clean.steps[k];
        const StepRecord& a = attacked.steps[k];
        g.kalman[k] = clean.error(c.xhat_kalman - a.xhat_kalman).norm();
        g.secure[k] = clean.error(c.xhat_secure - a.xhat_secure).norm();
        g.ls[k] = clean.error(c.xhat_ls - a.xhat_ls).norm();
        g.kalman_max = std::max(g.kalman_max, g.kalman[k]);
        g.secure_max = std::max(g.secure_max, g.secure[k]);
        g.ls_max = std::max(g.ls_max, g.ls[k]);
        if (k >= H / 2) {
            tk += g.kalman[k];
            ts += g.secure[k];
            tl += g.ls[k];
            ++tail;
        }
    }
    if (tail > 0) {
        g.kalman_tail_mean = tk / static_cast<double>(tail);
        g.secure_tail_mean = ts / static_cast<double>(tail);
        g.ls_tail_mean = tl / static_cast<double>(tail);
    }
    return g;
}

namespace {

template <class Fn>
void parallel_for(size_t count, unsigned threads, Fn&& fn)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<size_t>(threads, std::max<size_t>(count, 1)));
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

struct TrialResult {
    double secure = 0.0;
    double kalman = 0.0;
    long nonconverged = 0;
};

TrialResult run_trial(const SystemModel& model, const SpectralDesign& design, const SensorDecomposition& decomposition,
                      const AttackSpec& attack, double gamma, const SweepOptions& options, int trial)
{
    SimulationOptions so;
    so.horizon = options.horizon;
    so.seed = options.seed;
    so.trial = static_cast<std::uint64_t>(trial);
    so.lasso = options.lasso;
    const SimulationTrace tr = simulate(model, design, decomposition, attack, gamma, so);
    const MseReport r = mse(tr, options.burn_in);
    return {r.secure, r.kalman, tr.nonconverged_steps()};
}

void mean_and_se(const std::vector<TrialResult>& v, size_t begin, size_t count, double TrialResult::*field, double& mean,
                 double& se)
{
    double sum = 0.0;
    for (size_t t = 0; t < count; ++t) sum += v[begin + t].*field;
    mean = sum / static_cast<double>(count);
    if (count < 2) {
        se = 0.0;
        return;
    }
    double ss = 0.0;
    for (size_t t = 0; t < count; ++t) ss += (v[begin + t].*field - mean) * (v[begin + t].*field - mean);
    se = std::sqrt(ss / static_cast<double>(count - 1) / static_cast<double>(count));
}

void check_sweep(const SweepOptions& options)
{
    if (options.trials <= 0) throw std::invalid_argument("trials must be positive");
    if (options.burn_in < 0 || options.horizon <= options.burn_in)
        throw std::invalid_argument("horizon must exceed burn_in");
}

}  // namespace

std::vector<SweepRow> sweep_gamma(const SystemModel& model, const SpectralDesign& design,
                                  const SensorDecomposition& decomposition, const std::vector<double>& gammas,
                                  const AttackSpec& attack, const SweepOptions& options)
{
    check_sweep(options);
    for (double g : gammas)
        if (!(g > 0.0)) throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");
    const size_t T = static_cast<size_t>(options.trials);
    const AttackSpec clean{};
    // Layout: [value][trial][clean, attacked]
    std::vector<TrialResult> results(gammas.size() * T * 2);
    parallel_for(results.size(), options.threads, [&](size_t job) {
        const size_t v = job / (2 * T);
        const size_t t = (job / 2) % T;
        const bool attacked = job % 2 == 1;
        results[job] = run_trial(model, design, decomposition, attacked ? attack : clean, gammas[v], options,
                                 static_cast<int>(t));
    });

    std::vector<SweepRow> rows;
    std::vector<TrialResult> c(T), a(T);
    for (size_t v = 0; v < gammas.size(); ++v) {
        for (size_t t = 0; t < T; ++t) {
            c[t] = results[(v * T + t) * 2];
            a[t] = results[(v * T + t) * 2 + 1];
        }
        SweepRow row;
        row.value = gammas[v];
        mean_and_se(c, 0, T, &TrialResult::secure, row.mse_secure_no_attack, row.se_secure_no_attack);
        mean_and_se(a, 0, T, &TrialResult::secure, row.mse_secure_attack, row.se_secure_attack);
        mean_and_se(c, 0, T, &TrialResult::kalman, row.mse_kalman_no_attack, row.se_kalman_no_attack);
        mean_and_se(a, 0, T, &TrialResult::kalman, row.mse_kalman_attack, row.se_kalman_attack);
        for (size_t t = 0; t < T; ++t) row.nonconverged_steps += c[t].nonconverged + a[t].nonconverged;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> sweep_attack_magnitude(const SystemModel& model, const SpectralDesign& design,
                                             const SensorDecomposition& decomposition,
                                             const std::vector<double>& magnitudes, double gamma,
                                             const AttackSpec& attack, const SweepOptions& options)
{
    check_sweep(options);
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");
    for (double a : magnitudes)
        if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("attack magnitudes must be finite and >= 0");
    const size_t T = static_cast<size_t>(options.trials);
    const AttackSpec clean{};
    // Layout: T clean runs, then [value][trial] attacked runs.
    std::vector<TrialResult> results(T + magnitudes.size() * T);
    parallel_for(results.size(), options.threads, [&](size_t job) {
        if (job < T) {
            results[job] = run_trial(model, design, decomposition, clean, gamma, options, static_cast<int>(job));
            return;
        }
        const size_t v = (job - T) / T;
        const size_t t = (job - T) % T;
        AttackSpec scaled = attack;
        scaled.magnitude = magnitudes[v];
        results[job] = run_trial(model, design, decomposition, scaled, gamma, options, static_cast<int>(t));
    });

    std::vector<SweepRow> rows;
    long clean_nonconverged = 0;
    for (size_t t = 0; t < T; ++t) clean_nonconverged += results[t].nonconverged;
    for (size_t v = 0; v < magnitudes.size(); ++v) {
        SweepRow row;
        row.value = magnitudes[v];
        mean_and_se(results, 0, T, &TrialResult::secure, row.mse_secure_no_attack, row.se_secure_no_attack);
        mean_and_se(results, 0, T, &TrialResult::kalman, row.mse_kalman_no_attack, row.se_kalman_no_attack);
        mean_and_se(results, T + v * T, T, &TrialResult::secure, row.mse_secure_attack, row.se_secure_attack);
        mean_and_se(results, T + v * T, T, &TrialResult::kalman, row.mse_kalman_attack, row.se_kalman_attack);
        row.nonconverged_steps = clean_nonconverged;
        for (size_t t = 0; t < T; ++t) row.nonconverged_steps += results[T + v * T + t].nonconverged;
        rows.push_back(row);
    }
    return rows;
}

ProbabilityEstimate empirical_equivalence_probability(const SystemModel& model, const SpectralDesign& design,
                                                      const SensorDecomposition& decomposition, double gamma,
                                                      int trials, int horizon, std::uint64_t seed, int burn_in)
{
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");
    if (trials <= 0) throw std::invalid_argument("trials must be positive");
    if (burn_in < 0 || horizon <= burn_in) throw std::invalid_argument("horizon must exceed burn_in");
    ProbabilityEstimate out;
    std::vector<double> freq;
    for (int t = 0; t < trials; ++t) {
        SimulationOptions so;
        so.horizon = horizon;
        so.seed = seed;
        so.trial = static_cast<std::uint64_t>(t);
        so.run_secure = false;
        const SimulationTrace tr = simulate(model, design, decomposition, AttackSpec{}, gamma, so);
        long hits = 0, count = 0;
        for (size_t k = static_cast<size_t>(burn_in); k < tr.steps.size(); ++k, ++count)
            if (tr.steps[k].equivalence_statistic <= gamma) ++hits;
        freq.push_back(static_cast<double>(hits) / static_cast<double>(count));
        out.samples += count;
    }
    double sum = 0.0;
    for (double f : freq) sum += f;
    out.probability = sum / static_cast<double>(trials);
    if (trials > 1) {
        double ss = 0.0;
        for (double f : freq) ss += (f - out.probability) * (f - out.probability);
        out.standard_error = std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials));
    }
    return out;
}

namespace {

void write_vec(std::ostream& os, const Vector& v)
{
    for (Index i = 0; i < v.size(); ++i) os << ',' << v(i);
}

void header(std::ostream& os, const char* prefix, Index count)
{
    for (Index i = 1; i <= count; ++i) os << ',' << prefix << i;
}

}  // namespace

void write_trace_csv(std::ostream& os, const SimulationTrace& trace)
{
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    const Index n = trace.steps.empty() ? 0 : trace.steps.front().x.size();
    const Index q = trace.steps.empty() ? 0 : trace.steps.front().u.size();
    const Index m = trace.steps.empty() ? 0 : trace.steps.front().y.size();
    os << 'k';
    header(os, "x_", n);
    header(os, "u_", q);
    header(os, "y_", m);
    header(os, "a_", m);
    header(os, "xhat_kal_", n);
    header(os, "xhat_sec_", n);
    header(os, "xhat_ls_", n);
    os << ",solver_iters,kkt_residual,solver_warning\n";
    for (const StepRecord& r : trace.steps) {
        os << r.k;
        write_vec(os, r.x);
        write_vec(os, r.u);
        write_vec(os, r.y);
        write_vec(os, r.a);
        write_vec(os, r.xhat_kalman);
        write_vec(os, r.xhat_secure);
        write_vec(os, r.xhat_ls);
        os << ',' << r.solver_iterations << ',' << r.kkt_residual << ',' << (r.converged ? 0 : 1) << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    os << "sweep_value,mse_secure_no_attack,mse_secure_attack,mse_kalman_no_attack,mse_kalman_attack,"
          "stderr_secure_no_attack,stderr_secure_attack,stderr_kalman_no_attack,stderr_kalman_attack,"
          "nonconverged_steps\n";
    for (const SweepRow& r : rows) {
        os << r.value << ',' << r.mse_secure_no_attack << ',' << r.mse_secure_attack << ',' << r.mse_kalman_no_attack
           << ',' << r.mse_kalman_attack << ',' << r.se_secure_no_attack << ',' << r.se_secure_attack << ','
           << r.se_kalman_no_attack << ',' << r.se_kalman_attack << ',' << r.nonconverged_steps << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

}  // namespace secest
