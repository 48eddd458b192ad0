#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "secest/fusion.hpp"

namespace secest {

enum class AttackKind { none, constant, uniform, ramp };

AttackKind parse_attack_kind(const std::string& name);
std::string to_string(AttackKind kind);

/// Sensor-attack process with a fixed support. magnitude is the value for `constant`, the
/// half-width for `uniform` (open interval) and the per-step slope for `ramp`, whose value at
/// step k >= start_step is (k - start_step) * magnitude.
struct AttackSpec {
    std::vector<Index> support;  // 0-based sensor indices
    AttackKind kind = AttackKind::none;
    double magnitude = 0.0;
    long start_step = 0;

    bool active() const { return kind != AttackKind::none && !support.empty(); }
};

struct SimulationOptions {
    int horizon = 1000;
    std::uint64_t seed = 1;
    std::uint64_t trial = 0;
    std::optional<Vector> initial_state;  // default: x(0) ~ N(0, Sigma)
    bool run_secure = true;               // false skips the LASSO solves (x_secure = x_ls)
    LassoOptions lasso;
};

struct StepRecord {
    long k = 0;
    Vector x, u, y, z, a;
    Vector xhat_kalman;
    Vector xhat_secure;
    Vector xhat_ls;
    int solver_iterations = 0;
    double kkt_residual = 0.0;
    bool converged = true;
    bool kalman_equivalent = false;
    double equivalence_statistic = 0.0;
};

struct SimulationTrace {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    int horizon = 0;
    double gamma = 0.0;
    AttackSpec attack;
    Matrix error_basis;  // the model's state_basis; errors are measured after mapping through it
    std::vector<StepRecord> steps;

    Vector error(const Vector& e) const { return error_basis.size() == 0 ? e : Vector(error_basis * e); }

    long nonconverged_steps() const;
};

/// Closed-loop rollout with u(k) = -K_lqr x(k). The process and measurement noise come from one
/// stream and the attack draws from another, so runs that differ only in the attack see
/// identical w, v and x. Estimators start from xhat(-1) = 0, zeta(-1) = 0 and u(-1) = 0.
SimulationTrace simulate(const SystemModel& model, const SpectralDesign& design,
                         const SensorDecomposition& decomposition, const AttackSpec& attack, double gamma,
                         const SimulationOptions& options);

struct MseReport {
    double kalman = 0.0;
    double secure = 0.0;
    double ls = 0.0;
    Vector kalman_per_state;
    Vector secure_per_state;
    Vector ls_per_state;
    long samples = 0;
};

/// Mean of ||xhat(k) - x(k)||^2 over k >= burn_in, in the model's reporting coordinates.
MseReport mse(const SimulationTrace& trace, int burn_in);

struct GapSeries {
    std::vector<double> kalman;
    std::vector<double> secure;
    std::vector<double> ls;
    double kalman_max = 0.0;
    double secure_max = 0.0;
    double ls_max = 0.0;
    double kalman_tail_mean = 0.0;  // mean over the second half of the horizon
    double secure_tail_mean = 0.0;
    double ls_tail_mean = 0.0;
};

/// d_k = ||g_k(z) - g_k(y)|| for each estimator. Throws std::invalid_argument unless both traces
/// come from the same seed, trial and horizon.
GapSeries security_gap(const SimulationTrace& clean, const SimulationTrace& attacked);

struct SweepRow {
    double value = 0.0;
    double mse_secure_no_attack = 0.0;
    double mse_secure_attack = 0.0;
    double mse_kalman_no_attack = 0.0;
    double mse_kalman_attack = 0.0;
    double se_secure_no_attack = 0.0;
    double se_secure_attack = 0.0;
    double se_kalman_no_attack = 0.0;
    double se_kalman_attack = 0.0;
    long nonconverged_steps = 0;
};

struct SweepOptions {
    int horizon = 1000;
    int burn_in = 50;
    int trials = 20;
    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0: hardware concurrency
    LassoOptions lasso;
};

/// For each gamma: per-trial MSE with and without `attack`, averaged over trials.
std::vector<SweepRow> sweep_gamma(const SystemModel& model, const SpectralDesign& design,
                                  const SensorDecomposition& decomposition, const std::vector<double>& gammas,
                                  const AttackSpec& attack, const SweepOptions& options);

/// For each magnitude: `attack` with that magnitude at fixed gamma. The no-attack columns are
/// identical across rows.
std::vector<SweepRow> sweep_attack_magnitude(const SystemModel& model, const SpectralDesign& design,
                                             const SensorDecomposition& decomposition,
                                             const std::vector<double>& magnitudes, double gamma,
                                             const AttackSpec& attack, const SweepOptions& options);

void write_trace_csv(std::ostream& os, const SimulationTrace& trace);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace secest
