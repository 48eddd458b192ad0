#pragma once

#include <cstdint>
#include <vector>

#include "secest/decomposition.hpp"
#include "secest/lasso.hpp"

namespace secest {

/// The bank of single-sensor estimators zeta_i(k+1) = Pi zeta_i(k) + 1 y_i(k+1) + (G_i - 1 C_i) B u(k).
struct LocalBankState {
    std::vector<CVector> zeta;
    long k = -1;  // index of the last measurement absorbed; -1 before the first
};

LocalBankState make_local_bank(const SensorDecomposition& decomposition);

/// Absorbs y(k+1) given u(k). Throws std::invalid_argument on dimension mismatch.
LocalBankState local_estimator_step(const LocalBankState& bank, const Vector& y, const Vector& u,
                                    const SensorDecomposition& decomposition, const SpectralDesign& design,
                                    const SystemModel& model);

/// [P_1 zeta_1; ...; P_m zeta_m]
CVector assemble_canonical_measurement(const LocalBankState& bank, const SensorDecomposition& decomposition);

struct LeastSquaresResult {
    Vector x;
    CVector mu;
};

/// x = (H' M^-1 H)^-1 H' M^-1 Y with the (tiny) imaginary part discarded, mu = Y - H x.
LeastSquaresResult weighted_least_squares(const CVector& Y, const Matrix& H_stack, const HermitianFactor& Mtilde);

/// ||M^-1 mu_ls||_inf, the quantity compared against gamma.
double equivalence_statistic(const CVector& mu_ls, const HermitianFactor& Mtilde);

bool kalman_equivalence_condition(const CVector& mu_ls, const HermitianFactor& Mtilde, double gamma);

struct FusionResult {
    Vector x_tilde;
    CVector mu;
    CVector nu;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool kalman_equivalent = false;
    double equivalence_statistic = 0.0;
    Vector x_ls;
    double objective = 0.0;
};

/// Secure fusion against a fixed decomposition. Holds the precomputed solver and the trial-local
/// warm start; one instance per trial.
class SecureFusion {
public:
    SecureFusion(const Matrix& H_stack, const HermitianFactor& Mtilde, LassoOptions options = {});

    FusionResult solve(const CVector& Y, double gamma);
    void reset_warm_start() { has_warm_ = false; }
    const LassoSolver& solver() const { return solver_; }

private:
    Matrix H_;
    const HermitianFactor* Mtilde_;
    LassoSolver solver_;
    bool has_warm_ = false;
    CVector x_warm_;
    CVector nu_warm_;
};

/// One-shot version of SecureFusion::solve without warm start.
FusionResult secure_fuse(const CVector& Y, const Matrix& H_stack, const HermitianFactor& Mtilde, double gamma,
                         LassoOptions options = {});

struct ProbabilityEstimate {
    double probability = 0.0;
    double standard_error = 0.0;
    long samples = 0;
};

/// Frequency with which the equivalence condition holds at steps k >= burn_in of attack-free
/// closed-loop runs; the standard error is taken across trials.
ProbabilityEstimate empirical_equivalence_probability(const SystemModel& model, const SpectralDesign& design,
                                                      const SensorDecomposition& decomposition, double gamma,
                                                      int trials, int horizon, std::uint64_t seed, int burn_in = 50);

}  // namespace secest
