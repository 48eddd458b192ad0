#pragma once

#include "secest/types.hpp"

namespace secest {

struct LassoOptions {
    double kkt_tol = tol::kkt;
    int max_iter = tol::lasso_max_iter;
    /// Return the weighted least-squares point directly when it already satisfies the
    /// optimality conditions (||M^-1 mu_ls||_inf <= gamma).
    bool screen = true;
    /// Run the active-set iteration first and every polish_every coordinate-descent sweeps.
    bool polish = true;
    int polish_every = 5;
};

struct LassoSolution {
    CVector x;
    CVector nu;
    CVector mu;
    int iterations = 0;
    double kkt_residual = 0.0;
    double objective = 0.0;
    bool converged = false;
};

/// Solver for
///     minimize_{x, nu}  1/2 mu' W mu + gamma * sum_k |nu_k|,   mu = y - D x - nu,
/// with W Hermitian positive definite (the inverse residual covariance) and x unpenalized.
///
/// x is eliminated exactly (x = (D'WD)^-1 D'W (y - nu)), leaving a LASSO in nu with the
/// projected weight S = W - W D (D'WD)^-1 D'W. That problem is solved by an active-set
/// (feature-sign) method: exact solves on the current support with the phases fixed, a line
/// search to the first phase reversal, and activation of the worst off-support violator.
/// Cyclic coordinate descent takes over when the active-set iteration stalls, and hands back
/// to it periodically. Everything that depends only on (D, W) is precomputed.
///
/// A solve counts as converged when the KKT residual is within kkt_tol, or within the
/// round-off of evaluating the gradient, whichever is larger; with an ill-conditioned W the
/// latter dominates.
class LassoSolver {
public:
    LassoSolver(CMatrix design, CMatrix weight, LassoOptions options = {});

    Index states() const { return design_.cols(); }
    Index rows() const { return design_.rows(); }
    const LassoOptions& options() const { return options_; }

    /// Weighted least squares with nu = 0: x = (D' W D)^-1 D' W y.
    CVector least_squares(const CVector& y) const;

    LassoSolution solve(const CVector& y, double gamma, const CVector* x0 = nullptr, const CVector* nu0 = nullptr) const;

    double objective(const CVector& y, double gamma, const CVector& x, const CVector& nu) const;

    /// Largest violation of the optimality conditions, divided by max(1, gamma):
    /// D' W mu = 0, (W mu)_k = gamma nu_k/|nu_k| on the support, |(W mu)_k| <= gamma off it.
    double kkt_residual(const CVector& y, double gamma, const CVector& x, const CVector& nu) const;

private:
    /// Active-set iteration from nu; true when it reaches the KKT tolerance.
    bool active_set(const CVector& y, const CVector& Sy, double gamma, CVector& nu, int& steps) const;
    CVector eliminate_x(const CVector& y, const CVector& nu) const;
    /// Convergence threshold for the normalized KKT residual at (y, nu).
    double tolerance(const CVector& y, const CVector& nu, double gamma) const;

    CMatrix design_;
    CMatrix weight_;
    CMatrix DtW_;      // D' W
    CMatrix normal_;   // D' W D
    Eigen::LDLT<CMatrix> normal_ldlt_;
    CMatrix projected_;  // S
    double gradient_norm_ = 0.0;  // max row sum of |S| and |D' W|
    LassoOptions options_;
};

/// Elementwise complex soft-threshold: v * max(0, 1 - t/|v|).
CVector soft_threshold(const CVector& v, double t);

}  // namespace secest
