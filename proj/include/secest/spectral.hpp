#pragma once

#include <string>

#include "secest/model.hpp"

namespace secest {

/// Raised when the Riccati recursion does not settle; carries the last step size.
class RiccatiError : public AssumptionError {
public:
    RiccatiError(const std::string& what, double residual) : AssumptionError(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

struct SteadyStateKalman {
    Matrix P;       // steady filtered error covariance
    Matrix P_plus;  // steady prediction covariance, A P A' + Q
    Matrix K;       // steady gain, P_plus C' (C P_plus C' + R)^-1
    double residual = 0.0;
    int iterations = 0;
};

/// Iterates the Riccati recursion from P(0|-1) = Sigma until successive P_plus iterates differ
/// by at most tol * max(1, ||P_plus||_max).
SteadyStateKalman steady_state_kalman(const SystemModel& model, double tol = tol::riccati,
                                      int max_iter = tol::riccati_max_iter);

/// Fixed-point residual of a steady Kalman triple, recomputed from scratch: the largest
/// max-abs violation among the prediction, gain and update equations.
double riccati_residual(const SystemModel& model, const Matrix& P, const Matrix& P_plus, const Matrix& K);

/// Coefficients a_0..a_n of det(xI - A) for a Jordan-form A (eigenvalues read off the diagonal).
Vector characteristic_polynomial(const Matrix& A);

/// Horner evaluation of a real-coefficient polynomial (a_0 first) at a complex point.
Complex evaluate_polynomial(const Vector& coeffs, Complex x);

struct ClosedLoopSpectrum {
    CMatrix V;     // unit-norm eigenvectors, first significant entry real positive
    CVector Pi;    // eigenvalues of A - KCA, sorted by (real, imag)
    double residual = 0.0;  // ||(A-KCA)V - V diag(Pi)||_max
    bool assumption1_ok = false;
    std::string diagnostic;
};

/// Eigendecomposition of A - KCA with deterministic ordering and normalization. Throws
/// AssumptionError when the eigenvector matrix is numerically singular (cond > 1/eig_tol).
ClosedLoopSpectrum closed_loop_eigendecomposition(const Matrix& A, const Matrix& K, const Matrix& C,
                                                  double eig_tol = tol::eig, double dist_tol = tol::dist);

struct SpectralDesign {
    Matrix P;
    Matrix P_plus;
    Matrix K;
    Vector charpoly;
    CMatrix V;
    CVector Pi;
    double riccati_residual = 0.0;
    double eig_residual = 0.0;
    bool assumption1_ok = false;

    Index states() const { return K.rows(); }
    Index sensors() const { return K.cols(); }
    Matrix closed_loop(const SystemModel& model) const { return model.A - K * model.C * model.A; }
};

/// Full spectral design for a validated, observable model. Throws AssumptionError if the
/// closed-loop spectrum violates the distinctness / disjointness / stability requirement.
SpectralDesign build_spectral_design(const SystemModel& model);

/// x+ = (A - KCA) x + K y + (I - KC) B u.
Vector fixed_gain_kalman_step(const Vector& xhat, const Vector& y, const Vector& u, const SpectralDesign& design,
                              const SystemModel& model);

}  // namespace secest
