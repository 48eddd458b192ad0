#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace secest {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Malformed input: unreadable file, bad JSON, non-rectangular or non-finite matrices, unknown keys.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A well-formed model that violates one of the structural requirements (Jordan form, PSD noise, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A design-time assumption failed: detectability, distinct closed-loop spectrum, canonical form.
class AssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tolerances used across the library. Relative ones are scaled by the norm named in the comment.
namespace tol {
inline constexpr double singular = 1e-9;      // |det A| > singular * ||A||
inline constexpr double observe = 1e-9;       // column norm > observe * ||O_i||
inline constexpr double psd = 1e-9;           // eigenvalues >= -psd * trace
inline constexpr double pd = 1e-12;           // eigenvalues of R >= pd
inline constexpr double symmetric = 1e-12;    // ||M - M'|| <= symmetric * max(1, ||M||)
inline constexpr double jordan = 1e-12;       // "zero" entries of a Jordan-form A, relative to max(1, ||A||)
inline constexpr double riccati = 1e-12;      // successive P iterates, max-abs
inline constexpr int riccati_max_iter = 100000;
inline constexpr double eig = 1e-8;
inline constexpr double dist = 1e-6;
inline constexpr double canonical = 1e-8;
inline constexpr double lyapunov = 1e-10;
inline constexpr double cond = 1e12;
inline constexpr double kkt = 1e-8;
inline constexpr int lasso_max_iter = 20000;
inline constexpr double imag_residue = 1e-6;
}  // namespace tol

}  // namespace secest
