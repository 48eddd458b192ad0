#include "secest/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace secest {

namespace {

double max_abs(const Matrix& M)
{
    return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

Matrix kalman_gain(const Matrix& P_plus, const Matrix& C, const Matrix& R)
{
    const Matrix S = C * P_plus * C.transpose() + R;
    // K = P_plus C' S^-1, solved as S K' = C P_plus'
    return S.llt().solve(C * P_plus.transpose()).transpose();
}

}  // namespace

SteadyStateKalman steady_state_kalman(const SystemModel& model, double tol, int max_iter)
{
    const Matrix& A = model.A;
    const Matrix& C = model.C;
    Matrix P_plus = model.Sigma;
    double step = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= max_iter; ++it) {
        const Matrix K = kalman_gain(P_plus, C, model.R);
        Matrix P = P_plus - K * C * P_plus;
        P = 0.5 * (P + P.transpose());
        Matrix next = A * P * A.transpose() + model.Q;
        next = 0.5 * (next + next.transpose());
        step = max_abs(next - P_plus);
        P_plus = std::move(next);
        if (!std::isfinite(step)) break;
        if (step <= tol * std::max(1.0, max_abs(P_plus))) {
            SteadyStateKalman out;
            out.P_plus = P_plus;
            out.K = kalman_gain(P_plus, C, model.R);
            out.P = P_plus - out.K * C * P_plus;
            out.P = 0.5 * (out.P + out.P.transpose());
            out.iterations = it;
            out.residual = riccati_residual(model, out.P, out.P_plus, out.K);
            return out;
        }
    }
    std::ostringstream os;
    os << "Riccati recursion did not converge within " << max_iter << " iterations (last step " << step
       << "); is (A, C) detectable?";
    throw RiccatiError(os.str(), step);
}

double riccati_residual(const SystemModel& model, const Matrix& P, const Matrix& P_plus, const Matrix& K)
{
    const Matrix& A = model.A;
    const Matrix& C = model.C;
    const double pred = max_abs(P_plus - (A * P * A.transpose() + model.Q));
    const double gain = max_abs(K - kalman_gain(P_plus, C, model.R));
    const double upd = max_abs(P - (P_plus - K * C * P_plus));
    return std::max({pred, gain, upd});
}

Vector characteristic_polynomial(const Matrix& A)
{
    const Index n = A.rows();
    Vector c = Vector::Zero(n + 1);
    c(0) = 1.0;  // running product, low order first
    for (Index k = 0; k < n; ++k) {
        const double lambda = A(k, k);
        // multiply by (x - lambda)
        for (Index d = k + 1; d >= 1; --d) c(d) = c(d - 1) - lambda * c(d);
        c(0) = -lambda * c(0);
    }
    return c;
}

Complex evaluate_polynomial(const Vector& coeffs, Complex x)
{
    Complex acc = 0.0;
    for (Index i = coeffs.size() - 1; i >= 0; --i) acc = acc * x + coeffs(i);
    return acc;
}

ClosedLoopSpectrum closed_loop_eigendecomposition(const Matrix& A, const Matrix& K, const Matrix& C,
                                                  double eig_tol, double dist_tol)
{
    const Matrix F = A - K * C * A;
    const Index n = F.rows();
    Eigen::EigenSolver<Matrix> es(F, true);
    if (es.info() != Eigen::Success) throw AssumptionError("eigendecomposition of A - KCA did not converge");

    const CVector raw_values = es.eigenvalues();
    const CMatrix raw_vectors = es.eigenvectors();

    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const Complex x = raw_values(a), y = raw_values(b);
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });

    ClosedLoopSpectrum out;
    out.Pi.resize(n);
    out.V.resize(n, n);
    for (Index k = 0; k < n; ++k) {
        const Index src = order[static_cast<size_t>(k)];
        out.Pi(k) = raw_values(src);
        CVector v = raw_vectors.col(src);
        v /= v.norm();
        const double significant = 1e-8 * v.cwiseAbs().maxCoeff();
        for (Index r = 0; r < n; ++r) {
            if (std::abs(v(r)) > significant) {
                v *= std::conj(v(r)) / std::abs(v(r));
                v(r) = Complex(std::abs(v(r)), 0.0);
                break;
            }
        }
        out.V.col(k) = v;
    }

    Eigen::JacobiSVD<CMatrix> svd(out.V);
    const auto& sv = svd.singularValues();
    const double cond = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= 1.0 / eig_tol)) {
        throw AssumptionError("distinct-spectrum assumption violated: A - KCA is not diagonalizable (eigenvector condition number " +
                              std::to_string(cond) + ")");
    }

    const CMatrix Fc = F.cast<Complex>();
    out.residual = (Fc * out.V - out.V * out.Pi.asDiagonal()).cwiseAbs().maxCoeff();

    std::ostringstream diag;
    bool ok = true;
    for (Index a = 0; a < n; ++a) {
        if (std::abs(out.Pi(a)) >= 1.0) {
            ok = false;
            diag << "eigenvalue " << out.Pi(a) << " of A - KCA is not strictly stable; ";
        }
        for (Index b = a + 1; b < n; ++b) {
            if (std::abs(out.Pi(a) - out.Pi(b)) <= dist_tol) {
                ok = false;
                diag << "A - KCA has a repeated eigenvalue " << out.Pi(a) << "; ";
            }
        }
        for (Index k = 0; k < A.rows(); ++k) {
            if (std::abs(out.Pi(a) - A(k, k)) <= dist_tol) {
                ok = false;
                diag << "A - KCA shares the eigenvalue " << A(k, k) << " with A; ";
                break;
            }
        }
    }
    out.assumption1_ok = ok;
    out.diagnostic = diag.str();
    if (!out.diagnostic.empty()) out.diagnostic.resize(out.diagnostic.size() - 2);
    return out;
}

SpectralDesign build_spectral_design(const SystemModel& model)
{
    require_valid(model);
    const auto structure = observability_structure(model);
    if (!structure.observable()) throw AssumptionError("(A, C) is not observable: some state is seen by no sensor");

    const auto kalman = steady_state_kalman(model);
    auto spectrum = closed_loop_eigendecomposition(model.A, kalman.K, model.C);
    if (!spectrum.assumption1_ok) throw AssumptionError("distinct-spectrum assumption violated: " + spectrum.diagnostic);

    SpectralDesign d;
    d.P = kalman.P;
    d.P_plus = kalman.P_plus;
    d.K = kalman.K;
    d.charpoly = characteristic_polynomial(model.A);
    d.V = std::move(spectrum.V);
    d.Pi = std::move(spectrum.Pi);
    d.riccati_residual = kalman.residual;
    d.eig_residual = spectrum.residual;
    d.assumption1_ok = true;
    return d;
}

Vector fixed_gain_kalman_step(const Vector& xhat, const Vector& y, const Vector& u, const SpectralDesign& design,
                              const SystemModel& model)
{
    const Index n = model.states();
    if (xhat.size() != n || y.size() != model.sensors() || u.size() != model.inputs())
        throw std::invalid_argument("fixed_gain_kalman_step: dimension mismatch");
    const Matrix& K = design.K;
    Vector next = model.A * xhat;
    next += K * (y - model.C * next);
    if (u.size() > 0) {
        const Vector Bu = model.B * u;
        next += Bu - K * (model.C * Bu);
    }
    return next;
}

}  // namespace secest
