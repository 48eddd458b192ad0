#include "secest/fusion.hpp"

#include <cmath>
#include <sstream>

namespace secest {

LocalBankState make_local_bank(const SensorDecomposition& decomposition)
{
    LocalBankState bank;
    bank.zeta.assign(static_cast<size_t>(decomposition.sensors()), CVector::Zero(decomposition.states()));
    return bank;
}

LocalBankState local_estimator_step(const LocalBankState& bank, const Vector& y, const Vector& u,
                                    const SensorDecomposition& decomposition, const SpectralDesign& design,
                                    const SystemModel& model)
{
    const Index n = model.states();
    const Index m = model.sensors();
    if (y.size() != m) throw std::invalid_argument("local_estimator_step: y has wrong length");
    if (u.size() != model.inputs()) throw std::invalid_argument("local_estimator_step: u has wrong length");
    if (static_cast<Index>(bank.zeta.size()) != m || decomposition.sensors() != m)
        throw std::invalid_argument("local_estimator_step: bank size does not match the sensor count");

    LocalBankState next;
    next.k = bank.k + 1;
    next.zeta.resize(static_cast<size_t>(m));
    const CVector Bu = (model.B * u).cast<Complex>();
    for (Index i = 0; i < m; ++i) {
        const CVector& z = bank.zeta[static_cast<size_t>(i)];
        if (z.size() != n) throw std::invalid_argument("local_estimator_step: zeta has wrong length");
        CVector out = design.Pi.cwiseProduct(z);
        out.array() += Complex(y(i), 0.0);
        if (model.inputs() > 0) {
            const CMatrix& G = decomposition.G[static_cast<size_t>(i)];
            const Complex cbu = (model.C.row(i).cast<Complex>() * Bu)(0);
            out += G * Bu;
            out.array() -= cbu;
        }
        next.zeta[static_cast<size_t>(i)] = std::move(out);
    }
    return next;
}

CVector assemble_canonical_measurement(const LocalBankState& bank, const SensorDecomposition& decomposition)
{
    const Index n = decomposition.states();
    const Index m = decomposition.sensors();
    CVector Y(n * m);
    for (Index i = 0; i < m; ++i) Y.segment(i * n, n) = decomposition.P[static_cast<size_t>(i)] * bank.zeta[static_cast<size_t>(i)];
    return Y;
}

namespace {

Vector real_part_checked(const CVector& x, const char* what)
{
    const double scale = std::max(1.0, x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
    const double imag = x.size() ? x.imag().cwiseAbs().maxCoeff() : 0.0;
    if (imag > tol::imag_residue * scale) {
        std::ostringstream os;
        os << what << ": imaginary residue " << imag << " exceeds tolerance; conjugate pairing is inconsistent";
        throw AssumptionError(os.str());
    }
    return x.real();
}

}  // namespace

LeastSquaresResult weighted_least_squares(const CVector& Y, const Matrix& H_stack, const HermitianFactor& Mtilde)
{
    if (Y.size() != H_stack.rows() || Mtilde.size() != Y.size())
        throw std::invalid_argument("weighted_least_squares: dimension mismatch");
    const CMatrix H = H_stack.cast<Complex>();
    const CMatrix HtW = H.adjoint() * Mtilde.inverse();
    const CMatrix normal = HtW * H;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (normal + normal.adjoint()), Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    if (ev.size() == 0 || !(ev.minCoeff() > 1e-12 * ev.cwiseAbs().maxCoeff()))
        throw AssumptionError("state unobservable in canonical coordinates");
    const CVector x = normal.ldlt().solve(HtW * Y);
    LeastSquaresResult out;
    out.x = real_part_checked(x, "least-squares estimate");
    out.mu = Y - H * out.x.cast<Complex>();
    return out;
}

double equivalence_statistic(const CVector& mu_ls, const HermitianFactor& Mtilde)
{
    if (mu_ls.size() == 0) return 0.0;
    return (Mtilde.inverse() * mu_ls).cwiseAbs().maxCoeff();
}

bool kalman_equivalence_condition(const CVector& mu_ls, const HermitianFactor& Mtilde, double gamma)
{
    return equivalence_statistic(mu_ls, Mtilde) <= gamma;
}

SecureFusion::SecureFusion(const Matrix& H_stack, const HermitianFactor& Mtilde, LassoOptions options)
    : H_(H_stack), Mtilde_(&Mtilde), solver_(H_stack.cast<Complex>(), Mtilde.inverse(), options)
{
}

FusionResult SecureFusion::solve(const CVector& Y, double gamma)
{
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");
    FusionResult out;
    const LeastSquaresResult ls = weighted_least_squares(Y, H_, *Mtilde_);
    out.x_ls = ls.x;
    out.equivalence_statistic = equivalence_statistic(ls.mu, *Mtilde_);
    out.kalman_equivalent = out.equivalence_statistic <= gamma;

    const Index N = Y.size();
    if (out.kalman_equivalent && solver_.options().screen) {
        out.x_tilde = ls.x;
        out.mu = ls.mu;
        out.nu = CVector::Zero(N);
        out.kkt_residual = solver_.kkt_residual(Y, gamma, ls.x.cast<Complex>(), out.nu);
        out.iterations = 0;
        out.converged = true;
        out.objective = solver_.objective(Y, gamma, ls.x.cast<Complex>(), out.nu);
        x_warm_ = ls.x.cast<Complex>();
        nu_warm_ = out.nu;
        has_warm_ = true;
        return out;
    }

    const LassoSolution sol = has_warm_ ? solver_.solve(Y, gamma, &x_warm_, &nu_warm_) : solver_.solve(Y, gamma);
    out.x_tilde = real_part_checked(sol.x, "secure estimate");
    out.mu = sol.mu;
    out.nu = sol.nu;
    out.kkt_residual = sol.kkt_residual;
    out.iterations = sol.iterations;
    out.converged = sol.converged;
    out.objective = sol.objective;
    x_warm_ = sol.x;
    nu_warm_ = sol.nu;
    has_warm_ = true;
    return out;
}

FusionResult secure_fuse(const CVector& Y, const Matrix& H_stack, const HermitianFactor& Mtilde, double gamma,
                         LassoOptions options)
{
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");
    SecureFusion fusion(H_stack, Mtilde, options);
    return fusion.solve(Y, gamma);
}

}  // namespace secest
