#pragma once

#include <vector>

#include "secest/model.hpp"
#include "secest/spectral.hpp"

namespace secest {

/// Factorization of the Hermitian residual covariance used by the fusion solves. When the
/// condition number exceeds tol::cond a ridge delta * I is added before factorizing.
class HermitianFactor {
public:
    HermitianFactor() = default;
    explicit HermitianFactor(const CMatrix& M);

    CVector solve(const CVector& b) const { return ldlt_.solve(b); }
    CMatrix solve(const CMatrix& b) const { return ldlt_.solve(b); }
    /// Dense inverse of the (regularized) matrix, cached at construction.
    const CMatrix& inverse() const { return inverse_; }

    double ridge() const { return ridge_; }
    double condition() const { return condition_; }
    double min_eigenvalue() const { return min_eig_; }
    Index size() const { return inverse_.rows(); }

private:
    Eigen::LDLT<CMatrix> ldlt_;
    CMatrix inverse_;
    double ridge_ = 0.0;
    double condition_ = 1.0;
    double min_eig_ = 0.0;
};

/// Row j: C_i A (A - pi_j I)^-1, one linear solve per row.
CMatrix local_gain_direct(const SystemModel& model, const SpectralDesign& design, Index sensor);

/// Coefficients b_0..b_{n-1} of q(x) = (p(x) - p(pi)) / (x - pi).
CVector quotient_coefficients(const Vector& charpoly, Complex pi);

struct GainFactors {
    CVector D1;  // diagonal of D1: -1 / p(pi_j)
    CMatrix D2;  // Vandermonde rows (pi_j^{n-1}, ..., 1)
    Matrix D3;   // lower-triangular Toeplitz of (a_n, ..., a_1)
};

/// Throws AssumptionError when some |p(pi_j)| falls below tol::dist.
GainFactors gain_factors(const Vector& charpoly, const CVector& Pi);

/// G_i = D1 D2 D3 O_i A, the polynomial route to the same matrix as local_gain_direct.
CMatrix local_gain_factored(const SystemModel& model, const SpectralDesign& design, Index sensor);

/// Companion matrix of a monic polynomial with coefficients a_0..a_n (last row -a_0..-a_{n-1}).
Matrix companion_matrix(const Vector& charpoly);

struct CanonicalPair {
    CMatrix P;  // invertible, P G = H
    Matrix H;   // diagonal 0/1 indicator of observed states
};

/// Builds P = [E | E_c][B | B_c]^-1 where B holds the nonzero columns of G (ascending), E the
/// matching unit vectors, E_c the unit vectors of unobserved states and B_c an orthonormal
/// completion obtained by pivoted Gram-Schmidt over the unit vectors.
CanonicalPair canonical_projector(const CMatrix& G, const std::vector<bool>& observed);

struct FusionWeights {
    std::vector<CMatrix> F;  // F_i = V diag(V^-1 K_i); complex when A - KCA has complex eigenvalues
    CMatrix F_row;           // [F_1 ... F_m]; F zeta is real
};

FusionWeights fusion_weights(const SpectralDesign& design);

struct ResidualCovariances {
    CMatrix Qtilde;
    CMatrix Wtilde;
    CMatrix Mtilde;
};

/// Noise covariance of the stacked local residuals, its stationary covariance under the
/// diagonal local dynamics, and the same in canonical coordinates.
ResidualCovariances residual_covariances(const SystemModel& model, const SpectralDesign& design,
                                         const std::vector<CMatrix>& G, const CMatrix& Ptilde);

struct SensorDecomposition {
    std::vector<CMatrix> G;
    std::vector<Matrix> H;
    std::vector<CMatrix> P;
    std::vector<CMatrix> F;
    CMatrix G_stack;
    Matrix H_stack;
    CMatrix Ptilde;
    CMatrix F_row;
    CMatrix Qtilde;
    CMatrix Wtilde;
    CMatrix Mtilde;
    HermitianFactor Mtilde_factor;

    Index states() const { return H_stack.cols(); }
    Index sensors() const { return static_cast<Index>(G.size()); }
};

/// Assembles every per-sensor and stacked quantity; verifies P_i G_i = H_i and the
/// resolvent identity G_i A = Pi G_i + 1 C_i A, throwing AssumptionError on violation.
SensorDecomposition build_decomposition(const SystemModel& model, const SpectralDesign& design);

/// Reassembles a decomposition from its stored per-sensor parts (used when loading a design file).
SensorDecomposition assemble_decomposition(std::vector<CMatrix> G, std::vector<Matrix> H, std::vector<CMatrix> P,
                                           std::vector<CMatrix> F, CMatrix Qtilde, CMatrix Wtilde, CMatrix Mtilde);

}  // namespace secest
