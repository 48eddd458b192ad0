#include "secest/decomposition.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace secest {

namespace {

double max_abs(const CMatrix& M)
{
    return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

double max_abs(const Matrix& M)
{
    return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

}  // namespace

HermitianFactor::HermitianFactor(const CMatrix& M)
{
    const Index N = M.rows();
    const CMatrix herm = 0.5 * (M + M.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    min_eig_ = N > 0 ? ev.minCoeff() : 0.0;
    const double top = N > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
    condition_ = min_eig_ > 0.0 ? top / min_eig_ : std::numeric_limits<double>::infinity();

    if (N > 0 && (condition_ > tol::cond || min_eig_ <= 0.0)) {
        const double trace = herm.trace().real();
        ridge_ = trace / (static_cast<double>(N) * tol::cond) + std::max(0.0, -min_eig_);
    }
    CMatrix reg = herm;
    reg.diagonal().array() += ridge_;
    ldlt_.compute(reg);
    inverse_ = ldlt_.solve(CMatrix::Identity(N, N));
    inverse_ = 0.5 * (inverse_ + inverse_.adjoint());
}

CMatrix local_gain_direct(const SystemModel& model, const SpectralDesign& design, Index sensor)
{
    const Index n = model.states();
    const CMatrix A = model.A.cast<Complex>();
    const CVector rhs = (model.C.row(sensor) * model.A).transpose().cast<Complex>();
    CMatrix G(n, n);
    for (Index j = 0; j < n; ++j) {
        const CMatrix shifted = A - design.Pi(j) * CMatrix::Identity(n, n);
        Eigen::PartialPivLU<CMatrix> lu(shifted.transpose());
        if (!(lu.rcond() > 1e-14)) {
            std::ostringstream os;
            os << "A - pi I is numerically singular for pi = " << design.Pi(j);
            throw AssumptionError(os.str());
        }
        G.row(j) = lu.solve(rhs).transpose();
    }
    return G;
}

CVector quotient_coefficients(const Vector& charpoly, Complex pi)
{
    const Index n = charpoly.size() - 1;
    CVector b(n);
    for (Index k = 0; k < n; ++k) {
        Complex acc = 0.0;
        Complex power = 1.0;
        for (Index i = 0; i <= n - k - 1; ++i) {
            acc += charpoly(i + k + 1) * power;
            power *= pi;
        }
        b(k) = acc;
    }
    return b;
}

GainFactors gain_factors(const Vector& charpoly, const CVector& Pi)
{
    const Index n = Pi.size();
    GainFactors f;
    f.D1.resize(n);
    f.D2.resize(n, n);
    f.D3 = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        const Complex p = evaluate_polynomial(charpoly, Pi(j));
        // zero to round-off; how close the spectra may be is decided by the spectral design
        double magnitude = 0.0;
        for (Index k = charpoly.size() - 1; k >= 0; --k) magnitude = magnitude * std::abs(Pi(j)) + std::abs(charpoly(k));
        if (!(std::abs(p) > 1e3 * std::numeric_limits<double>::epsilon() * magnitude)) {
            std::ostringstream os;
            os << "p(pi) vanishes at pi = " << Pi(j) << ": A and A - KCA share an eigenvalue";
            throw AssumptionError(os.str());
        }
        f.D1(j) = -1.0 / p;
        Complex power = 1.0;
        for (Index c = n - 1; c >= 0; --c) {
            f.D2(j, c) = power;
            power *= Pi(j);
        }
    }
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c <= r; ++c) f.D3(r, c) = charpoly(n - (r - c));
    return f;
}

CMatrix local_gain_factored(const SystemModel& model, const SpectralDesign& design, Index sensor)
{
    const Index n = model.states();
    const auto f = gain_factors(design.charpoly, design.Pi);
    const Matrix OA = observability_matrix(model.A, model.C.row(sensor), n) * model.A;
    return f.D1.asDiagonal() * (f.D2 * (f.D3.cast<Complex>() * OA.cast<Complex>()));
}

Matrix companion_matrix(const Vector& charpoly)
{
    const Index n = charpoly.size() - 1;
    Matrix Gamma = Matrix::Zero(n, n);
    for (Index r = 0; r + 1 < n; ++r) Gamma(r, r + 1) = 1.0;
    for (Index c = 0; c < n; ++c) Gamma(n - 1, c) = -charpoly(c) / charpoly(n);
    return Gamma;
}

CanonicalPair canonical_projector(const CMatrix& G, const std::vector<bool>& observed)
{
    const Index n = G.rows();
    if (G.cols() != n || static_cast<Index>(observed.size()) != n)
        throw std::invalid_argument("canonical_projector: dimension mismatch");

    std::vector<Index> obs, unobs;
    for (Index j = 0; j < n; ++j) (observed[static_cast<size_t>(j)] ? obs : unobs).push_back(j);

    const double scale = std::max(max_abs(G), 1e-300);
    for (Index j : unobs) {
        if (G.col(j).cwiseAbs().maxCoeff() > tol::canonical * scale) {
            throw AssumptionError("canonical form precondition violated: column " + std::to_string(j + 1) +
                                  " of G is nonzero for a state the sensor does not observe");
        }
    }

    // Independence does not depend on column lengths, and those can span many decades when a
    // closed-loop eigenvalue sits near an open-loop one, so rank tests use unit columns.
    const Index r = static_cast<Index>(obs.size());
    CMatrix B(n, r);
    Vector lengths(r);
    for (Index k = 0; k < r; ++k) {
        lengths(k) = G.col(obs[static_cast<size_t>(k)]).norm();
        B.col(k) = G.col(obs[static_cast<size_t>(k)]) / lengths(k);
    }

    CMatrix basis(n, n);
    Index filled = 0;
    if (r > 0) {
        Eigen::JacobiSVD<CMatrix> svd(B);
        const auto& sv = svd.singularValues();
        if (!(sv(r - 1) > tol::canonical * sv(0))) {
            throw AssumptionError(
                "canonical form precondition violated: nonzero columns of G are linearly dependent");
        }
        Eigen::HouseholderQR<CMatrix> qr(B);
        basis.leftCols(r) = qr.householderQ() * CMatrix::Identity(n, r);
        filled = r;
    }

    // Pivoted Gram-Schmidt over the unit vectors: take the candidate with the largest residual.
    CMatrix completion(n, n - r);
    std::vector<bool> used(static_cast<size_t>(n), false);
    for (Index k = 0; k < n - r; ++k) {
        Index best = -1;
        double best_norm = -1.0;
        CVector best_vec;
        for (Index c = 0; c < n; ++c) {
            if (used[static_cast<size_t>(c)]) continue;
            CVector v = CVector::Unit(n, c);
            for (int pass = 0; pass < 2; ++pass)
                for (Index b = 0; b < filled; ++b) v -= basis.col(b) * basis.col(b).dot(v);
            const double nv = v.norm();
            if (nv > best_norm + 1e-12) {
                best_norm = nv;
                best = c;
                best_vec = v;
            }
        }
        used[static_cast<size_t>(best)] = true;
        best_vec /= best_norm;
        basis.col(filled++) = best_vec;
        completion.col(k) = best_vec;
    }

    CMatrix M(n, n);
    M.leftCols(r) = B;
    M.rightCols(n - r) = completion;
    CMatrix E = CMatrix::Zero(n, n);
    for (Index k = 0; k < r; ++k) E(obs[static_cast<size_t>(k)], k) = 1.0;
    for (Index k = 0; k < n - r; ++k) E(unobs[static_cast<size_t>(k)], r + k) = 1.0;

    Eigen::PartialPivLU<CMatrix> lu(M);
    if (!(lu.rcond() > tol::canonical)) throw AssumptionError("canonical transform is numerically singular");

    // [B_raw | B_c] = M diag(lengths, 1), so P = E diag(lengths, 1)^-1 M^-1
    Vector inv_lengths = Vector::Ones(n);
    inv_lengths.head(r) = lengths.cwiseInverse();
    CanonicalPair out;
    out.P = E * inv_lengths.cast<Complex>().asDiagonal() * lu.solve(CMatrix::Identity(n, n));
    out.H = Matrix::Zero(n, n);
    for (Index j : obs) out.H(j, j) = 1.0;
    return out;
}

FusionWeights fusion_weights(const SpectralDesign& design)
{
    const Index n = design.states();
    const Index m = design.sensors();
    Eigen::PartialPivLU<CMatrix> lu(design.V);
    const CMatrix VinvK = lu.solve(design.K.cast<Complex>());

    FusionWeights w;
    w.F_row.resize(n, n * m);
    for (Index i = 0; i < m; ++i) {
        CMatrix Fi = design.V * VinvK.col(i).asDiagonal();
        w.F_row.middleCols(i * n, n) = Fi;
        w.F.push_back(std::move(Fi));
    }
    return w;
}

ResidualCovariances residual_covariances(const SystemModel& model, const SpectralDesign& design,
                                         const std::vector<CMatrix>& G, const CMatrix& Ptilde)
{
    const Index n = model.states();
    const Index m = model.sensors();
    const Index N = n * m;

    CMatrix Gm(N, n);
    for (Index i = 0; i < m; ++i) {
        Gm.middleRows(i * n, n) = G[static_cast<size_t>(i)] -
                                  (Vector::Ones(n) * model.C.row(i)).cast<Complex>();
    }

    ResidualCovariances out;
    out.Qtilde = Gm * model.Q.cast<Complex>() * Gm.adjoint();
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) out.Qtilde.block(a * n, b * n, n, n).array() += model.R(a, b);
    out.Qtilde = 0.5 * (out.Qtilde + out.Qtilde.adjoint());

    out.Wtilde.resize(N, N);
    for (Index a = 0; a < N; ++a) {
        const Complex pa = design.Pi(a % n);
        for (Index b = 0; b < N; ++b) {
            const Complex pb = design.Pi(b % n);
            if (std::abs(pa) * std::abs(pb) >= 1.0)
                throw AssumptionError("local estimator dynamics are not strictly stable");
            out.Wtilde(a, b) = out.Qtilde(a, b) / (1.0 - pa * std::conj(pb));
        }
    }
    out.Mtilde = Ptilde * out.Wtilde * Ptilde.adjoint();
    out.Mtilde = 0.5 * (out.Mtilde + out.Mtilde.adjoint());
    return out;
}

SensorDecomposition assemble_decomposition(std::vector<CMatrix> G, std::vector<Matrix> H, std::vector<CMatrix> P,
                                           std::vector<CMatrix> F, CMatrix Qtilde, CMatrix Wtilde, CMatrix Mtilde)
{
    const Index m = static_cast<Index>(G.size());
    const Index n = m > 0 ? G.front().rows() : 0;
    if (static_cast<Index>(H.size()) != m || static_cast<Index>(P.size()) != m || static_cast<Index>(F.size()) != m)
        throw std::invalid_argument("assemble_decomposition: per-sensor lists differ in length");

    SensorDecomposition d;
    d.G_stack.resize(n * m, n);
    d.H_stack.resize(n * m, n);
    d.Ptilde = CMatrix::Zero(n * m, n * m);
    d.F_row.resize(n, n * m);
    for (Index i = 0; i < m; ++i) {
        const auto s = static_cast<size_t>(i);
        d.G_stack.middleRows(i * n, n) = G[s];
        d.H_stack.middleRows(i * n, n) = H[s];
        d.Ptilde.block(i * n, i * n, n, n) = P[s];
        d.F_row.middleCols(i * n, n) = F[s];
    }
    d.G = std::move(G);
    d.H = std::move(H);
    d.P = std::move(P);
    d.F = std::move(F);
    d.Qtilde = std::move(Qtilde);
    d.Wtilde = std::move(Wtilde);
    d.Mtilde = std::move(Mtilde);
    d.Mtilde_factor = HermitianFactor(d.Mtilde);
    return d;
}

SensorDecomposition build_decomposition(const SystemModel& model, const SpectralDesign& design)
{
    const Index n = model.states();
    const Index m = model.sensors();
    const auto structure = observability_structure(model);
    const CMatrix A = model.A.cast<Complex>();

    std::vector<CMatrix> G, P;
    std::vector<Matrix> H;
    for (Index i = 0; i < m; ++i) {
        CMatrix Gi = local_gain_direct(model, design, i);

        const CMatrix identity_gap = Gi * A - design.Pi.asDiagonal() * Gi -
                                     (Vector::Ones(n) * (model.C.row(i) * model.A)).cast<Complex>();
        const double scale = std::max(1.0, max_abs(Gi)) * std::max(1.0, max_abs(model.A));
        if (max_abs(identity_gap) > tol::canonical * scale) {
            throw AssumptionError("resolvent identity fails for sensor " + std::to_string(i + 1));
        }

        std::vector<bool> observed(static_cast<size_t>(n));
        for (Index j = 0; j < n; ++j) observed[static_cast<size_t>(j)] = structure.observes(i, j);
        auto pair = canonical_projector(Gi, observed);
        const double pscale = std::max(1.0, max_abs(pair.P) * max_abs(Gi));
        if (max_abs(CMatrix(pair.P * Gi - pair.H.cast<Complex>())) > tol::canonical * pscale) {
            throw AssumptionError("canonical transform of sensor " + std::to_string(i + 1) + " misses P G = H");
        }
        G.push_back(std::move(Gi));
        P.push_back(std::move(pair.P));
        H.push_back(std::move(pair.H));
    }

    auto weights = fusion_weights(design);

    CMatrix Ptilde = CMatrix::Zero(n * m, n * m);
    for (Index i = 0; i < m; ++i) Ptilde.block(i * n, i * n, n, n) = P[static_cast<size_t>(i)];
    auto cov = residual_covariances(model, design, G, Ptilde);

    return assemble_decomposition(std::move(G), std::move(H), std::move(P), std::move(weights.F),
                                  std::move(cov.Qtilde), std::move(cov.Wtilde), std::move(cov.Mtilde));
}

}  // namespace secest
