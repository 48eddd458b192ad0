#include "secest/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace secest {

CVector soft_threshold(const CVector& v, double t)
{
    CVector out(v.size());
    for (Index k = 0; k < v.size(); ++k) {
        const double a = std::abs(v(k));
        out(k) = a > t ? v(k) * ((a - t) / a) : Complex(0.0, 0.0);
    }
    return out;
}

LassoSolver::LassoSolver(CMatrix design, CMatrix weight, LassoOptions options)
    : design_(std::move(design)), weight_(std::move(weight)), options_(options)
{
    const Index N = design_.rows();
    const Index n = design_.cols();
    if (weight_.rows() != N || weight_.cols() != N) throw std::invalid_argument("LassoSolver: weight is not N x N");

    DtW_ = design_.adjoint() * weight_;
    normal_ = DtW_ * design_;
    normal_ = 0.5 * (normal_ + normal_.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> ns(normal_, Eigen::EigenvaluesOnly);
    const Vector& nev = ns.eigenvalues();
    if (n > 0 && !(nev.minCoeff() > 1e-12 * nev.cwiseAbs().maxCoeff())) {
        throw AssumptionError("state unobservable in canonical coordinates (singular normal matrix)");
    }
    normal_ldlt_.compute(normal_);
    projected_ = weight_ - DtW_.adjoint() * normal_ldlt_.solve(DtW_);
    projected_ = 0.5 * (projected_ + projected_.adjoint());
    gradient_norm_ = projected_.cwiseAbs().rowwise().sum().maxCoeff();
    if (n > 0) gradient_norm_ = std::max(gradient_norm_, DtW_.cwiseAbs().rowwise().sum().maxCoeff());
}

double LassoSolver::tolerance(const CVector& y, const CVector& nu, double gamma) const
{
    const double size = (y.size() ? y.cwiseAbs().maxCoeff() : 0.0) + (nu.size() ? nu.cwiseAbs().maxCoeff() : 0.0);
    // the gradient is formed as S y - S nu; each length-N product carries up to N eps |S| |v|
    const double roundoff =
        2.0 * static_cast<double>(rows()) * std::numeric_limits<double>::epsilon() * gradient_norm_ * size;
    return std::max(options_.kkt_tol, roundoff / std::max(1.0, gamma));
}

CVector LassoSolver::least_squares(const CVector& y) const
{
    return normal_ldlt_.solve(DtW_ * y);
}

CVector LassoSolver::eliminate_x(const CVector& y, const CVector& nu) const
{
    return normal_ldlt_.solve(DtW_ * (y - nu));
}

double LassoSolver::objective(const CVector& y, double gamma, const CVector& x, const CVector& nu) const
{
    const CVector mu = y - design_ * x - nu;
    return 0.5 * mu.dot(weight_ * mu).real() + gamma * nu.cwiseAbs().sum();
}

namespace {

// Subgradient violation for nu given Wmu = W mu, divided by max(1, gamma).
double nu_violation(const CVector& Wmu, const CVector& nu, double gamma)
{
    double r = 0.0;
    for (Index k = 0; k < nu.size(); ++k) {
        const double a = std::abs(nu(k));
        if (a > 0.0) {
            r = std::max(r, std::abs(Wmu(k) - gamma * nu(k) / a));
        } else {
            r = std::max(r, std::abs(Wmu(k)) - gamma);
        }
    }
    return std::max(r, 0.0) / std::max(1.0, gamma);
}

double reduced_objective(const CMatrix& S, const CVector& y, const CVector& nu, double gamma)
{
    const CVector r = y - nu;
    return 0.5 * r.dot(S * r).real() + gamma * nu.cwiseAbs().sum();
}

}  // namespace

double LassoSolver::kkt_residual(const CVector& y, double gamma, const CVector& x, const CVector& nu) const
{
    const CVector mu = y - design_ * x - nu;
    const CVector Wmu = weight_ * mu;
    const CVector gx = design_.adjoint() * Wmu;
    const double rx = gx.size() ? gx.cwiseAbs().maxCoeff() / std::max(1.0, gamma) : 0.0;
    return std::max(rx, nu_violation(Wmu, nu, gamma));
}

bool LassoSolver::active_set(const CVector& y, const CVector& Sy, double gamma, CVector& nu, int& steps) const
{
    (void)Sy;
    const Index n = states();
    const Index N = rows();
    const double scale = std::max(1.0, gamma);
    const int max_steps = 50 + 4 * static_cast<int>(N);
    const CVector Wy = weight_ * y;
    const CVector DtWy = DtW_ * y;
    CVector x = eliminate_x(y, nu);
    double f = objective(y, gamma, x, nu);

    for (int step = 0; step < max_steps; ++step, ++steps) {
        const CVector lambda = weight_ * (y - design_ * x - nu);
        const CVector gx = DtW_ * (y - design_ * x - nu);
        const double rx = n > 0 ? gx.cwiseAbs().maxCoeff() / scale : 0.0;
        if (std::max(rx, nu_violation(lambda, nu, gamma)) <= tolerance(y, nu, gamma)) {
            return true;
        }

        std::vector<Index> support;
        std::vector<Complex> phase;
        double stationary = rx * scale;
        for (Index k = 0; k < N; ++k) {
            const double a = std::abs(nu(k));
            if (a > 0.0) {
                support.push_back(k);
                phase.push_back(nu(k) / a);
                stationary = std::max(stationary, std::abs(lambda(k) - gamma * nu(k) / a));
            }
        }
        if (stationary <= options_.kkt_tol * scale) {
            Index worst = -1;
            double excess = options_.kkt_tol * scale;
            for (Index k = 0; k < N; ++k) {
                if (std::abs(nu(k)) > 0.0) continue;
                const double e = std::abs(lambda(k)) - gamma;
                if (e > excess) {
                    excess = e;
                    worst = k;
                }
            }
            if (worst < 0) return true;
            support.push_back(worst);
            phase.push_back(lambda(worst) / std::abs(lambda(worst)));
        }

        // Smooth model on the support with phases fixed:
        //   phi(z) = 1/2 z' K z - Re(b' z) + const,  z = (x, nu_S).
        const Index s = static_cast<Index>(support.size());
        const Index d = n + s;
        CMatrix K(d, d);
        CVector b(d), z(d);
        K.topLeftCorner(n, n) = normal_;
        b.head(n) = DtWy;
        z.head(n) = x;
        for (Index r = 0; r < s; ++r) {
            const Index i = support[static_cast<size_t>(r)];
            K.block(0, n + r, n, 1) = DtW_.col(i);
            K.block(n + r, 0, 1, n) = DtW_.col(i).adjoint();
            for (Index c = 0; c < s; ++c) K(n + r, n + c) = weight_(i, support[static_cast<size_t>(c)]);
            b(n + r) = Wy(i) - gamma * phase[static_cast<size_t>(r)];
            z(n + r) = nu(i);
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (K + K.adjoint()));
        const Vector& ev = es.eigenvalues();
        const CMatrix& U = es.eigenvectors();
        const double thr = 1e-11 * std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        const CVector c = U.adjoint() * b;
        CVector dir = CVector::Zero(d);
        bool unbounded = false;
        for (Index j = 0; j < d; ++j) {
            if (ev(j) <= thr && std::abs(c(j)) > 1e-12 * std::max(1.0, b.norm())) unbounded = true;
        }
        if (unbounded) {
            // phi decreases linearly along the null space of K; follow it to the first phase reversal.
            for (Index j = 0; j < d; ++j)
                if (ev(j) <= thr) dir += U.col(j) * c(j);
        } else {
            CVector target = CVector::Zero(d);
            const CVector zc = U.adjoint() * z;
            for (Index j = 0; j < d; ++j) target += U.col(j) * (ev(j) > thr ? c(j) / ev(j) : zc(j));
            dir = target - z;
        }

        std::vector<std::pair<double, Index>> cuts;
        if (!unbounded) cuts.emplace_back(1.0, -1);
        for (Index r = 0; r < s; ++r) {
            const Complex p = std::conj(phase[static_cast<size_t>(r)]);
            const double alpha = (p * z(n + r)).real();
            const double beta = (p * dir(n + r)).real();
            if (alpha >= 0.0 && beta < 0.0) {
                const double t = -alpha / beta;
                if (unbounded || t < 1.0) cuts.emplace_back(t, r);
            }
        }
        if (cuts.empty()) return false;
        if (unbounded) {
            // Only the nearest reversal is reachable along an unbounded ray.
            std::sort(cuts.begin(), cuts.end());
            cuts.resize(1);
        }

        double best_f = std::numeric_limits<double>::infinity();
        CVector best_x, best_nu;
        for (const auto& [t, r] : cuts) {
            const CVector zt = z + t * dir;
            CVector trial_nu = nu;
            for (Index j = 0; j < s; ++j) trial_nu(support[static_cast<size_t>(j)]) = zt(n + j);
            if (r >= 0) trial_nu(support[static_cast<size_t>(r)]) = 0.0;
            const CVector trial_x = zt.head(n);
            const double ft = objective(y, gamma, trial_x, trial_nu);
            if (ft < best_f) {
                best_f = ft;
                best_x = trial_x;
                best_nu = std::move(trial_nu);
            }
        }
        if (!(best_f <= f + 1e-13 * std::max(1.0, std::abs(f)))) return false;
        const bool progressed = (best_nu - nu).cwiseAbs().maxCoeff() > 0.0 || (best_x - x).cwiseAbs().maxCoeff() > 0.0;
        x = std::move(best_x);
        nu = std::move(best_nu);
        f = best_f;
        if (!progressed) return false;
    }
    return false;
}

LassoSolution LassoSolver::solve(const CVector& y, double gamma, const CVector* x0, const CVector* nu0) const
{
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive: gamma = 0 leaves x non-identifiable");
    const Index N = rows();
    if (y.size() != N) throw std::invalid_argument("LassoSolver::solve: measurement has wrong length");

    const CMatrix& S = projected_;
    const CVector Sy = S * y;
    CVector nu = CVector::Zero(N);
    CVector g = Sy;  // S (y - nu) = W mu at the eliminated x
    double kkt = nu_violation(g, nu, gamma);

    auto finish = [&](int iterations, bool converged) {
        LassoSolution out;
        out.x = eliminate_x(y, nu);
        out.nu = nu;
        out.mu = y - design_ * out.x - nu;
        out.iterations = iterations;
        out.kkt_residual = kkt_residual(y, gamma, out.x, nu);
        out.converged = converged;
        out.objective = objective(y, gamma, out.x, nu);
        return out;
    };

    if (options_.screen && kkt <= tolerance(y, nu, gamma)) return finish(0, true);

    if (nu0 && nu0->size() == N && nu0->allFinite() &&
        reduced_objective(S, y, *nu0, gamma) < reduced_objective(S, y, nu, gamma)) {
        nu = *nu0;
        g = Sy - S * nu;
        kkt = nu_violation(g, nu, gamma);
    }
    (void)x0;  // x is determined by nu

    int steps = 0;
    auto try_active_set = [&]() {
        CVector candidate = nu;
        active_set(y, Sy, gamma, candidate, steps);
        const CVector gc = Sy - S * candidate;
        const double kc = nu_violation(gc, candidate, gamma);
        if (kc < kkt && reduced_objective(S, y, candidate, gamma) <= reduced_objective(S, y, nu, gamma) + 1e-12) {
            nu = candidate;
            g = gc;
            kkt = kc;
        }
    };

    if (options_.polish) {
        try_active_set();
        if (kkt <= tolerance(y, nu, gamma)) return finish(steps, true);
    }

    const double diag_floor = 1e-14 * std::max(1.0, S.diagonal().real().cwiseAbs().maxCoeff());
    for (int sweep = 1; sweep <= options_.max_iter; ++sweep) {
        for (Index k = 0; k < N; ++k) {
            const double skk = S(k, k).real();
            const Complex c = g(k) + skk * nu(k);
            Complex next(0.0, 0.0);
            const double a = std::abs(c);
            if (skk > diag_floor && a > gamma) next = c * ((a - gamma) / (a * skk));
            const Complex delta = next - nu(k);
            if (delta != Complex(0.0, 0.0)) {
                g -= S.col(k) * delta;
                nu(k) = next;
            }
        }
        g = Sy - S * nu;
        kkt = nu_violation(g, nu, gamma);
        if (kkt <= tolerance(y, nu, gamma)) return finish(steps + sweep, true);

        if (options_.polish && sweep % options_.polish_every == 0) {
            try_active_set();
            if (kkt <= tolerance(y, nu, gamma)) return finish(steps + sweep, true);
        }
    }
    return finish(steps + options_.max_iter, false);
}

}  // namespace secest
