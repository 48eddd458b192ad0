#include "secest/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace secest {

std::string SystemModel::sensor_label(Index i) const
{
    if (i < static_cast<Index>(sensor_labels.size())) return sensor_labels[static_cast<size_t>(i)];
    return "sensor " + std::to_string(i + 1);
}

Vector SystemModel::report_coordinates(const Vector& e) const
{
    return state_basis.size() == 0 ? e : Vector(state_basis * e);
}

bool ValidationReport::ok() const
{
    return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

std::string ValidationReport::first_failure() const
{
    for (const auto& c : checks)
        if (!c.passed) return c.name + ": " + c.message;
    return {};
}

std::vector<JordanBlock> jordan_blocks(const Matrix& A)
{
    const Index n = A.rows();
    if (n == 0 || A.cols() != n) return {};
    const double zero = tol::jordan * std::max(1.0, A.cwiseAbs().maxCoeff());

    for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < n; ++c) {
            if (c == r || c == r + 1) continue;
            if (std::abs(A(r, c)) > zero) return {};
        }
    }

    std::vector<JordanBlock> blocks;
    Index start = 0;
    for (Index r = 0; r < n; ++r) {
        const bool last = (r + 1 == n);
        bool chained = false;
        if (!last) {
            const double sup = A(r, r + 1);
            if (std::abs(sup - 1.0) <= zero) {
                chained = true;
            } else if (std::abs(sup) > zero) {
                return {};
            }
        }
        if (chained) {
            if (std::abs(A(r, r) - A(r + 1, r + 1)) > zero) return {};
            continue;
        }
        blocks.push_back({start, r - start + 1, A(start, start)});
        start = r + 1;
    }
    return blocks;
}

namespace {

bool is_symmetric(const Matrix& M)
{
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol::symmetric * scale;
}

double min_eigenvalue(const Matrix& M)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

std::string shape(const Matrix& M)
{
    return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

ValidationCheck check_psd(const std::string& name, const Matrix& M)
{
    if (!is_symmetric(M)) return {name, false, "not symmetric"};
    const double floor = -tol::psd * std::max(std::abs(M.trace()), 1e-300);
    const double lo = min_eigenvalue(M);
    if (lo < floor) {
        std::ostringstream os;
        os << "not positive semidefinite (min eigenvalue " << lo << ")";
        return {name, false, os.str()};
    }
    return {name, true, "symmetric positive semidefinite"};
}

}  // namespace

ValidationReport validate_model(const SystemModel& model)
{
    ValidationReport report;
    const Index n = model.states();
    const Index m = model.sensors();
    const Index q = model.inputs();

    bool dims = n > 0 && m > 0 && model.A.cols() == n && model.C.cols() == n && model.Q.rows() == n &&
                model.Q.cols() == n && model.R.rows() == m && model.R.cols() == m && model.Sigma.rows() == n &&
                model.Sigma.cols() == n && model.B.rows() == n && model.K_lqr.rows() == q &&
                model.K_lqr.cols() == n;
    if (!model.sensor_labels.empty() && static_cast<Index>(model.sensor_labels.size()) != m) dims = false;
    if (model.state_basis.size() != 0 && (model.state_basis.rows() != n || model.state_basis.cols() != n)) dims = false;
    {
        std::ostringstream os;
        os << "A " << shape(model.A) << ", B " << shape(model.B) << ", C " << shape(model.C) << ", Q "
           << shape(model.Q) << ", R " << shape(model.R) << ", Sigma " << shape(model.Sigma) << ", K_lqr "
           << shape(model.K_lqr) << ", " << model.sensor_labels.size() << " labels";
        if (model.state_basis.size() != 0) os << ", state_basis " << shape(model.state_basis);
        report.checks.push_back({"dimensions", dims, os.str()});
    }
    if (!dims) return report;

    const bool finite = model.A.allFinite() && model.B.allFinite() && model.C.allFinite() && model.Q.allFinite() &&
                        model.R.allFinite() && model.Sigma.allFinite() && model.K_lqr.allFinite() &&
                        model.state_basis.allFinite();
    report.checks.push_back({"finite", finite, finite ? "all entries finite" : "NaN or Inf entry"});
    if (!finite) return report;

    const auto blocks = jordan_blocks(model.A);
    const bool jordan = !blocks.empty();
    report.checks.push_back({"jordan_form", jordan,
                             jordan ? std::to_string(blocks.size()) + " Jordan block(s)"
                                    : "A is not in real Jordan canonical form"});

    {
        const double det = model.A.determinant();
        const double norm = model.A.norm();
        const bool ok = std::abs(det) > tol::singular * norm;
        std::ostringstream os;
        os << "det(A) = " << det;
        report.checks.push_back({"nonsingular", ok, ok ? os.str() : os.str() + " (A is singular)"});
    }

    if (jordan) {
        const double zero = tol::singular * std::max(1.0, model.A.cwiseAbs().maxCoeff());
        bool distinct = true;
        std::ostringstream os;
        for (size_t a = 0; a < blocks.size() && distinct; ++a) {
            for (size_t b = a + 1; b < blocks.size(); ++b) {
                if (std::abs(blocks[a].eigenvalue - blocks[b].eigenvalue) <= zero) {
                    distinct = false;
                    os << "eigenvalue " << blocks[a].eigenvalue << " appears in blocks " << a + 1 << " and " << b + 1
                       << " (geometric multiplicity > 1)";
                    break;
                }
            }
        }
        report.checks.push_back(
            {"geometric_multiplicity", distinct, distinct ? "one Jordan block per eigenvalue" : os.str()});
    }

    report.checks.push_back(check_psd("Q", model.Q));
    report.checks.push_back(check_psd("Sigma", model.Sigma));
    {
        ValidationCheck r{"R", true, "symmetric positive definite"};
        if (!is_symmetric(model.R)) {
            r = {"R", false, "not symmetric"};
        } else if (const double lo = min_eigenvalue(model.R); lo < tol::pd) {
            std::ostringstream os;
            os << "not positive definite (min eigenvalue " << lo << ")";
            r = {"R", false, os.str()};
        }
        report.checks.push_back(r);
    }
    if (model.state_basis.size() != 0) {
        const Eigen::JacobiSVD<Matrix> svd(model.state_basis);
        const Vector& sv = svd.singularValues();
        const bool invertible = sv(sv.size() - 1) > tol::singular * sv(0);
        report.checks.push_back({"state_basis", invertible, invertible ? "invertible" : "state_basis is singular"});
    }
    return report;
}

void require_valid(const SystemModel& model)
{
    const auto report = validate_model(model);
    if (!report.ok()) throw ValidationError(report.first_failure());
}

Matrix observability_matrix(const Matrix& A, const Matrix& C, Index block_rows)
{
    const Index p = C.rows();
    Matrix O(p * block_rows, A.cols());
    Matrix row = C;
    for (Index k = 0; k < block_rows; ++k) {
        O.middleRows(k * p, p) = row;
        row = row * A;
    }
    return O;
}

bool ObservabilityStructure::observes(Index sensor, Index state) const
{
    const auto& s = support_sets[static_cast<size_t>(state)];
    return std::find(s.begin(), s.end(), sensor) != s.end();
}

Index ObservabilityStructure::observed_count(Index sensor) const
{
    Index count = 0;
    for (Index j = 0; j < static_cast<Index>(support_sets.size()); ++j)
        if (observes(sensor, j)) ++count;
    return count;
}

ObservabilityStructure observability_structure(const SystemModel& model, double rel_tol)
{
    const Index n = model.states();
    const Index m = model.sensors();
    ObservabilityStructure s;
    s.support_sets.resize(static_cast<size_t>(n));
    for (Index i = 0; i < m; ++i) {
        Matrix O = observability_matrix(model.A, model.C.row(i), n);
        const double threshold = rel_tol * O.norm();
        for (Index j = 0; j < n; ++j) {
            const double col = O.col(j).norm();
            if (col > threshold && col > 0.0) s.support_sets[static_cast<size_t>(j)].push_back(i);
        }
        s.O.push_back(std::move(O));
    }
    size_t smallest = static_cast<size_t>(m);
    for (const auto& set : s.support_sets) smallest = std::min(smallest, set.size());
    s.sparse_index = static_cast<int>(smallest) - 1;
    return s;
}

ResilienceCertificate certify_resilience(const ObservabilityStructure& structure, int p)
{
    if (p < 0) throw std::invalid_argument("p must be nonnegative");
    const int margin = structure.sparse_index - 2 * p;
    return {structure.sparse_index >= 0 && margin >= 0, margin};
}

namespace {

bool stacked_observable(const SystemModel& model, const std::vector<Index>& keep)
{
    const Index n = model.states();
    if (keep.empty()) return false;
    Matrix C(static_cast<Index>(keep.size()), n);
    for (size_t r = 0; r < keep.size(); ++r) C.row(static_cast<Index>(r)) = model.C.row(keep[r]);
    const Matrix O = observability_matrix(model.A, C, n);
    Eigen::JacobiSVD<Matrix> svd(O);
    const auto& sv = svd.singularValues();
    if (sv.size() < n || sv(0) == 0.0) return false;
    return sv(n - 1) > tol::observe * sv(0);
}

// Visits every k-subset of {0..m-1} in lexicographic order; stops early when fn returns false.
template <typename Fn>
bool for_each_subset(Index m, Index k, Fn&& fn)
{
    std::vector<Index> idx(static_cast<size_t>(k));
    for (Index i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
    while (true) {
        if (!fn(idx)) return false;
        Index pos = k - 1;
        while (pos >= 0 && idx[static_cast<size_t>(pos)] == m - k + pos) --pos;
        if (pos < 0) return true;
        ++idx[static_cast<size_t>(pos)];
        for (Index j = pos + 1; j < k; ++j) idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
    }
}

}  // namespace

int brute_force_sparse_index(const SystemModel& model)
{
    const Index m = model.sensors();
    if (m > brute_force_max_sensors) {
        throw std::invalid_argument("brute-force sparse observability refuses m = " + std::to_string(m) +
                                    " sensors (limit " + std::to_string(brute_force_max_sensors) + ")");
    }
    int s = -1;
    for (Index removed = 0; removed < m; ++removed) {
        const bool all_observable = for_each_subset(m, removed, [&](const std::vector<Index>& drop) {
            std::vector<Index> keep;
            for (Index i = 0; i < m; ++i)
                if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
            return stacked_observable(model, keep);
        });
        if (!all_observable) break;
        s = static_cast<int>(removed);
    }
    return s;
}

}  // namespace secest
