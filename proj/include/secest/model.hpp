#pragma once

#include <string>
#include <vector>

#include "secest/types.hpp"

namespace secest {

/// Plant description x(k+1) = A x(k) + B u(k) + w(k), y(k) = C x(k) + v(k) + a(k),
/// with w ~ N(0, Q), v ~ N(0, R), x(0) ~ N(0, Sigma) and state feedback u(k) = -K_lqr x(k).
///
/// A is expected in real Jordan canonical form with one block per eigenvalue. B and K_lqr
/// are optional in the model file; when absent B has zero columns and the input path vanishes.
///
/// state_basis (optional, n x n, invertible) maps model coordinates to the coordinates in
/// which estimation errors are reported: an error e is measured as ||state_basis * e||.
/// Empty means the identity.
struct SystemModel {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix Q;
    Matrix R;
    Matrix Sigma;
    Matrix K_lqr;
    std::vector<std::string> sensor_labels;
    Matrix state_basis;

    Index states() const { return A.rows(); }
    Index sensors() const { return C.rows(); }
    Index inputs() const { return B.cols(); }

    /// Label for sensor i (0-based); falls back to "sensor <i+1>".
    std::string sensor_label(Index i) const;

    /// state_basis * e, or e when no basis is set.
    Vector report_coordinates(const Vector& e) const;
};

struct ValidationCheck {
    std::string name;
    bool passed;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const;
    /// First failing check, formatted as "name: message". Empty when ok().
    std::string first_failure() const;
};

/// One Jordan block of A: rows/cols [start, start + size) with eigenvalue on the diagonal.
struct JordanBlock {
    Index start;
    Index size;
    double eigenvalue;
};

/// Splits a real upper-bidiagonal matrix into Jordan blocks. Returns an empty vector when A is
/// not of that shape (nonzero entries off the diagonal/superdiagonal, superdiagonal entries
/// other than 0 or 1, or a non-constant diagonal inside a block).
std::vector<JordanBlock> jordan_blocks(const Matrix& A);

ValidationReport validate_model(const SystemModel& model);

/// Throws ValidationError carrying the first failing check.
void require_valid(const SystemModel& model);

/// Stacks C, CA, ..., CA^(block_rows-1).
Matrix observability_matrix(const Matrix& A, const Matrix& C, Index block_rows);

struct ObservabilityStructure {
    std::vector<Matrix> O;                       // per-sensor observability matrices, n x n
    std::vector<std::vector<Index>> support_sets;  // S_j: sensors observing state j (0-based)
    int sparse_index = -1;

    bool observable() const { return sparse_index >= 0; }
    /// True when sensor i observes state j.
    bool observes(Index sensor, Index state) const;
    /// Number of states sensor i observes (rank of its canonical indicator).
    Index observed_count(Index sensor) const;
};

ObservabilityStructure observability_structure(const SystemModel& model, double rel_tol = tol::observe);

struct ResilienceCertificate {
    bool secure;
    int margin;  // s - 2p
};

/// Secure against p attacked sensors iff the system is 2p-sparse observable.
ResilienceCertificate certify_resilience(const ObservabilityStructure& structure, int p);

inline constexpr Index brute_force_max_sensors = 12;

/// Sparse observability index by enumerating every removal set and testing the rank of the
/// remaining sensors' stacked observability matrix. Exponential in m; refuses m > 12.
int brute_force_sparse_index(const SystemModel& model);

}  // namespace secest
