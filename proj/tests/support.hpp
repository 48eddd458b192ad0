#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "secest/model.hpp"
#include "secest/model_io.hpp"

namespace secest::fixtures {

inline std::string pendulum_path() { return std::string(SECEST_DATA_DIR) + "/pendulum.json"; }

inline SystemModel pendulum() { return load_model(pendulum_path()); }

/// Random model with A in Jordan form (blocks of size <= 2, distinct nonzero eigenvalues),
/// a sparse C, PSD Q, diagonal PD R and Sigma = I. Always passes validate_model.
inline SystemModel random_model(std::mt19937_64& rng, Index n, Index m, double zero_prob = 0.5)
{
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> mag(0.3, 1.4);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution zero(zero_prob);

    SystemModel model;
    model.A = Matrix::Zero(n, n);
    std::vector<double> used;
    Index r = 0;
    while (r < n) {
        double lam = 0.0;
        do {
            lam = (coin(rng) ? 1.0 : -1.0) * mag(rng);
        } while (std::any_of(used.begin(), used.end(), [&](double u) { return std::abs(u - lam) < 0.05; }));
        used.push_back(lam);
        const Index size = (r + 1 < n && coin(rng)) ? 2 : 1;
        for (Index k = 0; k < size; ++k) model.A(r + k, r + k) = lam;
        if (size == 2) model.A(r, r + 1) = 1.0;
        r += size;
    }
    model.C = Matrix::Zero(m, n);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j)
            if (!zero(rng)) model.C(i, j) = unit(rng);
    Matrix L = Matrix::NullaryExpr(n, n, [&]() { return unit(rng); });
    model.Q = 0.1 * L * L.transpose() + 0.01 * Matrix::Identity(n, n);
    model.R = Matrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) model.R(i, i) = 0.05 + 0.5 * std::abs(unit(rng));
    model.Sigma = Matrix::Identity(n, n);
    model.B = Matrix(n, 0);
    model.K_lqr = Matrix(0, n);
    return model;
}

/// Scalar system with the golden-ratio Riccati solution: A = C = Q = R = 1 gives P_plus = phi.
inline SystemModel scalar_model()
{
    SystemModel model;
    model.A = Matrix::Ones(1, 1);
    model.C = Matrix::Ones(1, 1);
    model.Q = Matrix::Ones(1, 1);
    model.R = Matrix::Ones(1, 1);
    model.Sigma = Matrix::Ones(1, 1);
    model.B = Matrix(1, 0);
    model.K_lqr = Matrix(0, 1);
    return model;
}

}  // namespace secest::fixtures
