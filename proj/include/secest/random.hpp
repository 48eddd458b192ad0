#pragma once

#include <cstdint>
#include <random>

#include "secest/types.hpp"

namespace secest {

using Engine = std::mt19937_64;

/// Independent streams per (seed, trial, stream) so that trials are reproducible regardless
/// of which worker runs them.
inline Engine make_engine(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Engine(seq);
}

/// L with L L' = S for a symmetric PSD S (semidefinite allowed).
inline Matrix covariance_factor(const Matrix& S)
{
    if (S.size() == 0) return S;
    Eigen::LDLT<Matrix> ldlt(0.5 * (S + S.transpose()));
    const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Matrix L = ldlt.matrixL();
    L = ldlt.transpositionsP().transpose() * L;
    return L * d.asDiagonal();
}

/// Draws L * N(0, I).
inline Vector sample_gaussian(Engine& rng, const Matrix& L)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(L.cols());
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return L * z;
}

}  // namespace secest
