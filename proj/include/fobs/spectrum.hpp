#pragma once

#include "fobs/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace fobs {

/// Thrown when a requested eigenvalue set contains a complex root without
/// its conjugate.
class ConjugatePairError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Monic real polynomial lambda^v + alpha_1 lambda^{v-1} + ... + alpha_v,
/// stored as the coefficient vector (alpha_1, ..., alpha_v).
struct CharPoly {
    std::vector<double> alpha;

    CharPoly() = default;
    explicit CharPoly(std::vector<double> alpha_) : alpha(std::move(alpha_)) {
        if (alpha.empty())
            throw std::invalid_argument("CharPoly: order must be at least 1");
        for (double a : alpha)
            if (!std::isfinite(a))
                throw std::invalid_argument("CharPoly: coefficients must be finite");
    }

    int order() const { return static_cast<int>(alpha.size()); }
};

/// Expand prod (lambda - r_i) into a CharPoly. Non-real roots must occur in
/// conjugate pairs (tolerance 1e-12 on the pairing).
inline CharPoly poly_from_eigenvalues(const std::vector<std::complex<double>>& roots) {
    if (roots.empty())
        throw std::invalid_argument("poly_from_eigenvalues: need at least one root");
    constexpr double pair_tol = 1e-12;

    std::vector<bool> matched(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (matched[i] || std::abs(roots[i].imag()) <= pair_tol) continue;
        bool found = false;
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (matched[j]) continue;
            if (std::abs(roots[j].real() - roots[i].real()) <= pair_tol &&
                std::abs(roots[j].imag() + roots[i].imag()) <= pair_tol) {
                matched[i] = matched[j] = true;
                found = true;
                break;
            }
        }
        if (!found)
            throw ConjugatePairError("poly_from_eigenvalues: complex root without conjugate partner");
    }

    // incremental convolution by (lambda - r)
    std::vector<std::complex<double>> coef{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(coef.size() + 1, 0.0);
        for (std::size_t i = 0; i < coef.size(); ++i) {
            next[i] += coef[i];
            next[i + 1] -= coef[i] * r;
        }
        coef = std::move(next);
    }

    std::vector<double> alpha(roots.size());
    for (std::size_t i = 1; i < coef.size(); ++i)
        alpha[i - 1] = coef[i].real();  // imaginary residue below pair_tol is dropped
    return CharPoly(std::move(alpha));
}

/// (A, C) pair in observer canonical form: subdiagonal ones, last column
/// (-alpha_v, ..., -alpha_1)^T, C = [0 ... 0 1].
struct CompanionForm {
    Matrix A;
    RowVector C;
};

inline CompanionForm companion_realization(const CharPoly& cp) {
    const int v = cp.order();
    CompanionForm out;
    out.A = Matrix::Zero(v, v);
    for (int i = 1; i < v; ++i)
        out.A(i, i - 1) = 1.0;
    for (int i = 0; i < v; ++i)
        out.A(i, v - 1) = -cp.alpha[v - 1 - i];
    out.C = RowVector::Zero(v);
    out.C(v - 1) = 1.0;
    return out;
}

/// All moduli strictly inside the unit disc. Unstable sets are legal design
/// inputs; callers surface this as a warning.
inline bool schur_stable(const std::vector<std::complex<double>>& roots) {
    return std::all_of(roots.begin(), roots.end(),
                       [](const std::complex<double>& r) { return std::abs(r) < 1.0; });
}

inline bool schur_stable(const Matrix& a) {
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    const auto& ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) >= 1.0) return false;
    return true;
}

}  // namespace fobs
