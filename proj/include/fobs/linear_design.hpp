#pragma once

#include "fobs/core_model.hpp"
#include "fobs/spectrum.hpp"

#include <complex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fobs {

/// Row vectors beta_0, ..., beta_v, each 1 x p. Row i of `rows` is beta_i.
struct BetaCoefficients {
    Matrix rows;  // (v+1) x p

    BetaCoefficients() = default;
    explicit BetaCoefficients(Matrix rows_) : rows(std::move(rows_)) {
        if (rows.rows() < 2 || rows.cols() < 1)
            throw std::invalid_argument("BetaCoefficients: need v+1 >= 2 rows of width p >= 1");
        if (!rows.allFinite())
            throw std::invalid_argument("BetaCoefficients: entries must be finite");
    }

    int order() const { return static_cast<int>(rows.rows()) - 1; }
    int output_dim() const { return static_cast<int>(rows.cols()); }
    RowVector row(int i) const { return rows.row(i); }
};

/// Observer xi(k+1) = A xi(k) + B y(k), zhat(k) = C xi(k) + D y(k).
struct ObserverRealization {
    Matrix A;     // v x v
    Matrix B;     // v x p
    RowVector C;  // 1 x v
    RowVector D;  // 1 x p

    int order() const { return static_cast<int>(A.rows()); }
    int output_dim() const { return static_cast<int>(B.cols()); }
};

struct SolveOptions {
    /// Relative infinity-norm residual below which the target row counts as
    /// inside the span.
    double feas_tol = 1e-9;
    /// Restrict the span to H F^0 .. H F^{v-1}, forcing beta_0 = 0 (D = 0).
    bool strict_span = false;
};

/// Rows H_j F^i for i = 0..v, i-major then j: blocks [H; HF; ...; HF^v].
inline Matrix condition_matrix(const LinearSystem& sys, int v) {
    if (v < 1) throw std::invalid_argument("condition_matrix: v must be positive");
    const int p = sys.output_dim();
    Matrix m((v + 1) * p, sys.state_dim());
    Matrix block = sys.H;
    for (int i = 0; i <= v; ++i) {
        m.middleRows(i * p, p) = block;
        block = block * sys.F;
    }
    return m;
}

/// Target row q F^v + alpha_1 q F^{v-1} + ... + alpha_v q.
inline RowVector target_row(const LinearSystem& sys, const CharPoly& cp) {
    const int v = cp.order();
    std::vector<RowVector> qi(v + 1);
    qi[0] = sys.q;
    for (int i = 1; i <= v; ++i) qi[i] = qi[i - 1] * sys.F;
    RowVector g = qi[v];
    for (int i = 1; i <= v; ++i) g += cp.alpha[i - 1] * qi[v - i];
    return g;
}

namespace detail {

/// Minimum-norm least-squares solution of coeffs^T * basis = rhs, where the
/// unknown weights one row of `basis` each. Returns weights and the
/// infinity-norm residual.
inline std::pair<Vector, double> min_norm_row_combination(const Matrix& basis, const RowVector& rhs) {
    Eigen::JacobiSVD<Matrix> svd(basis.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(static_cast<double>(std::max(basis.rows(), basis.cols())) * 1e-10);
    Vector w = svd.solve(rhs.transpose());
    const double residual = (rhs.transpose() - basis.transpose() * w).cwiseAbs().maxCoeff();
    return {std::move(w), residual};
}

}  // namespace detail

/// Result of the feasibility solve: beta when the target row lies in the
/// span, otherwise the least-squares residual that blocks it.
struct BetaSolveResult {
    std::optional<BetaCoefficients> beta;
    double residual = 0.0;     // ||g - beta . rows||_inf
    double target_norm = 0.0;  // ||g||_inf

    bool feasible() const { return beta.has_value(); }
};

/// Decide whether q F^v + sum alpha_i q F^{v-i} is a real linear combination
/// of the iterated output rows, and return the minimum-norm beta when it is.
inline BetaSolveResult solve_beta(const LinearSystem& sys, const CharPoly& cp,
                                  const SolveOptions& opts = {}) {
    const int v = cp.order();
    const int p = sys.output_dim();
    const RowVector g = target_row(sys, cp);

    // block i of the basis is HF^i, matched by beta_{v-i}
    const Matrix m_full = condition_matrix(sys, v);
    const Matrix basis = opts.strict_span ? Matrix(m_full.topRows(v * p)) : m_full;

    auto [w, residual] = detail::min_norm_row_combination(basis, g);

    BetaSolveResult out;
    out.residual = residual;
    out.target_norm = g.cwiseAbs().maxCoeff();
    if (residual <= opts.feas_tol * std::max(1.0, out.target_norm)) {
        Matrix rows = Matrix::Zero(v + 1, p);
        const int blocks = opts.strict_span ? v : v + 1;
        for (int i = 0; i < blocks; ++i)
            rows.row(v - i) = w.segment(i * p, p).transpose();
        out.beta = BetaCoefficients(std::move(rows));
    }
    return out;
}

/// Canonical realization from (alpha, beta): A, C in observer canonical
/// form, B row r = beta_{v-r+1} - alpha_{v-r+1} beta_0 (r = 1..v), D = beta_0.
inline ObserverRealization realize_observer(const CharPoly& cp, const BetaCoefficients& beta) {
    const int v = cp.order();
    if (beta.order() != v)
        throw std::invalid_argument("realize_observer: beta order must match the polynomial order");
    auto [a, c] = companion_realization(cp);
    ObserverRealization obs;
    obs.A = std::move(a);
    obs.C = std::move(c);
    obs.D = beta.row(0);
    obs.B = Matrix(v, beta.output_dim());
    for (int r = 1; r <= v; ++r)
        obs.B.row(r - 1) = beta.row(v - r + 1) - cp.alpha[v - r] * beta.row(0);
    return obs;
}

/// Transformation rows, bottom row T_v = -beta_0 H + q, each row above adding
/// one more composition with F and one more (beta, alpha) term.
inline Matrix transformation_matrix(const LinearSystem& sys, const CharPoly& cp,
                                    const BetaCoefficients& beta) {
    const int v = cp.order();
    if (beta.order() != v)
        throw std::invalid_argument("transformation_matrix: beta order must match the polynomial order");
    const int n = sys.state_dim();

    std::vector<Matrix> hi(v);     // H F^i
    std::vector<RowVector> qi(v);  // q F^i
    hi[0] = sys.H;
    qi[0] = sys.q;
    for (int i = 1; i < v; ++i) {
        hi[i] = hi[i - 1] * sys.F;
        qi[i] = qi[i - 1] * sys.F;
    }

    Matrix t(v, n);
    for (int k = 0; k < v; ++k) {
        // row T_{v-k}: q F^k + sum_{i=1..k} alpha_i q F^{k-i}
        //            - sum_{i=0..k} beta_i H F^{k-i}
        RowVector row = qi[k];
        for (int i = 1; i <= k; ++i) row += cp.alpha[i - 1] * qi[k - i];
        for (int i = 0; i <= k; ++i) row -= beta.row(i) * hi[k - i];
        t.row(v - 1 - k) = row;
    }
    return t;
}

/// Residuals of the Luenberger design equations T F = A T + B H and
/// q = C T + D H.
struct LuenbergerResiduals {
    double res_dyn = 0.0;
    double res_out = 0.0;

    bool certified(double t_norm) const {
        const double tol = 1e-10 * std::max(1.0, t_norm);
        return res_dyn <= tol && res_out <= tol;
    }
};

inline LuenbergerResiduals verify_luenberger(const LinearSystem& sys, const ObserverRealization& obs,
                                             const Matrix& t) {
    if (t.rows() != obs.order() || t.cols() != sys.state_dim())
        throw std::invalid_argument("verify_luenberger: T must be v x n");
    LuenbergerResiduals out;
    const Matrix dyn = t * sys.F - obs.A * t - obs.B * sys.H;
    const RowVector outp = sys.q - obs.C * t - obs.D * sys.H;
    out.res_dyn = dyn.cwiseAbs().maxCoeff();
    out.res_out = outp.cwiseAbs().maxCoeff();
    return out;
}

/// Everything a successful linear design produces.
struct LinearDesign {
    CharPoly poly;
    BetaCoefficients beta;
    ObserverRealization observer;
    Matrix t;  // v x n
    double feasibility_residual = 0.0;
    LuenbergerResiduals residuals;
};

/// solve_beta -> realize_observer -> transformation_matrix -> verify, as one
/// call. Returns nullopt (with residual via solve_beta) when infeasible.
inline std::optional<LinearDesign> design_linear(const LinearSystem& sys, const CharPoly& cp,
                                                 const SolveOptions& opts = {}) {
    BetaSolveResult solved = solve_beta(sys, cp, opts);
    if (!solved.feasible()) return std::nullopt;
    LinearDesign d;
    d.poly = cp;
    d.beta = *solved.beta;
    d.observer = realize_observer(cp, d.beta);
    d.t = transformation_matrix(sys, cp, d.beta);
    d.feasibility_residual = solved.residual;
    d.residuals = verify_luenberger(sys, d.observer, d.t);
    return d;
}

/// Outcome of scanning orders v = 1..v_max with per-order eigenvalue lists.
struct OrderSearchResult {
    std::optional<int> order;           // smallest feasible order
    std::optional<LinearDesign> design; // design at that order
    std::vector<double> residuals;      // infeasibility residual per tried order
    int max_order_tried = 0;
};

/// Feasibility depends on the prescribed eigenvalues, so the caller supplies
/// one candidate eigenvalue list per order rather than having them invented
/// here. For observable systems the candidate orders must not exceed v_o - 1.
inline OrderSearchResult minimal_order_search(
    const LinearSystem& sys, const std::vector<std::vector<std::complex<double>>>& eigen_sets,
    const SolveOptions& opts = {}) {
    if (eigen_sets.empty())
        throw std::invalid_argument("minimal_order_search: need at least one eigenvalue set");
    for (std::size_t i = 0; i < eigen_sets.size(); ++i) {
        if (eigen_sets[i].size() != i + 1)
            throw std::invalid_argument("minimal_order_search: eigen_sets[k] must hold k+1 eigenvalues");
    }
    const auto vo = observability_index(sys);
    if (vo && static_cast<int>(eigen_sets.size()) > *vo - 1)
        throw std::invalid_argument("minimal_order_search: orders beyond v_o - 1 requested");

    OrderSearchResult out;
    out.max_order_tried = static_cast<int>(eigen_sets.size());
    for (std::size_t i = 0; i < eigen_sets.size(); ++i) {
        const CharPoly cp = poly_from_eigenvalues(eigen_sets[i]);
        BetaSolveResult solved = solve_beta(sys, cp, opts);
        out.residuals.push_back(solved.residual);
        if (solved.feasible()) {
            out.order = static_cast<int>(i + 1);
            out.design = design_linear(sys, cp, opts);
            return out;
        }
    }
    return out;
}

}  // namespace fobs
