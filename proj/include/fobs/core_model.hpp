#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Thrown when a map iterate leaves the representable range. Carries the
/// index of the offending iterate.
class OverflowError : public std::runtime_error {
  public:
    OverflowError(const std::string& what, long step)
        : std::runtime_error(what + " (iterate " + std::to_string(step) + ")"), step_(step) {}

    long step() const { return step_; }

  private:
    long step_;
};

/// Axis-aligned region of state space, one [lo, hi] interval per coordinate.
struct Box {
    Vector lo;
    Vector hi;

    Box() = default;
    Box(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size())
            throw std::invalid_argument("Box: bound dimensions differ");
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            if (!(lo[i] < hi[i]))
                throw std::invalid_argument("Box: lower bound must be below upper bound in every coordinate");
        }
    }

    /// Cube [-r, r]^n.
    static Box centered(int n, double r) {
        return Box(Vector::Constant(n, -r), Vector::Constant(n, r));
    }

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const Vector& x) const {
        if (x.size() != lo.size()) return false;
        return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    }

    Vector center() const { return 0.5 * (lo + hi); }
};

/// Autonomous discrete-time plant x(k+1) = F x(k) with measured outputs
/// y = H x and a scalar target functional z = q x.
struct LinearSystem {
    Matrix F;     // n x n state transition
    Matrix H;     // p x n output map
    RowVector q;  // 1 x n target functional

    LinearSystem(Matrix F_, Matrix H_, RowVector q_)
        : F(std::move(F_)), H(std::move(H_)), q(std::move(q_)) {
        const auto n = F.rows();
        if (n < 1 || F.cols() != n)
            throw std::invalid_argument("LinearSystem: F must be square and non-empty");
        if (H.rows() < 1 || H.rows() > n || H.cols() != n)
            throw std::invalid_argument("LinearSystem: H must be p x n with 1 <= p <= n");
        if (q.size() != n)
            throw std::invalid_argument("LinearSystem: q must be 1 x n");
        if (!F.allFinite() || !H.allFinite() || !q.allFinite())
            throw std::invalid_argument("LinearSystem: entries must be finite");
    }

    int state_dim() const { return static_cast<int>(F.rows()); }
    int output_dim() const { return static_cast<int>(H.rows()); }

    Vector step(const Vector& x) const { return F * x; }
    Vector output(const Vector& x) const { return H * x; }
    double target(const Vector& x) const { return q.dot(x); }
};

/// Plant with callable maps. The design routines only evaluate the maps
/// inside `domain`, where they are expected to stay finite.
struct NonlinearSystem {
    std::function<Vector(const Vector&)> f;
    std::function<Vector(const Vector&)> h;
    std::function<double(const Vector&)> q;
    int n = 0;
    int p = 0;
    Box domain;

    NonlinearSystem() = default;
    NonlinearSystem(std::function<Vector(const Vector&)> f_, std::function<Vector(const Vector&)> h_,
                    std::function<double(const Vector&)> q_, int n_, int p_, Box domain_)
        : f(std::move(f_)), h(std::move(h_)), q(std::move(q_)), n(n_), p(p_), domain(std::move(domain_)) {
        if (n < 1 || p < 1 || p > n)
            throw std::invalid_argument("NonlinearSystem: need 1 <= p <= n");
        if (domain.dim() != n)
            throw std::invalid_argument("NonlinearSystem: domain dimension must equal n");
        // probe the box center so dimension mistakes surface at construction
        const Vector c = domain.center();
        if (f(c).size() != n)
            throw std::invalid_argument("NonlinearSystem: f must map R^n -> R^n");
        if (h(c).size() != p)
            throw std::invalid_argument("NonlinearSystem: h must map R^n -> R^p");
    }

    int state_dim() const { return n; }
    int output_dim() const { return p; }

    Vector step(const Vector& x) const { return f(x); }
    Vector output(const Vector& x) const { return h(x); }
    double target(const Vector& x) const { return q(x); }
};

/// View a linear system through the callable interface so nonlinear
/// routines can run on it unchanged.
inline NonlinearSystem as_nonlinear(const LinearSystem& sys, Box domain) {
    return NonlinearSystem(
        [F = sys.F](const Vector& x) -> Vector { return F * x; },
        [H = sys.H](const Vector& x) -> Vector { return H * x; },
        [q = sys.q](const Vector& x) -> double { return q.dot(x); },
        sys.state_dim(), sys.output_dim(), std::move(domain));
}

inline NonlinearSystem as_nonlinear(const LinearSystem& sys) {
    return as_nonlinear(sys, Box::centered(sys.state_dim(), 1.0));
}

/// F^j(x), with F^0(x) = x.
template <class System>
Vector iterate_map(const System& sys, long j, Vector x) {
    if (j < 0) throw std::invalid_argument("iterate_map: j must be non-negative");
    if (x.size() != sys.state_dim())
        throw std::invalid_argument("iterate_map: state dimension mismatch");
    for (long i = 1; i <= j; ++i) {
        x = sys.step(x);
        if (!x.allFinite())
            throw OverflowError("iterate_map: non-finite state", i);
    }
    return x;
}

/// q(F^i(x)) and H(F^i(x)) for i = 0..v, sharing one pass over the iterates.
struct FunctionalIterates {
    std::vector<double> q;   // v+1 scalars
    std::vector<Vector> h;   // v+1 p-vectors
};

template <class System>
FunctionalIterates functional_iterates(const System& sys, int v, const Vector& x) {
    if (v < 1) throw std::invalid_argument("functional_iterates: v must be positive");
    FunctionalIterates out;
    out.q.reserve(v + 1);
    out.h.reserve(v + 1);
    Vector xi = x;
    for (int i = 0; i <= v; ++i) {
        if (i > 0) {
            xi = sys.step(xi);
            if (!xi.allFinite())
                throw OverflowError("functional_iterates: non-finite state", i);
        }
        out.q.push_back(sys.target(xi));
        out.h.push_back(sys.output(xi));
    }
    return out;
}

/// Numerical rank: singular values above max(dims) * sigma_max * 1e-10.
inline int numeric_rank(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    const double thresh = static_cast<double>(std::max(m.rows(), m.cols())) * sv(0) * 1e-10;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > thresh) ++rank;
    return rank;
}

/// Smallest v_o such that the rows {H_j F^i : i = 0..v_o-1} reach rank n,
/// or nullopt when rank n is never reached by i = n-1.
inline std::optional<int> observability_index(const LinearSystem& sys) {
    const int n = sys.state_dim();
    const int p = sys.output_dim();
    Matrix stacked(n * p, n);
    Matrix block = sys.H;
    for (int i = 0; i < n; ++i) {
        stacked.middleRows(i * p, p) = block;
        if (numeric_rank(stacked.topRows((i + 1) * p)) == n)
            return i + 1;
        block = block * sys.F;
    }
    return std::nullopt;
}

}  // namespace fobs
