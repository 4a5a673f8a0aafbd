#pragma once

#include "fobs/core_model.hpp"
#include "fobs/linear_design.hpp"
#include "fobs/spectrum.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fobs {

/// States drawn uniformly from a box. The same seed reproduces the same
/// points bit-for-bit on one platform.
struct SampleSet {
    std::vector<Vector> points;
    std::uint64_t seed = 0;

    int count() const { return static_cast<int>(points.size()); }
};

inline SampleSet sample_box(const Box& box, int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_box: count must be positive");
    SampleSet out;
    out.seed = seed;
    out.points.reserve(count);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = box.dim();
    for (int k = 0; k < count; ++k) {
        Vector x(n);
        for (int i = 0; i < n; ++i)
            x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
        out.points.push_back(std::move(x));
    }
    return out;
}

/// Value of the target combination q F^v(x) + sum alpha_i q F^{v-i}(x).
inline double condition_target(const NonlinearSystem& sys, const CharPoly& cp, const Vector& x) {
    const int v = cp.order();
    const FunctionalIterates it = functional_iterates(sys, v, x);
    double t = it.q[v];
    for (int i = 1; i <= v; ++i) t += cp.alpha[i - 1] * it.q[v - i];
    return t;
}

/// Pointwise residual of the existence condition: the target combination
/// minus sum beta_i H F^{v-i}(x). Identically zero on the region iff
/// (beta, alpha) admits the observer there.
inline double condition_residual(const NonlinearSystem& sys, const CharPoly& cp,
                                 const BetaCoefficients& beta, const Vector& x) {
    const int v = cp.order();
    if (beta.order() != v)
        throw std::invalid_argument("condition_residual: beta order must match the polynomial order");
    FunctionalIterates it;
    try {
        it = functional_iterates(sys, v, x);
    } catch (const OverflowError& e) {
        std::ostringstream os;
        os << e.what() << " at x = [" << x.transpose() << "]";
        throw OverflowError(os.str(), e.step());
    }
    double r = it.q[v];
    for (int i = 1; i <= v; ++i) r += cp.alpha[i - 1] * it.q[v - i];
    for (int i = 0; i <= v; ++i) r -= beta.row(i).dot(it.h[v - i]);
    return r;
}

struct FitOptions {
    /// A fit counts as a candidate solution only when the validation residual
    /// stays below validation_tol * scale.
    double validation_tol = 1e-6;
};

/// Least-squares fit of beta over sampled states, checked on a held-out
/// sample. The verdict is valid on the sampled box only; it cannot certify
/// the condition globally.
struct FitResult {
    BetaCoefficients beta;
    double train_residual = 0.0;       // max |residual| over train
    double validation_residual = 0.0;  // max |residual| over validate
    double scale = 1.0;                // max(1, max |target| over validate)
    int rank = 0;                      // numerical rank of the sample stack
    bool degenerate = false;           // rank < (v+1) p, beta is the min-norm pick
    bool candidate = false;            // validation residual under threshold
};

inline FitResult fit_beta(const NonlinearSystem& sys, const CharPoly& cp, const SampleSet& train,
                          const SampleSet& validate, const FitOptions& opts = {}) {
    const int v = cp.order();
    const int p = sys.output_dim();
    const int unknowns = (v + 1) * p;
    if (train.count() < unknowns)
        throw std::invalid_argument("fit_beta: need at least (v+1)*p training points");

    Matrix stack(train.count(), unknowns);
    Vector rhs(train.count());
    for (int r = 0; r < train.count(); ++r) {
        const FunctionalIterates it = functional_iterates(sys, v, train.points[r]);
        double t = it.q[v];
        for (int i = 1; i <= v; ++i) t += cp.alpha[i - 1] * it.q[v - i];
        rhs[r] = t;
        for (int i = 0; i <= v; ++i)
            stack.row(r).segment(i * p, p) = it.h[v - i].transpose();  // block i multiplies beta_i
    }

    Eigen::JacobiSVD<Matrix> svd(stack, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(static_cast<double>(std::max(stack.rows(), stack.cols())) * 1e-10);
    const Vector w = svd.solve(rhs);

    FitResult out;
    out.rank = static_cast<int>(svd.rank());
    out.degenerate = out.rank < unknowns;
    Matrix rows(v + 1, p);
    for (int i = 0; i <= v; ++i)
        rows.row(i) = w.segment(i * p, p).transpose();
    out.beta = BetaCoefficients(std::move(rows));

    for (const Vector& x : train.points)
        out.train_residual = std::max(out.train_residual, std::abs(condition_residual(sys, cp, out.beta, x)));
    double max_target = 0.0;
    for (const Vector& x : validate.points) {
        out.validation_residual =
            std::max(out.validation_residual, std::abs(condition_residual(sys, cp, out.beta, x)));
        max_target = std::max(max_target, std::abs(condition_target(sys, cp, x)));
    }
    out.scale = std::max(1.0, max_target);
    out.candidate = out.validation_residual <= opts.validation_tol * out.scale;
    return out;
}

/// The transformation map in composed-callable form: the bottom component is
/// -beta_0 H(x) + q(x), and every component above it stacks one more
/// composition with F and one more (beta, alpha) term.
class NonlinearTransformation {
  public:
    NonlinearTransformation() = default;
    NonlinearTransformation(NonlinearSystem sys, CharPoly cp, BetaCoefficients beta)
        : sys_(std::move(sys)), cp_(std::move(cp)), beta_(std::move(beta)) {
        if (beta_.order() != cp_.order())
            throw std::invalid_argument("NonlinearTransformation: beta order must match the polynomial order");
    }

    int order() const { return cp_.order(); }

    /// All components in one shared pass over the iterates of F.
    Vector operator()(const Vector& x) const {
        const int v = order();
        const FunctionalIterates it = functional_iterates(sys_, v, x);
        Vector t(v);
        for (int k = 0; k < v; ++k) {
            double row = it.q[k];
            for (int i = 1; i <= k; ++i) row += cp_.alpha[i - 1] * it.q[k - i];
            for (int i = 0; i <= k; ++i) row -= beta_.row(i).dot(it.h[k - i]);
            t[v - 1 - k] = row;
        }
        return t;
    }

    /// Component index 1..v as a standalone scalar map.
    std::function<double(const Vector&)> component(int index) const {
        if (index < 1 || index > order())
            throw std::invalid_argument("NonlinearTransformation: component index out of range");
        return [self = *this, index](const Vector& x) { return self(x)[index - 1]; };
    }

  private:
    NonlinearSystem sys_;
    CharPoly cp_;
    BetaCoefficients beta_;
};

inline NonlinearTransformation transformation_map(const NonlinearSystem& sys, const CharPoly& cp,
                                                  const BetaCoefficients& beta) {
    return NonlinearTransformation(sys, cp, beta);
}

/// Sampled maxima of the design-equation residuals T(F(x)) - A T(x) - B H(x)
/// and q(x) - C T(x) - D H(x).
struct DesignConditionResiduals {
    double max_res_dyn = 0.0;
    double max_res_out = 0.0;
};

inline DesignConditionResiduals verify_design_conditions(const NonlinearSystem& sys,
                                                         const ObserverRealization& obs,
                                                         const NonlinearTransformation& t,
                                                         const SampleSet& samples) {
    if (obs.order() != t.order())
        throw std::invalid_argument("verify_design_conditions: observer and transformation orders differ");
    DesignConditionResiduals out;
    for (const Vector& x : samples.points) {
        const Vector tx = t(x);
        const Vector tfx = t(sys.step(x));
        const Vector y = sys.output(x);
        const double dyn = (tfx - obs.A * tx - obs.B * y).cwiseAbs().maxCoeff();
        const double o = std::abs(sys.target(x) - obs.C.dot(tx) - obs.D.dot(y));
        out.max_res_dyn = std::max(out.max_res_dyn, dyn);
        out.max_res_out = std::max(out.max_res_out, o);
    }
    return out;
}

}  // namespace fobs
