#pragma once

#include "fobs/core_model.hpp"
#include "fobs/linear_design.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fobs {

/// Plant and observer run in series. All lists have one entry per step
/// k = 0..N unless the run overflowed, in which case they stop at the
/// marked step.
struct Trajectory {
    std::vector<Vector> states;   // x(k)
    std::vector<Vector> outputs;  // y(k)
    std::vector<double> true_z;   // q(x(k))
    std::vector<Vector> xi_hat;   // observer state
    std::vector<double> z_hat;    // observer estimate
    long horizon = 0;             // requested N
    std::optional<long> truncated_at;

    long steps() const { return static_cast<long>(states.size()) - 1; }
};

/// Cascade x(k+1) = F(x(k)), xi(k+1) = A xi(k) + B y(k), zhat = C xi + D y.
template <class System>
Trajectory simulate(const System& sys, const ObserverRealization& obs, const Vector& x0,
                    const Vector& xi0, long n_steps) {
    if (n_steps < 1) throw std::invalid_argument("simulate: horizon must be at least 1");
    if (x0.size() != sys.state_dim()) throw std::invalid_argument("simulate: x0 dimension mismatch");
    if (xi0.size() != obs.order()) throw std::invalid_argument("simulate: xi0 dimension mismatch");
    if (!x0.allFinite()) throw std::invalid_argument("simulate: x0 must be finite");

    Trajectory traj;
    traj.horizon = n_steps;
    traj.states.reserve(n_steps + 1);

    Vector x = x0;
    Vector xi = xi0;
    for (long k = 0; k <= n_steps; ++k) {
        const Vector y = sys.output(x);
        const double zh = obs.C.dot(xi) + obs.D.dot(y);
        traj.states.push_back(x);
        traj.outputs.push_back(y);
        traj.true_z.push_back(sys.target(x));
        traj.xi_hat.push_back(xi);
        traj.z_hat.push_back(zh);
        if (k == n_steps) break;
        Vector x_next = sys.step(x);
        Vector xi_next = obs.A * xi + obs.B * y;
        if (!x_next.allFinite() || !xi_next.allFinite()) {
            traj.truncated_at = k + 1;
            break;
        }
        x = std::move(x_next);
        xi = std::move(xi_next);
    }
    return traj;
}

/// Observed estimation error zhat(k) - z(k) against the closed form
/// C A^k (xi(0) - T(x(0))). The analytic sequence is advanced by repeated
/// multiplication with the running error vector.
struct ErrorAnalysis {
    std::vector<double> observed;
    std::vector<double> analytic;
    double max_dev = 0.0;
};

template <class TransformFn>
ErrorAnalysis error_analysis(const Trajectory& traj, const ObserverRealization& obs,
                             TransformFn&& transform) {
    ErrorAnalysis out;
    const std::size_t len = traj.z_hat.size();
    out.observed.reserve(len);
    out.analytic.reserve(len);
    Vector e = traj.xi_hat.front() - transform(traj.states.front());
    for (std::size_t k = 0; k < len; ++k) {
        out.observed.push_back(traj.z_hat[k] - traj.true_z[k]);
        out.analytic.push_back(obs.C.dot(e));
        out.max_dev = std::max(out.max_dev, std::abs(out.observed[k] - out.analytic[k]));
        e = obs.A * e;
    }
    return out;
}

inline ErrorAnalysis error_analysis(const Trajectory& traj, const ObserverRealization& obs,
                                    const Matrix& t) {
    return error_analysis(traj, obs, [&t](const Vector& x) -> Vector { return t * x; });
}

namespace detail {

inline void append_float(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += ',';
    line += buf;
}

}  // namespace detail

/// CSV columns: k, x_1..x_n, y_1..y_p, z, z_hat, err, analytic_err.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const ErrorAnalysis& errors) {
    const auto n = traj.states.front().size();
    const auto p = traj.outputs.front().size();
    std::string header = "k";
    for (Eigen::Index i = 1; i <= n; ++i) header += ",x_" + std::to_string(i);
    for (Eigen::Index i = 1; i <= p; ++i) header += ",y_" + std::to_string(i);
    header += ",z,z_hat,err,analytic_err";
    os << header << '\n';

    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        std::string line = std::to_string(k);
        for (Eigen::Index i = 0; i < n; ++i) detail::append_float(line, traj.states[k][i]);
        for (Eigen::Index i = 0; i < p; ++i) detail::append_float(line, traj.outputs[k][i]);
        detail::append_float(line, traj.true_z[k]);
        detail::append_float(line, traj.z_hat[k]);
        detail::append_float(line, errors.observed[k]);
        detail::append_float(line, errors.analytic[k]);
        os << line << '\n';
    }
}

}  // namespace fobs
