#pragma once

#include "fobs/core_model.hpp"
#include "fobs/linear_design.hpp"
#include "fobs/nonlinear_design.hpp"
#include "fobs/observer_runtime.hpp"
#include "fobs/spectrum.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fobs::cstr {

/// Non-isothermal CSTR oxidizing N-pyridine with hydrogen peroxide.
/// State x = (C_A, C_B, theta, theta_j): reactant concentrations [mol/L],
/// reactor and jacket temperatures [K]. Measured outputs are the two
/// temperatures; the tracked functional is the total concentration
/// z = C_A + C_B.
///
/// Defaults use per-second flow and heat-transfer rates except `flow`,
/// which is kept at 0.1 so that dt * flow / volume = 0.1 and the design
/// eigenvalue lands at 0.9. The jacket flow must stay per-second: at
/// 1 L/min raw, dt * coolant_flow / jacket_volume = 16.7 > 2 and the
/// explicit-Euler jacket recursion diverges.
struct Params {
    double c_a_in = 2.0;                 // mol/L
    double c_b_in = 1.5;                 // mol/L
    double theta_in = 373.0;             // K
    double theta_j_in = 300.0;           // K
    double dt = 0.5;                     // sampling period, s
    double flow = 0.1;                   // feed rate, L per time unit
    double coolant_flow = 1.0 / 60.0;    // jacket rate, L/s
    double volume = 0.5;                 // L
    double jacket_volume = 3.0e-2;       // L
    double a1 = std::exp(8.08);          // L/(mol s)
    double a2 = std::exp(28.12);         // L/(mol s)
    double a3 = std::exp(25.12);         // L/mol
    double e1 = 3952.0;                  // K
    double e2 = 7927.0;                  // K
    double e3 = 12989.0;                 // K
    double reaction_enthalpy = -160000.0;  // J/mol, exothermic
    double rho = 1200.0;                 // g/L
    double rho_j = 1000.0;               // g/L
    double c_p = 3.4;                    // J/(g K)
    double c_pj = 3.0;                   // J/(g K)
    double heat_transfer = 0.942;        // U, W/(m^2 K)
    double area = 1.0;                   // S_A, m^2
    double rate_constant = 0.0021;       // Z, mol/L

    double heat_capacity() const { return rho * c_p; }                            // J/(L K)
    double jacket_heat_capacity() const { return rho_j * c_pj * jacket_volume; }  // J/K
    double exchange() const { return heat_transfer * area; }                      // U S_A
};

/// Steady state the design works around. Kept at its tabulated values;
/// fixed_point_defect reports how far it sits from an exact fixed point.
struct Reference {
    double c_a = 0.6684;       // mol/L
    double c_b = 0.1684;       // mol/L
    double theta = 410.2332;   // K
    double theta_j = 302.03384;  // K

    Vector vec() const {
        Vector x(4);
        x << c_a, c_b, theta, theta_j;
        return x;
    }

    double total_concentration() const { return c_a + c_b; }
};

/// Langmuir-Hinshelwood style rate law
///   R = A1 e^{-E1/th} A2 e^{-E2/th} C_A C_B Z / (1 + A2 e^{-E2/th} C_B)
///     + A3 e^{-E3/th} C_A C_B
inline double reaction_rate(double c_a, double c_b, double theta, const Params& prm = {}) {
    if (theta <= 0.0)
        throw std::domain_error("reaction_rate: temperature must be positive");
    const double k1 = prm.a1 * std::exp(-prm.e1 / theta);
    const double k2 = prm.a2 * std::exp(-prm.e2 / theta);
    const double k3 = prm.a3 * std::exp(-prm.e3 / theta);
    return (k1 * k2 * c_a * c_b * prm.rate_constant) / (1.0 + k2 * c_b) + k3 * c_a * c_b;
}

/// One explicit-Euler step of the reactor in absolute variables.
inline Vector step(const Vector& x, const Params& prm = {}) {
    if (x.size() != 4) throw std::invalid_argument("cstr::step: state must be 4-dimensional");
    const double c_a = x[0], c_b = x[1], theta = x[2], theta_j = x[3];
    if (theta <= 0.0 || theta_j <= 0.0)
        throw std::domain_error("cstr::step: temperatures must be positive");
    const double r = reaction_rate(c_a, c_b, theta, prm);
    const double fv = prm.flow / prm.volume;
    const double kappa = prm.exchange() / (prm.heat_capacity() * prm.volume);
    const double kappa_j = prm.exchange() / prm.jacket_heat_capacity();

    Vector next(4);
    next[0] = c_a + prm.dt * (fv * (prm.c_a_in - c_a) - r);
    next[1] = c_b + prm.dt * (fv * (prm.c_b_in - c_b) - r);
    next[2] = theta + prm.dt * ((-prm.reaction_enthalpy) / prm.heat_capacity() * r) +
              prm.dt * (fv * (prm.theta_in - theta) - kappa * (theta - theta_j));
    next[3] = theta_j + prm.dt * (prm.coolant_flow / prm.jacket_volume * (prm.theta_j_in - theta_j) +
                                  kappa_j * (theta - theta_j));
    if (!next.allFinite())
        throw OverflowError("cstr::step: non-finite state, from x = [" + std::to_string(c_a) + ", " +
                                std::to_string(c_b) + ", " + std::to_string(theta) + ", " +
                                std::to_string(theta_j) + "]",
                            1);
    return next;
}

/// Measured outputs y = (theta, theta_j).
inline Vector output(const Vector& x) {
    Vector y(2);
    y << x[2], x[3];
    return y;
}

/// step(ref) - ref. Nonzero because the tabulated reference is rounded and
/// its rate constants do not balance the concentration equations exactly.
inline Vector fixed_point_defect(const Params& prm = {}, const Reference& ref = {}) {
    return step(ref.vec(), prm) - ref.vec();
}

/// Default verification box around the reference, in deviation coordinates:
/// +-0.5 mol/L on concentrations, +-20 K on temperatures.
inline Box deviation_box() {
    Vector lo(4), hi(4);
    lo << -0.5, -0.5, -20.0, -20.0;
    hi << 0.5, 0.5, 20.0, 20.0;
    return Box(lo, hi);
}

/// Deviation-form plant x' = x - ref with the origin pinned as an exact
/// fixed point: x'(k+1) = step(x' + ref) - step(ref). Pinning absorbs the
/// reference's fixed-point defect, so the analytic design below satisfies
/// the existence condition exactly in these coordinates.
inline NonlinearSystem deviation_system(const Params& prm = {}, const Reference& ref = {},
                                        Box box = deviation_box()) {
    const Vector ref_vec = ref.vec();
    const Vector ref_image = step(ref_vec, prm);
    return NonlinearSystem(
        [prm, ref_vec, ref_image](const Vector& xd) -> Vector {
            return step(xd + ref_vec, prm) - ref_image;
        },
        [](const Vector& xd) -> Vector { return output(xd); },
        [](const Vector& xd) -> double { return xd[0] + xd[1]; },
        4, 2, std::move(box));
}

/// Scalar observer design in closed form. The nonlinearity enters both
/// concentration equations through the same rate term, so it cancels from
/// z = C_A + C_B once the reactor energy balance is used to eliminate it;
/// what remains is linear in the measured temperatures.
struct Design {
    double alpha1 = 0.0;
    CharPoly poly;
    BetaCoefficients beta;
    ObserverRealization observer;
};

inline Design analytic_design(const Params& prm = {}) {
    const double fv_dt = prm.dt * prm.flow / prm.volume;
    if (fv_dt >= 2.0)
        throw std::invalid_argument(
            "analytic_design: need dt < 2 V / F for the observer eigenvalue to stay in (-1, 1)");

    const double mu = 2.0 * prm.heat_capacity() / (-prm.reaction_enthalpy);
    const double kappa = prm.exchange() / (prm.heat_capacity() * prm.volume);
    const double kappa_j = prm.exchange() / prm.jacket_heat_capacity();

    Design d;
    d.alpha1 = fv_dt - 1.0;
    d.poly = CharPoly({d.alpha1});

    Matrix beta_rows(2, 2);
    beta_rows(0, 0) = -mu;
    beta_rows(0, 1) = 1.0;
    beta_rows(1, 0) = mu * (1.0 - fv_dt - prm.dt * kappa) - prm.dt * kappa_j;
    beta_rows(1, 1) = mu * prm.dt * kappa + prm.dt * prm.coolant_flow / prm.jacket_volume +
                      prm.dt * kappa_j - 1.0;
    d.beta = BetaCoefficients(std::move(beta_rows));
    d.observer = realize_observer(d.poly, d.beta);
    return d;
}

/// End-to-end scenario: deviation plant from the cold start
/// (0, 0, 300 K, 300 K), observer initialized T(x'(0)) + init_error, with
/// estimates and errors reported in absolute variables.
struct CaseStudyResult {
    Design design;
    Trajectory trajectory;             // deviation coordinates
    ErrorAnalysis errors;              // observed vs C A^k closed form
    std::vector<double> z_abs;         // true total concentration
    std::vector<double> z_hat_abs;     // estimate in absolute form
    Vector defect;                     // fixed-point residual at the reference
    NonlinearTransformation transform;
};

inline CaseStudyResult run_case_study(double init_error, long n_steps, const Params& prm = {},
                                      const Reference& ref = {}) {
    CaseStudyResult out;
    out.design = analytic_design(prm);
    out.defect = fixed_point_defect(prm, ref);

    const NonlinearSystem dev = deviation_system(prm, ref);
    out.transform = transformation_map(dev, out.design.poly, out.design.beta);

    Vector x0(4);
    x0 << 0.0, 0.0, 300.0, 300.0;
    const Vector x0_dev = x0 - ref.vec();
    const Vector xi0 = out.transform(x0_dev) + Vector::Constant(1, init_error);

    out.trajectory = simulate(dev, out.design.observer, x0_dev, xi0, n_steps);
    out.errors = error_analysis(out.trajectory, out.design.observer,
                                [&out](const Vector& x) { return out.transform(x); });

    const double z_ref = ref.total_concentration();
    out.z_abs.reserve(out.trajectory.true_z.size());
    out.z_hat_abs.reserve(out.trajectory.z_hat.size());
    for (double z : out.trajectory.true_z) out.z_abs.push_back(z + z_ref);
    for (double zh : out.trajectory.z_hat) out.z_hat_abs.push_back(zh + z_ref);
    return out;
}

/// Trajectory re-expressed in absolute variables for reporting.
inline Trajectory to_absolute(const Trajectory& dev_traj, const Reference& ref = {}) {
    Trajectory abs = dev_traj;
    const Vector ref_vec = ref.vec();
    const Vector y_ref = output(ref_vec);
    const double z_ref = ref.total_concentration();
    for (auto& x : abs.states) x += ref_vec;
    for (auto& y : abs.outputs) y += y_ref;
    for (auto& z : abs.true_z) z += z_ref;
    for (auto& zh : abs.z_hat) zh += z_ref;
    return abs;
}

}  // namespace fobs::cstr
