#include "fobs/cstr.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace fobs;

namespace {

const cstr::Params kParams{};
const cstr::Reference kRef{};

}  // namespace

TEST_CASE("reaction_rate basics") {
    SECTION("vanishes when either reactant is absent") {
        CHECK(cstr::reaction_rate(0.0, 0.7, 400.0) == 0.0);
        CHECK(cstr::reaction_rate(0.7, 0.0, 400.0) == 0.0);
    }

    SECTION("rate-constant term is the linear-in-Z part") {
        cstr::Params doubled = kParams;
        doubled.rate_constant *= 2.0;
        const double base = cstr::reaction_rate(0.5, 0.3, 405.0, kParams);
        const double dbl = cstr::reaction_rate(0.5, 0.3, 405.0, doubled);
        const double k1 = kParams.a1 * std::exp(-kParams.e1 / 405.0);
        const double k2 = kParams.a2 * std::exp(-kParams.e2 / 405.0);
        const double first_term = k1 * k2 * 0.5 * 0.3 * kParams.rate_constant / (1.0 + k2 * 0.3);
        CHECK(dbl - base == Catch::Approx(first_term).epsilon(1e-12));
    }

    SECTION("nonpositive temperature is a domain error") {
        CHECK_THROWS_AS(cstr::reaction_rate(0.5, 0.3, 0.0), std::domain_error);
        CHECK_THROWS_AS(cstr::reaction_rate(0.5, 0.3, -10.0), std::domain_error);
    }

    SECTION("value at the tabulated reference, against the feed balance") {
        // the feed balance asks for flow/volume * (c_a_in - c_a_ref); the
        // tabulated rate constants deliver a much smaller rate, so the
        // reference is only an approximate fixed point (see defect below)
        const double balance = kParams.flow / kParams.volume * (kParams.c_a_in - kRef.c_a);
        CHECK(balance == Catch::Approx(0.26632).margin(1e-12));
        const double rate = cstr::reaction_rate(kRef.c_a, kRef.c_b, kRef.theta, kParams);
        CHECK(rate == Catch::Approx(0.00045878617980813315).epsilon(1e-12));
        // the concentration defect is exactly the balance mismatch
        const Vector defect = cstr::fixed_point_defect(kParams, kRef);
        CHECK(defect[0] == Catch::Approx(kParams.dt * (balance - rate)).epsilon(1e-12));
    }
}

TEST_CASE("cstr::step") {
    SECTION("zero sampling period is the identity") {
        cstr::Params frozen = kParams;
        frozen.dt = 0.0;
        Vector x(4);
        x << 0.3, 0.2, 390.0, 301.0;
        CHECK((cstr::step(x, frozen) - x).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("cold start moves concentrations toward the inlet") {
        Vector x(4);
        x << 0.0, 0.0, 300.0, 300.0;  // rate is zero at zero concentrations
        const Vector next = cstr::step(x, kParams);
        CHECK(next[0] == Catch::Approx(kParams.dt * kParams.flow / kParams.volume * kParams.c_a_in)
                             .epsilon(1e-14));
        CHECK(next[0] == Catch::Approx(0.2).margin(1e-14));
        CHECK(next[1] == Catch::Approx(0.15).margin(1e-14));
    }

    SECTION("tabulated reference is an approximate fixed point") {
        // rounding of the tabulated values plus the rate-law mismatch; the
        // defect is reported, not hidden, and the deviation model pins it away
        const Vector defect = cstr::fixed_point_defect(kParams, kRef);
        CHECK(defect[0] == Catch::Approx(0.13293060691009595).margin(1e-12));
        CHECK(defect[1] == Catch::Approx(0.13293060691009595).margin(1e-12));
        CHECK(defect[2] == Catch::Approx(-3.7393055153763157).margin(1e-10));
        CHECK(defect[3] == Catch::Approx(0.0012877617778030981).margin(1e-12));
    }

    SECTION("state echo on overflow") {
        Vector x(4);
        x << 1e300, 1e300, 400.0, 300.0;
        CHECK_THROWS_AS(cstr::step(x, kParams), OverflowError);
    }
}

TEST_CASE("deviation_system pins the origin exactly") {
    const NonlinearSystem dev = cstr::deviation_system();
    CHECK(dev.step(Vector::Zero(4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dev.output(Vector::Zero(4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dev.target(Vector::Zero(4)) == 0.0);

    // consistency with the absolute model away from the origin
    Vector xd(4);
    xd << 0.1, -0.05, 4.0, -2.0;
    const Vector expect =
        cstr::step(Vector(xd + kRef.vec()), kParams) - cstr::step(kRef.vec(), kParams);
    CHECK((dev.step(xd) - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic_design") {
    const cstr::Design d = cstr::analytic_design(kParams);

    SECTION("eigenvalue formula") {
        CHECK(d.alpha1 == Catch::Approx(-0.9).margin(1e-15));
        CHECK(d.observer.A(0, 0) == Catch::Approx(0.9).margin(1e-15));
    }

    SECTION("direct-term weights") {
        CHECK(d.beta.row(0)(0) == Catch::Approx(-0.051).margin(1e-15));
        CHECK(d.beta.row(0)(1) == 1.0);
        CHECK(d.beta.row(1)(0) == Catch::Approx(0.040654891666666665).margin(1e-15));
        CHECK(d.beta.row(1)(1) == Catch::Approx(-0.71697711388888896).margin(1e-15));
    }

    SECTION("output injection matches the closed-form observer coefficients") {
        // independently recomputed groupings of the realized observer
        const double us = kParams.exchange();
        const double b1 = -kParams.dt * (2.0 * us / ((-kParams.reaction_enthalpy) * kParams.volume) +
                                         us / kParams.jacket_heat_capacity());
        const double b2 = kParams.dt * (kParams.coolant_flow / kParams.jacket_volume -
                                        kParams.flow / kParams.volume +
                                        us / kParams.jacket_heat_capacity() +
                                        2.0 * us / ((-kParams.reaction_enthalpy) * kParams.volume));
        CHECK(std::abs(d.observer.B(0, 0) - b1) <= 1e-12);
        CHECK(std::abs(d.observer.B(0, 1) - b2) <= 1e-12);
        CHECK(d.observer.B(0, 0) == Catch::Approx(-0.0052451083333333315).margin(1e-15));
        CHECK(d.observer.B(0, 1) == Catch::Approx(0.18302288611111106).margin(1e-15));
        CHECK((d.observer.D - d.beta.row(0)).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("sampling-period bound") {
        cstr::Params fast = kParams;
        fast.dt = 2.0 * kParams.volume / kParams.flow;  // boundary
        CHECK_THROWS_AS(cstr::analytic_design(fast), std::invalid_argument);
        fast.dt = 9.9;  // just inside
        CHECK_NOTHROW(cstr::analytic_design(fast));
    }
}

TEST_CASE("existence condition holds on the verification box") {
    const cstr::Design d = cstr::analytic_design(kParams);
    const NonlinearSystem dev = cstr::deviation_system();
    const SampleSet samples = sample_box(dev.domain, 1000, 91);

    double max_res = 0.0, max_target = 0.0;
    for (const Vector& x : samples.points) {
        max_res = std::max(max_res, std::abs(condition_residual(dev, d.poly, d.beta, x)));
        max_target = std::max(max_target, std::abs(condition_target(dev, d.poly, x)));
    }
    const double scale = std::max(1.0, max_target);
    CHECK(max_res <= 1e-8 * scale);

    SECTION("perturbing beta_1 is detected at a generic point") {
        Matrix rows = d.beta.rows;
        rows(1, 0) += 0.01;
        const BetaCoefficients perturbed(rows);
        Vector x(4);
        x << 0.1, 0.1, 5.0, 5.0;
        CHECK(std::abs(condition_residual(dev, d.poly, perturbed, x)) >= 1e-4);
    }
}

TEST_CASE("transformation combines temperatures and concentrations") {
    const cstr::Design d = cstr::analytic_design(kParams);
    const NonlinearSystem dev = cstr::deviation_system();
    const auto t = transformation_map(dev, d.poly, d.beta);

    const double mu = 2.0 * kParams.heat_capacity() / (-kParams.reaction_enthalpy);
    const SampleSet samples = sample_box(dev.domain, 50, 17);
    for (const Vector& x : samples.points) {
        const double expected = mu * x[2] - x[3] + x[0] + x[1];
        CHECK(t(x)[0] == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("least-squares fit recovers the analytic family") {
    const cstr::Design d = cstr::analytic_design(kParams);
    const NonlinearSystem dev = cstr::deviation_system();
    const SampleSet train = sample_box(dev.domain, 500, 1001);
    const SampleSet validate = sample_box(dev.domain, 500, 1002);

    const FitResult fit = fit_beta(dev, d.poly, train, validate);
    CHECK(fit.candidate);
    CHECK(fit.validation_residual <= 1e-8 * fit.scale);

    // the jacket equation is exactly linear in the measured temperatures, so
    // one direction of beta is free: the stack has rank 3, not 4, and the
    // fit returns the minimum-norm representative of the solution family
    CHECK(fit.degenerate);
    CHECK(fit.rank == 3);

    const double dt_kj = kParams.dt * kParams.exchange() / kParams.jacket_heat_capacity();
    const double jacket_pole = 1.0 - kParams.dt * (kParams.coolant_flow / kParams.jacket_volume) -
                               dt_kj;
    Vector null_dir(4);
    null_dir << 0.0, 1.0, -dt_kj, -jacket_pole;  // (b01, b02, b11, b12) layout

    Vector analytic(4);
    analytic << d.beta.rows(0, 0), d.beta.rows(0, 1), d.beta.rows(1, 0), d.beta.rows(1, 1);
    const Vector min_norm_rep =
        analytic - (analytic.dot(null_dir) / null_dir.squaredNorm()) * null_dir;

    Vector fitted(4);
    fitted << fit.beta.rows(0, 0), fit.beta.rows(0, 1), fit.beta.rows(1, 0), fit.beta.rows(1, 1);
    CHECK((fitted - min_norm_rep).cwiseAbs().maxCoeff() <= 1e-6);

    // and the fitted beta differs from the analytic one only along the
    // free direction
    const Vector diff = fitted - analytic;
    const Vector proj = diff - (diff.dot(null_dir) / null_dir.squaredNorm()) * null_dir;
    CHECK(proj.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("case study error follows the design eigenvalue") {
    SECTION("unit initialization error") {
        const auto result = cstr::run_case_study(1.0, 200);
        REQUIRE_FALSE(result.trajectory.truncated_at.has_value());
        const auto& err = result.errors.observed;
        CHECK(err[0] == Catch::Approx(1.0).margin(1e-12));

        // step ratio holds to 1e-6 while the error sits clear of the
        // accumulated rounding floor (~1e-13 for these magnitudes); below
        // that the absolute closed-form bound max_dev is the statement
        double ratio_dev = 0.0;
        for (std::size_t k = 1; k < err.size(); ++k) {
            if (std::abs(err[k - 1]) <= 1e-6) break;
            ratio_dev = std::max(ratio_dev, std::abs(err[k] / err[k - 1] - 0.9));
        }
        CHECK(ratio_dev <= 1e-6);

        double pow_dev = 0.0, p = 1.0;
        for (std::size_t k = 0; k <= 100; ++k) {
            pow_dev = std::max(pow_dev, std::abs(err[k] - p));
            p *= 0.9;
        }
        CHECK(pow_dev <= 1e-8);
        CHECK(result.errors.max_dev <= 1e-8);
    }

    SECTION("consistent initialization reproduces the functional exactly") {
        const auto result = cstr::run_case_study(0.0, 300);
        double max_err = 0.0;
        for (double e : result.errors.observed) max_err = std::max(max_err, std::abs(e));
        CHECK(max_err <= 1e-9);
    }

    SECTION("absolute reporting converges to the reference total concentration") {
        const auto result = cstr::run_case_study(1.0, 600);
        CHECK(result.z_abs.back() == Catch::Approx(kRef.total_concentration()).margin(1e-6));
        CHECK(result.z_hat_abs.back() == Catch::Approx(kRef.total_concentration()).margin(1e-6));
        CHECK(result.z_abs.front() == Catch::Approx(kRef.total_concentration() +
                                                    result.trajectory.true_z.front())
                                          .margin(1e-12));
    }
}
