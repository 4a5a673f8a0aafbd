#include "fobs/core_model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace fobs;

namespace {

LinearSystem diag_system() {
    Matrix f(2, 2);
    f << 0.8, 0.0, 0.0, 0.5;
    Matrix h(1, 2);
    h << 1.0, 0.0;
    RowVector q(2);
    q << 0.0, 1.0;
    return LinearSystem(f, h, q);
}

}  // namespace

TEST_CASE("LinearSystem validates dimensions and finiteness") {
    Matrix f(2, 2);
    f << 1.0, 0.0, 0.0, 1.0;
    Matrix h(1, 2);
    h << 1.0, 0.0;
    RowVector q(2);
    q << 1.0, 1.0;
    CHECK_NOTHROW(LinearSystem(f, h, q));

    Matrix h_bad(1, 3);
    h_bad << 1.0, 0.0, 0.0;
    CHECK_THROWS_AS(LinearSystem(f, h_bad, q), std::invalid_argument);

    RowVector q_bad(3);
    q_bad << 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(LinearSystem(f, h, q_bad), std::invalid_argument);

    Matrix f_nan = f;
    f_nan(0, 0) = std::nan("");
    CHECK_THROWS_AS(LinearSystem(f_nan, h, q), std::invalid_argument);

    Matrix h_tall(3, 2);  // p > n
    h_tall.setOnes();
    CHECK_THROWS_AS(LinearSystem(f, h_tall, q), std::invalid_argument);
}

TEST_CASE("iterate_map on scalar doubling system") {
    Matrix f(1, 1);
    f << 2.0;
    Matrix h(1, 1);
    h << 1.0;
    RowVector q(1);
    q << 1.0;
    LinearSystem sys(f, h, q);

    Vector x(1);
    x << 1.0;
    CHECK(iterate_map(sys, 3, x)[0] == Catch::Approx(8.0));
    CHECK(iterate_map(sys, 0, x)[0] == 1.0);  // F^0 = identity
}

TEST_CASE("iterate_map reports the overflowing iterate") {
    Matrix f(1, 1);
    f << 1e200;
    Matrix h(1, 1);
    h << 1.0;
    RowVector q(1);
    q << 1.0;
    LinearSystem sys(f, h, q);
    Vector x(1);
    x << 1e200;

    try {
        iterate_map(sys, 5, x);
        FAIL("expected OverflowError");
    } catch (const OverflowError& e) {
        CHECK(e.step() == 1);  // 1e200 * 1e200 overflows immediately
    }
}

TEST_CASE("iterate_map semigroup property on random linear systems") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 4);
        Matrix f(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) f(i, j) = u(rng);
        LinearSystem sys(f, Matrix::Identity(1, n), RowVector::Ones(n));
        Vector x(n);
        for (int i = 0; i < n; ++i) x[i] = u(rng);

        const long a = static_cast<long>(rng() % 5);
        const long b = static_cast<long>(rng() % 5);
        const Vector lhs = iterate_map(sys, a + b, x);
        const Vector rhs = iterate_map(sys, a, iterate_map(sys, b, x));
        const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * scale);

        // against explicit matrix powers
        Matrix fp = Matrix::Identity(n, n);
        for (long k = 0; k < a + b; ++k) fp = f * fp;
        CHECK((lhs - fp * x).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
}

TEST_CASE("functional_iterates shares one pass over the iterates") {
    SECTION("scalar geometric sequence") {
        Matrix f(1, 1);
        f << 0.5;
        Matrix h(1, 1);
        h << 1.0;
        RowVector q(1);
        q << 1.0;
        LinearSystem sys(f, h, q);
        Vector x(1);
        x << 4.0;

        const auto it = functional_iterates(sys, 2, x);
        REQUIRE(it.q.size() == 3);
        CHECK(it.q[0] == Catch::Approx(4.0));
        CHECK(it.q[1] == Catch::Approx(2.0));
        CHECK(it.q[2] == Catch::Approx(1.0));
        CHECK(it.h[0][0] == Catch::Approx(4.0));
        CHECK(it.h[1][0] == Catch::Approx(2.0));
        CHECK(it.h[2][0] == Catch::Approx(1.0));
    }

    SECTION("two-state diagonal example") {
        const LinearSystem sys = diag_system();
        Vector x(2);
        x << 1.0, 1.0;
        const auto it = functional_iterates(sys, 1, x);
        CHECK(it.q[0] == Catch::Approx(1.0));
        CHECK(it.q[1] == Catch::Approx(0.5));
        CHECK(it.h[0][0] == Catch::Approx(1.0));
        CHECK(it.h[1][0] == Catch::Approx(0.8));
    }

    SECTION("v = 1 matches definition") {
        const LinearSystem sys = diag_system();
        Vector x(2);
        x << 0.3, -0.7;
        const auto it = functional_iterates(sys, 1, x);
        CHECK(it.q[0] == sys.target(x));
        CHECK(it.q[1] == sys.target(sys.step(x)));
    }
}

TEST_CASE("observability_index") {
    SECTION("full output gives index 1") {
        Matrix f(2, 2);
        f << 0.3, -1.2, 0.7, 0.1;
        LinearSystem sys(f, Matrix::Identity(2, 2), RowVector::Ones(2));
        REQUIRE(observability_index(sys).has_value());
        CHECK(*observability_index(sys) == 1);
    }

    SECTION("Jordan block needs two iterates") {
        Matrix f(2, 2);
        f << 1.0, 1.0, 0.0, 1.0;
        Matrix h(1, 2);
        h << 1.0, 0.0;
        LinearSystem sys(f, h, RowVector::Ones(2));
        REQUIRE(observability_index(sys).has_value());
        CHECK(*observability_index(sys) == 2);
    }

    SECTION("decoupled second state is unobservable") {
        CHECK_FALSE(observability_index(diag_system()).has_value());
    }

    SECTION("invariant under nonzero row scaling of H") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 4);
            const int p = 1 + static_cast<int>(rng() % 2);
            Matrix f(n, n), h(p, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) f(i, j) = u(rng);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < n; ++j) h(i, j) = u(rng);
            LinearSystem sys(f, h, RowVector::Ones(n));

            Matrix h_scaled = h;
            for (int i = 0; i < p; ++i) h_scaled.row(i) *= (i % 2 == 0 ? 37.5 : -4e-3);
            LinearSystem scaled(f, h_scaled, RowVector::Ones(n));
            CHECK(observability_index(sys) == observability_index(scaled));
        }
    }
}

TEST_CASE("as_nonlinear matches the linear system pointwise") {
    const LinearSystem sys = diag_system();
    const NonlinearSystem wrapped = as_nonlinear(sys);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        Vector x(2);
        x << u(rng), u(rng);
        CHECK((wrapped.step(x) - sys.step(x)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((wrapped.output(x) - sys.output(x)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(wrapped.target(x) == sys.target(x));
    }
}

TEST_CASE("Box validation and membership") {
    Vector lo(2), hi(2);
    lo << -1.0, 0.0;
    hi << 1.0, 2.0;
    const Box box(lo, hi);
    Vector inside(2);
    inside << 0.0, 1.0;
    Vector outside(2);
    outside << 0.0, 3.0;
    CHECK(box.contains(inside));
    CHECK_FALSE(box.contains(outside));
    CHECK_THROWS_AS(Box(hi, lo), std::invalid_argument);
}
