// SPDX-License-Identifier: Apache-2.0
#include "mgrid/error.hpp"
#include "mgrid/linearize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <complex>
#include <random>

using namespace mgrid;
using mgrid::testing::fd_jacobian;
using mgrid::testing::max_relative_error;

namespace {

struct Solved {
    MicrogridSpec spec;
    Equilibrium eq;
};

const Solved& five_bus()
{
    static const Solved s = [] {
        auto spec = mgrid::testing::bundled("benchmark_5bus").scenario.spec;
        SystemModel model(spec);
        auto eq = solve_equilibrium(model);
        return Solved{spec, eq};
    }();
    return s;
}

} // namespace

TEST_CASE("equilibrium of the five-bus system")
{
    const auto& s = five_bus();
    SystemModel model(s.spec);
    CHECK(s.eq.residual_norm < 1e-8);
    CHECK(equilibrium_residual(model, s.eq.x) < 1e-8);
    const Vector dx = model.derivatives(s.eq.x);
    CHECK(dx.cwiseProduct(model.state_scale()).norm() < 1e-6);
    for (int k = 0; k < 5; ++k) {
        CHECK(std::abs(s.eq.x[model.layout().delta(k)]) < 1.0);
        CHECK(s.eq.x[model.layout().vdc(k)] == doctest::Approx(1000.0).epsilon(1e-9));
    }
}

TEST_CASE("symmetric two-inverter system converges from a flat start to equal angles")
{
    auto spec = mgrid::testing::two_bus_spec(0.06, 0.06);
    spec.network.rl_loads[1] = spec.network.rl_loads[0];
    SystemModel model(spec);
    const auto eq = solve_equilibrium(model);
    CHECK_FALSE(eq.used_fallback);
    CHECK(eq.x[0] == doctest::Approx(eq.x[1]).epsilon(1e-9));
    CHECK(eq.x[0] < 0.0);
}

TEST_CASE("non-convergence reports the best residual")
{
    auto spec = mgrid::testing::two_bus_spec(0.06, 0.06);
    SystemModel model(spec);
    EquilibriumOptions opts;
    opts.max_iterations = 1;
    opts.allow_fallback = false;
    opts.tol = 1e-14;
    try {
        (void)solve_equilibrium(model, std::nullopt, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.best_residual() > 0.0);
        CHECK(std::isfinite(e.best_residual()));
    }
}

TEST_CASE("closed-loop matrix matches a finite-difference Jacobian")
{
    const auto& s = five_bus();
    const auto lin = build_linearized(s.eq, s.spec);
    REQUIRE(lin.A_cl.rows() == 65);
    auto f = [&](const Vector& x) { return unit_vector_field(s.eq, s.spec, lin.units, x); };
    CHECK(f(lin.x_star).norm() < 1e-5);
    const Matrix jac = fd_jacobian(f, lin.x_star);
    CHECK(max_relative_error(jac, lin.A_cl) < 1e-4);
}

TEST_CASE("single-unit linearization matches a finite-difference Jacobian")
{
    const auto& s = five_bus();
    const auto lin = build_linearized(s.eq, s.spec, {3});
    REQUIRE(lin.A_cl.rows() == 13);
    auto f = [&](const Vector& x) { return unit_vector_field(s.eq, s.spec, lin.units, x); };
    CHECK(max_relative_error(fd_jacobian(f, lin.x_star), lin.A_cl) < 1e-4);
}

TEST_CASE("input matrix is the response to the negated bus voltage")
{
    const auto& s = five_bus();
    const auto lin = build_linearized(s.eq, s.spec, {1});
    const StateLayout L(s.spec);
    const auto bus = s.spec.inverters[1].bus;
    auto g = [&](const Vector& u) {
        Equilibrium shifted = s.eq;
        shifted.x.segment<2>(L.network_offset + 2 * bus) -= u;
        return unit_vector_field(shifted, s.spec, lin.units, lin.x_star);
    };
    const Matrix jac = fd_jacobian(g, Vector::Zero(2));
    CHECK(max_relative_error(jac, lin.B_u) < 1e-6);
    CHECK((lin.B_u.transpose() * lin.Gamma - lin.C).norm() < 1e-9);
    CHECK(lin.D_u.norm() == 0.0);
}

TEST_CASE("transfer function limits")
{
    const auto& s = five_bus();
    const auto lin = build_linearized(s.eq, s.spec, {0});
    CHECK(transfer_function(lin, 1e9).norm() < 1e-3);
    const CMatrix g0 = transfer_function(lin, 0.0);
    const Matrix expected = -lin.C * lin.A_cl.partialPivLu().solve(lin.B_u);
    CHECK((g0.real() - expected).norm() < 1e-9 * (1.0 + expected.norm()));
    CHECK(g0.imag().norm() < 1e-12);
    const double w = 314.0;
    const CMatrix direct =
        lin.C.cast<std::complex<double>>() *
        (std::complex<double>(0.0, w) * CMatrix::Identity(13, 13) - lin.A_cl.cast<std::complex<double>>())
            .inverse() *
        lin.B_u.cast<std::complex<double>>();
    CHECK((transfer_function(lin, w) - direct).norm() < 1e-9 * (1.0 + direct.norm()));
}

TEST_CASE("an engaged current limit is rejected")
{
    auto spec = mgrid::testing::two_bus_spec(0.06, 0.06);
    SystemModel model(spec);
    auto eq = solve_equilibrium(model);
    spec.inverters[0].gains.ac.i_max = 1.0;
    CHECK_THROWS_AS(build_linearized(eq, spec), ModelError);
}

TEST_CASE("random benchmark draws linearize consistently")
{
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 5; ++trial) {
        auto parsed = random_scenario(rng(), 3);
        Equilibrium eq;
        try {
            eq = solve_equilibrium(parsed.scenario.spec);
        } catch (const ConvergenceError&) {
            continue;
        }
        const auto lin = build_linearized(eq, parsed.scenario.spec);
        auto f = [&](const Vector& x) { return unit_vector_field(eq, parsed.scenario.spec, lin.units, x); };
        CHECK(max_relative_error(fd_jacobian(f, lin.x_star), lin.A_cl) < 1e-4);
        ++checked;
    }
    CHECK(checked >= 4);
}
