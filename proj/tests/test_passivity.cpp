// SPDX-License-Identifier: Apache-2.0
#include "mgrid/error.hpp"
#include "mgrid/passivity.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <complex>

using namespace mgrid;

namespace {

/// State-space realization of 1/(s + a).
LinearizedInverter first_order(double a)
{
    LinearizedInverter lin;
    lin.n = 1;
    lin.A_cl = Matrix::Constant(1, 1, -a);
    lin.B_u = Matrix::Ones(1, 1);
    lin.C = Matrix::Ones(1, 1);
    lin.D_u = Matrix::Zero(1, 1);
    return lin;
}

struct Solved {
    MicrogridSpec spec;
    Equilibrium eq;
};

const Solved& five_bus()
{
    static const Solved s = [] {
        auto spec = mgrid::testing::bundled("benchmark_5bus").scenario.spec;
        return Solved{spec, solve_equilibrium(SystemModel(spec))};
    }();
    return s;
}

} // namespace

TEST_CASE("minimum eigenvalue of the Hermitian part")
{
    CMatrix g(2, 2);
    g << std::complex<double>(1.0, 0.0), std::complex<double>(0.0, 2.0), std::complex<double>(0.0, 0.0),
        std::complex<double>(3.0, 1.0);
    const CMatrix h = g + g.adjoint();
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    CHECK(hermitian_min_eigenvalue(g) == doctest::Approx(es.eigenvalues()[0]));
    // [[2, 2j], [-2j, 6]] has eigenvalues 4 -+ sqrt(8)
    CHECK(hermitian_min_eigenvalue(g) == doctest::Approx(4.0 - std::sqrt(8.0)));
}

TEST_CASE("first-order lag is positive real on the whole sweep")
{
    const auto lin = first_order(1.0);
    SweepOptions opts;
    opts.points = 200;
    const auto sweep = passivity_sweep(lin, opts);
    REQUIRE(sweep.omega_grid.size() == 200);
    for (std::size_t k = 0; k < sweep.omega_grid.size(); ++k) {
        const double w = sweep.omega_grid[k];
        CHECK(sweep.min_eigenvalues[k] == doctest::Approx(2.0 / (1.0 + w * w)).epsilon(1e-9));
    }
    const auto cert = passivity_certificate(sweep);
    CHECK(cert.pass);
    CHECK(cert.margin > 0.0);
    CHECK(sweep.spectral_abscissa == doctest::Approx(-1.0));
}

TEST_CASE("an unstable realization is rejected")
{
    const auto sweep = passivity_sweep(first_order(-1.0), SweepOptions{1e-2, 1e3, 50, true});
    const auto cert = passivity_certificate(sweep);
    CHECK_FALSE(cert.pass);
    CHECK(cert.reason == "not asymptotically stable");
}

TEST_CASE("refinement locates the minimum between grid points")
{
    // 1/(s + 1) - 0.5/(s + 0.1)(s + 10) has an interior minimum of the real part
    LinearizedInverter lin;
    lin.A_cl.resize(3, 3);
    lin.A_cl << -1, 0, 0, 0, -0.1, 0, 0, 1, -10;
    lin.B_u.resize(3, 1);
    lin.B_u << 1, 1, 0;
    lin.C.resize(1, 3);
    lin.C << 1, 0, -0.5;
    lin.D_u = Matrix::Zero(1, 1);
    const auto coarse = passivity_sweep(lin, SweepOptions{1e-2, 1e3, 12, true});
    CHECK(coarse.refined_margin <= coarse.overall_margin);
    const auto fine = passivity_sweep(lin, SweepOptions{1e-2, 1e3, 20000, false});
    CHECK(coarse.refined_margin == doctest::Approx(fine.overall_margin).epsilon(1e-6).scale(1.0));
}

TEST_CASE("sweep options are validated")
{
    CHECK_THROWS_AS(passivity_sweep(first_order(1.0), SweepOptions{0.0, 1.0, 10, true}), ModelError);
    CHECK_THROWS_AS(passivity_sweep(first_order(1.0), SweepOptions{1.0, 1.0, 10, true}), ModelError);
}

TEST_CASE("KYP inequality")
{
    SUBCASE("known storage certifies the first-order lag")
    {
        const auto lin = first_order(1.0);
        const Matrix p = Matrix::Identity(1, 1);
        const Matrix lmi = kyp_lmi_matrix(lin, p, 0.5);
        CHECK(lmi(0, 0) == doctest::Approx(-1.5));
        CHECK(lmi(0, 1) == doctest::Approx(0.0));
        CHECK(kyp_lmi_residual(lin, p, 0.5) <= 1e-12);
    }
    SUBCASE("the matrix is symmetric for symmetric storage")
    {
        const auto& s = five_bus();
        const auto lin = build_linearized(s.eq, s.spec, {0});
        const Matrix p = lin.Gamma;
        const Matrix lmi = kyp_lmi_matrix(lin, p, 1e-3);
        CHECK((lmi - lmi.transpose()).norm() < 1e-9 * lmi.norm());
    }
    SUBCASE("identity storage on a destabilized loop gives a positive residual")
    {
        const auto& s = five_bus();
        auto lin = build_linearized(s.eq, s.spec, {0});
        const Eigen::EigenSolver<Matrix> es(lin.A_cl, false);
        const double shift = es.eigenvalues().real().maxCoeff() + 1.0;
        lin.A_cl += shift * Matrix::Identity(13, 13);
        CHECK(kyp_lmi_residual(lin, Matrix::Identity(13, 13), 0.0) > 0.0);
    }
    CHECK_THROWS_AS(kyp_lmi_matrix(first_order(1.0), Matrix::Identity(2, 2), 0.0), ModelError);
}

TEST_CASE("every inverter of the five-bus system is passive at its operating point")
{
    const auto& s = five_bus();
    const auto certs = certify_inverters(s.eq, s.spec, SweepOptions{1e-2, 1e6, 1000, true});
    REQUIRE(certs.size() == 5);
    for (const auto& c : certs) {
        CHECK(c.pass);
        CHECK(c.margin > 0.0);
        CHECK(c.values.at("points") == 1000.0);
    }
}

TEST_CASE("removing the angle damping destroys passivity")
{
    const auto& s = five_bus();
    auto undamped = s.spec;
    for (auto& inv : undamped.inverters) {
        inv.gains.freq.kI = 0.0;
    }
    const auto certs = certify_inverters(s.eq, undamped, SweepOptions{1e-2, 1e6, 1000, true});
    for (const auto& c : certs) {
        CHECK_FALSE(c.pass);
    }
}

TEST_CASE("damping-gain search")
{
    const auto& s = five_bus();
    const auto single = find_passive_kI(s.spec, 0, 40.0, 40.0, 10, SweepOptions{1e-2, 1e6, 100, true});
    REQUIRE(single.size() == 1);
    CHECK(single[0].pass);
    const auto curve = find_passive_kI(s.spec, 0, 20.0, 50.0, 4, SweepOptions{1e-2, 1e6, 100, true});
    REQUIRE(curve.size() == 4);
    CHECK(curve[1].kI == doctest::Approx(30.0));
    CHECK(std::isfinite(max_margin_jump(curve)));
    CHECK_THROWS_AS(find_passive_kI(s.spec, 9, 1.0, 2.0, 2), ModelError);
    std::vector<KIPoint> pts{{1.0, 0.1, true}, {2.0, 0.4, true}, {3.0, 0.35, true}};
    CHECK(max_margin_jump(pts) == doctest::Approx(0.3));
}
