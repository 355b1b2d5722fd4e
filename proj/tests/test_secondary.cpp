// SPDX-License-Identifier: Apache-2.0
#include "mgrid/error.hpp"
#include "mgrid/linearize.hpp"
#include "mgrid/secondary.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>
#include <vector>

using namespace mgrid;
using mgrid::testing::uniform;

namespace {

/// Degree minus adjacency, counted from the edge list.
Matrix degree_minus_adjacency(const Graph& g)
{
    const int n = g.bus_count();
    Matrix l = Matrix::Zero(n, n);
    for (const auto& e : g.edges()) {
        l(e.source, e.source) += 1.0;
        l(e.sink, e.sink) += 1.0;
        l(e.source, e.sink) -= 1.0;
        l(e.sink, e.source) -= 1.0;
    }
    return l;
}

} // namespace

TEST_CASE("consensus law kernel")
{
    const Graph g = ring_graph(5);
    const std::vector<double> kI{40, 30, 20, 10, 5};
    const std::vector<double> delta{0.01, -0.02, 0.03, 0.0, -0.01};
    std::vector<double> chi(5);
    for (std::size_t k = 0; k < 5; ++k) {
        chi[k] = kI[k] * delta[k];
    }
    CHECK(secondary_derivative(chi, delta, kI, 667.0, g).norm() < 1e-12);
    const std::vector<double> flat(5, 0.7);
    const std::vector<double> zero(5, 0.0);
    CHECK(secondary_derivative(flat, zero, kI, 667.0, g).norm() < 1e-12);
}

TEST_CASE("edge-wise assembly agrees with the dense product")
{
    std::mt19937_64 rng(9);
    const Graph g(6, {Edge{0, 1}, Edge{1, 2}, Edge{2, 3}, Edge{3, 4}, Edge{4, 5}, Edge{0, 3}, Edge{1, 4}});
    const Matrix l = degree_minus_adjacency(g);
    for (int trial = 0; trial < 10; ++trial) {
        Vector chi(6);
        Vector delta(6);
        Vector kI(6);
        for (int k = 0; k < 6; ++k) {
            chi[k] = uniform(rng, -1, 1);
            delta[k] = uniform(rng, -0.1, 0.1);
            kI[k] = uniform(rng, 10, 50);
        }
        const Vector expected = -3.0 * l * (chi - kI.cwiseProduct(delta));
        const Vector sparse = secondary_derivative(to_std(chi), to_std(delta), to_std(kI), 3.0, g);
        const Vector dense = secondary_derivative(chi, delta, kI, 3.0, laplacian(g));
        CHECK((sparse - expected).norm() < 1e-12);
        CHECK((dense - expected).norm() < 1e-12);
        CHECK(sparse.sum() == doctest::Approx(0.0).scale(1.0));
    }
}

TEST_CASE("a unit only reads its neighbours")
{
    const Graph g = path_graph(4);
    std::vector<double> chi{0.1, 0.2, 0.3, 0.4};
    const std::vector<double> delta(4, 0.0);
    const std::vector<double> kI(4, 40.0);
    const Vector before = secondary_derivative(chi, delta, kI, 1.0, g);
    chi[3] = 5.0;
    const Vector after = secondary_derivative(chi, delta, kI, 1.0, g);
    CHECK(after[0] == before[0]);
    CHECK(after[1] == before[1]);
    CHECK(after[2] != before[2]);
}

TEST_CASE("size mismatch is rejected")
{
    const std::vector<double> three(3, 0.0);
    CHECK_THROWS_AS(secondary_derivative(three, three, three, 1.0, ring_graph(4)), ModelError);
}

TEST_CASE("power-sharing check")
{
    std::vector<SharingSample> equal{{0.06, 10.0, 311.0}, {0.03, 20.0, 311.0}, {0.06, 10.1, 310.0}};
    auto cert = check_power_sharing(equal, 0.02);
    CHECK(cert.pass);
    CHECK(cert.margin == doctest::Approx(0.02 - 0.006 / 0.6).epsilon(1e-9));
    CHECK(cert.series.at("kp_ioD").size() == 3);
    CHECK(cert.series.at("active_power_ratio")[1] == doctest::Approx(2.0));
    std::vector<SharingSample> unequal{{0.06, 10.0, 311.0}, {0.06, 12.0, 311.0}};
    cert = check_power_sharing(unequal, 0.02);
    CHECK_FALSE(cert.pass);
    CHECK(cert.margin < 0.0);
    CHECK_FALSE(check_power_sharing(std::vector<SharingSample>{}, 0.02).pass);
}

TEST_CASE("secondary control equalizes weighted output currents at equilibrium")
{
    SUBCASE("identical units on a symmetric network share equally")
    {
        auto spec = mgrid::testing::two_bus_spec(0.06, 0.06);
        spec.network.rl_loads[1] = spec.network.rl_loads[0];
        spec.secondary.enabled = true;
        const auto eq = solve_equilibrium(spec);
        SystemModel model(spec);
        const double a = model.unit_state(eq.x, 0).phys.io.x();
        const double b = model.unit_state(eq.x, 1).phys.io.x();
        CHECK(a == doctest::Approx(b).epsilon(1e-8));
        CHECK(eq.x[model.layout().delta(0)] == doctest::Approx(eq.x[model.layout().delta(1)]).epsilon(1e-8));
    }
    SUBCASE("droop gains 1:2 give output currents 2:1")
    {
        auto spec = mgrid::testing::two_bus_spec(0.03, 0.06);
        spec.secondary.enabled = true;
        const auto eq = solve_equilibrium(spec);
        SystemModel model(spec);
        const double a = model.unit_state(eq.x, 0).phys.io.x();
        const double b = model.unit_state(eq.x, 1).phys.io.x();
        CHECK(a / b == doctest::Approx(2.0).epsilon(0.02));
        const std::vector<SharingSample> s{{0.03, a, 0.0}, {0.06, b, 0.0}};
        CHECK(check_power_sharing(s, 0.02).pass);
    }
}
