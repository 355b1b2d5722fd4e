// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linalg.hpp"
#include "mgrid/microgrid.hpp"
#include "mgrid/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#ifndef MGRID_SCENARIO_DIR
#define MGRID_SCENARIO_DIR "scenarios"
#endif

namespace mgrid::testing {

inline std::filesystem::path scenario_path(const std::string& name)
{
    return std::filesystem::path(MGRID_SCENARIO_DIR) / (name + ".json");
}

inline ParsedScenario bundled(const std::string& name) { return parse_scenario(scenario_path(name)); }

/// Central finite-difference Jacobian of f at x with step h (1 + |x_k|).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6)
{
    const Vector f0 = f(x);
    Matrix jac(f0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double step = h * (1.0 + std::abs(x[k]));
        Vector xp = x;
        Vector xm = x;
        xp[k] += step;
        xm[k] -= step;
        jac.col(k) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return jac;
}

/// Uniform draw in [lo, hi].
inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Inverter parameters drawn from the benchmark ranges.
inline InverterParams random_inverter_params(std::mt19937_64& rng)
{
    InverterParams p;
    p.Rf = uniform(rng, 0.05, 1.5);
    p.Lf = uniform(rng, 0.08e-3, 8e-3);
    p.Cf = uniform(rng, 20e-6, 150e-6);
    p.Lc = uniform(rng, 0.1e-3, 30e-3);
    p.Rc = uniform(rng, 0.03, 2.0);
    return p;
}

/// Control gains drawn from the benchmark ranges.
inline ControlGains random_gains(std::mt19937_64& rng)
{
    ControlGains g;
    g.freq.kp = uniform(rng, 0.006, 0.06);
    g.freq.kI = uniform(rng, 10.0, 50.0);
    g.ac.nq = uniform(rng, 0.0, 0.078);
    g.ac.cp = uniform(rng, 1.0, 5.0);
    g.ac.cI = uniform(rng, 10.0, 50.0);
    g.ac.lambda_P = uniform(rng, 1e-3, 0.1);
    g.ac.lambda_I = uniform(rng, 2.5e-3, 2.5);
    return g;
}

/// Ring network with random line, shunt and RL-load parameters on every bus.
inline NetworkParams random_network(std::mt19937_64& rng, int buses)
{
    NetworkParams p;
    p.graph = ring_graph(buses);
    for (std::size_t z = 0; z < p.graph.edge_count(); ++z) {
        p.lines.push_back({uniform(rng, 0.05, 0.5), uniform(rng, 0.5e-3, 5e-3)});
    }
    for (int b = 0; b < buses; ++b) {
        p.shunts.push_back({uniform(rng, 1e-6, 20e-6), uniform(rng, 1e-4, 1e-2)});
        p.rl_loads.push_back(RlLoad{uniform(rng, 10.0, 40.0), uniform(rng, 10e-3, 50e-3)});
    }
    return p;
}

/// Single bus with an RL load and the given inverters, all connected to it.
inline MicrogridSpec single_bus_spec(std::vector<InverterUnit> units, double R = 20.0, double L = 30e-3)
{
    MicrogridSpec spec;
    spec.network.graph = Graph(1, {});
    spec.network.shunts = {BusShunt{1e-6, 1e-3}};
    spec.network.rl_loads = {RlLoad{R, L}};
    spec.inverters = std::move(units);
    spec.cpl_P = {0.0};
    spec.cpl_Q = {0.0};
    return spec;
}

/// Two buses joined by one line, one inverter per bus with the given droop gains.
inline MicrogridSpec two_bus_spec(double kp1, double kp2)
{
    MicrogridSpec spec;
    spec.network.graph = Graph(2, {Edge{0, 1}});
    spec.network.lines = {LineParams{0.2, 4e-3}};
    spec.network.shunts = {BusShunt{1e-6, 1e-3}, BusShunt{1e-6, 1e-3}};
    spec.network.rl_loads = {RlLoad{17.4, 31.4e-3}, RlLoad{18.1, 31.0e-3}};
    InverterUnit a;
    a.bus = 0;
    a.gains.freq.kp = kp1;
    InverterUnit b;
    b.bus = 1;
    b.gains.freq.kp = kp2;
    spec.inverters = {a, b};
    spec.cpl_P = {0.0, 0.0};
    spec.cpl_Q = {0.0, 0.0};
    return spec;
}

/// Maximum entrywise relative error with an absolute floor scaled to the largest entry.
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor_fraction = 1e-9)
{
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    const double floor = floor_fraction * scale;
    double worst = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            const double denom = std::max({std::abs(a(r, c)), std::abs(b(r, c)), floor});
            if (denom == 0.0) continue;
            worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / denom);
        }
    }
    return worst;
}

} // namespace mgrid::testing
