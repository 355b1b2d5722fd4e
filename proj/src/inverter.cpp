// SPDX-License-Identifier: Apache-2.0
#include "mgrid/inverter.hpp"

#include "mgrid/error.hpp"

#include <string>

namespace mgrid {

void InverterParams::validate() const
{
    const double values[] = {Rf, Lf, Cf, Gs, Rc, Lc, Cdc, Gdc};
    const char* names[] = {"Rf", "Lf", "Cf", "Gs", "Rc", "Lc", "Cdc", "Gdc"};
    for (std::size_t k = 0; k < 8; ++k) {
        if (!(values[k] > 0.0)) {
            throw ModelError(std::string("inverter parameter ") + names[k] + " must be positive");
        }
    }
}

InverterDerivative inverter_derivatives(const InverterParams& p,
                                        const InverterState& s,
                                        const Vec2& m,
                                        double idc,
                                        const Vec2& vb,
                                        double omega,
                                        double omega0)
{
    const Mat2 j = J2();
    InverterDerivative d;
    d.delta = omega - omega0;
    d.vdc = (-p.Gdc * s.vdc + idc - dc_side_current(s, m)) / p.Cdc;
    d.i = ((-p.Rf * s.i + omega0 * p.Lf * (j * s.i)) + ac_side_voltage(s, m) - s.vo) / p.Lf;
    d.vo = ((-p.Gs * s.vo + omega0 * p.Cf * (j * s.vo)) + s.i - s.io) / p.Cf;
    d.io = ((-p.Rc * s.io + omega0 * p.Lc * (j * s.io)) + s.vo - vb) / p.Lc;
    return d;
}

Vector stack_inverters(std::span<const InverterState> states, int expected_count)
{
    if (static_cast<int>(states.size()) != expected_count) {
        throw ModelError("expected " + std::to_string(expected_count) + " inverter states, got " +
                         std::to_string(states.size()));
    }
    const auto n = static_cast<Eigen::Index>(states.size());
    Vector out(kPhysicalStatesPerInverter * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = states[static_cast<std::size_t>(k)];
        out[k] = s.delta;
        out[n + k] = s.vdc;
        out.segment<2>(2 * n + 2 * k) = s.i;
        out.segment<2>(4 * n + 2 * k) = s.vo;
        out.segment<2>(6 * n + 2 * k) = s.io;
    }
    return out;
}

std::vector<InverterState> unstack_inverters(const Vector& stacked, int count)
{
    const Eigen::Index n = count;
    if (stacked.size() != kPhysicalStatesPerInverter * n) {
        throw ModelError("stacked inverter vector has wrong length");
    }
    std::vector<InverterState> out(static_cast<std::size_t>(count));
    for (Eigen::Index k = 0; k < n; ++k) {
        auto& s = out[static_cast<std::size_t>(k)];
        s.delta = stacked[k];
        s.vdc = stacked[n + k];
        s.i = stacked.segment<2>(2 * n + 2 * k);
        s.vo = stacked.segment<2>(4 * n + 2 * k);
        s.io = stacked.segment<2>(6 * n + 2 * k);
    }
    return out;
}

} // namespace mgrid
