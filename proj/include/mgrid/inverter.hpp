// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linalg.hpp"

#include <span>
#include <vector>

namespace mgrid {

/// Average-model grid-forming inverter: DC link plus LCL filter.
struct InverterParams {
    double Rf = 0.1;     ///< filter inductor resistance [Ohm]
    double Lf = 5e-3;    ///< filter inductance [H]
    double Cf = 50e-6;   ///< filter capacitance [F]
    double Gs = 3e-3;    ///< filter shunt conductance [S]
    double Rc = 0.2;     ///< coupling resistance [Ohm]
    double Lc = 2e-3;    ///< coupling inductance [H]
    double Cdc = 10e-3;  ///< DC-link capacitance [F]
    double Gdc = 10e-3;  ///< DC-link conductance [S]

    void validate() const;
    bool operator==(const InverterParams&) const = default;
};

/// Physical inverter state in the common DQ frame.
struct InverterState {
    double delta = 0.0;          ///< angle of the local frame [rad]
    double vdc = 0.0;            ///< DC-link voltage [V]
    Vec2 i = Vec2::Zero();       ///< filter inductor current [A]
    Vec2 vo = Vec2::Zero();      ///< filter capacitor voltage [V]
    Vec2 io = Vec2::Zero();      ///< output current [A]
};

/// Time derivatives of an InverterState (same layout).
using InverterDerivative = InverterState;

/// Evaluates the averaged inverter dynamics for given modulation, DC source current,
/// bus voltage and local frequency.
InverterDerivative inverter_derivatives(const InverterParams& params,
                                        const InverterState& state,
                                        const Vec2& m,
                                        double idc,
                                        const Vec2& vb,
                                        double omega,
                                        double omega0);

/// Power drawn from the DC link by the switches: 1/2 i^T m.
inline double dc_side_current(const InverterState& s, const Vec2& m) { return 0.5 * s.i.dot(m); }

/// Switch-side AC voltage: 1/2 v_dc m.
inline Vec2 ac_side_voltage(const InverterState& s, const Vec2& m) { return 0.5 * s.vdc * m; }

/// True when the modulation index exceeds the linear range.
inline bool overmodulated(const Vec2& m) { return m.norm() > 1.0; }

/// Number of entries of the stacked physical substate per inverter.
inline constexpr int kPhysicalStatesPerInverter = 9;

/// Stacks inverter states blockwise as [delta (n), v_dc (n), I (2n), V_o (2n), I_o (2n)].
/// Throws ModelError when the count differs from `expected_count`.
Vector stack_inverters(std::span<const InverterState> states, int expected_count);

/// Inverse of stack_inverters.
std::vector<InverterState> unstack_inverters(const Vector& stacked, int count);

} // namespace mgrid
