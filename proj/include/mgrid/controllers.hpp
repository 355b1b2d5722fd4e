// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/inverter.hpp"
#include "mgrid/linalg.hpp"

#include <limits>
#include <span>
#include <vector>

namespace mgrid {

/// Angle-droop frequency control gains.
struct FrequencyGains {
    double kp = 0.06;  ///< droop gain [rad/s per A]
    double kI = 40.0;  ///< angle damping gain [1/s]
    bool operator==(const FrequencyGains&) const = default;
};

/// DC-link voltage PI gains.
struct DcGains {
    double Lambda_P = 1.0;    ///< [A/V]
    double Lambda_I = 10.0;   ///< [A/(V s)]
    double vdc_ref = 1000.0;  ///< [V]
    bool operator==(const DcGains&) const = default;
};

/// Double-loop AC voltage control gains.
struct AcGains {
    double cp = 1.0;           ///< outer-loop proportional gain
    double cI = 10.0;          ///< outer-loop integral gain
    double lambda_P = 1e-3;    ///< inner-loop proportional gain
    double lambda_I = 25e-3;   ///< inner-loop integral gain
    double nq = 0.078;         ///< voltage droop on i_oQ [Ohm]
    double Vn = 311.0;         ///< nominal (peak phase) voltage [V]
    double i_max = std::numeric_limits<double>::infinity();  ///< reference current limit [A]
    bool operator==(const AcGains&) const = default;
};

struct ControlGains {
    FrequencyGains freq;
    DcGains dc;
    AcGains ac;

    void validate() const;
    bool operator==(const ControlGains&) const = default;
};

/// omega = omega0 - kp i_oD - kI delta + chi.
double frequency_law(const Vec2& io, double delta, const FrequencyGains& gains, double chi, double omega0);

/// Swing-equation reading of the angle droop: M = 1/kp (inertia), D = kI/kp (damping).
struct SwingForm {
    double M = 0.0;
    double D = 0.0;
};

SwingForm swing_form(const FrequencyGains& gains);

struct DcLawOutput {
    double idc = 0.0;       ///< commanded DC source current [A]
    double zeta_dot = 0.0;  ///< integrator derivative [V]
};

DcLawOutput dc_law(double vdc, double zeta, const DcGains& gains);

struct AcLawOutput {
    Vec2 m = Vec2::Zero();          ///< modulation signal
    Vec2 beta_dot = Vec2::Zero();   ///< outer integrator derivative
    Vec2 xi_dot = Vec2::Zero();     ///< inner integrator derivative
    Vec2 i_ref = Vec2::Zero();      ///< (possibly limited) current reference
    bool limited = false;           ///< current limit engaged
};

/// Reference magnitude clamp preserving direction.
Vec2 current_limit(const Vec2& i_ref, double i_max);

/// Outer PI on v_o - T(delta) e Vn - nq e2 i_o, inner PI on the power imbalance
/// i v_dc,ref - i_ref v_dc. With the limit engaged the outer integrator is frozen.
AcLawOutput ac_voltage_law(const InverterState& state,
                           const Vec2& beta,
                           const Vec2& xi,
                           const AcGains& gains,
                           double vdc_ref);

/// Inverter plus its local controllers (secondary set-point chi handled outside).
struct UnitState {
    InverterState phys;
    double zeta = 0.0;
    Vec2 beta = Vec2::Zero();
    Vec2 xi = Vec2::Zero();
};

using UnitDerivative = UnitState;

/// Local ordering used for one unit: [delta, zeta, v_dc, i (2), v_o (2), i_o (2), beta (2), xi (2)].
inline constexpr int kUnitStates = 13;
using UnitVector = Eigen::Matrix<double, kUnitStates, 1>;

UnitVector pack_unit(const UnitState& s);
UnitState unpack_unit(const UnitVector& v);

/// Intermediate signals of a closed-loop evaluation.
struct UnitSignals {
    double omega = 0.0;
    double idc = 0.0;
    Vec2 m = Vec2::Zero();
    Vec2 i_ref = Vec2::Zero();
    bool limited = false;
};

/// Closed-loop vector field of one inverter with its primary controllers, bus voltage as input.
UnitDerivative closed_loop_derivatives(const InverterParams& params,
                                       const ControlGains& gains,
                                       const UnitState& state,
                                       const Vec2& vb,
                                       double chi,
                                       double omega0,
                                       UnitSignals* signals = nullptr);

/// Stacks n units blockwise as [delta (n), zeta (n), v_dc (n), I (2n), V_o (2n), I_o (2n),
/// beta (2n), xi (2n)], the 13n ordering shared by the equilibrium solver and the linearization.
Vector stack_units(std::span<const UnitState> units);

/// Inverse of stack_units.
std::vector<UnitState> unstack_units(const Vector& stacked, int count);

/// Flat start: zero angle and currents, v_dc at reference, v_o at nominal voltage on the D axis.
UnitState flat_start_unit(const ControlGains& gains);

} // namespace mgrid
