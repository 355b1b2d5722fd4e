// SPDX-License-Identifier: Apache-2.0
#include "mgrid/controllers.hpp"

#include "mgrid/error.hpp"
#include "mgrid/frames.hpp"

#include <cmath>
#include <string>

namespace mgrid {

void ControlGains::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) {
            throw ModelError(std::string("controller gain ") + name + " must be positive");
        }
    };
    positive(freq.kp, "kp");
    if (!(freq.kI >= 0.0)) {
        throw ModelError("controller gain kI must be non-negative");
    }
    positive(dc.Lambda_P, "Lambda_P");
    positive(dc.Lambda_I, "Lambda_I");
    positive(dc.vdc_ref, "vdc_ref");
    positive(ac.cp, "cp");
    positive(ac.cI, "cI");
    positive(ac.lambda_P, "lambda_P");
    positive(ac.lambda_I, "lambda_I");
    positive(ac.Vn, "Vn");
    positive(ac.i_max, "i_max");
    if (!(ac.nq >= 0.0)) {
        throw ModelError("controller gain nq must be non-negative");
    }
}

double frequency_law(const Vec2& io, double delta, const FrequencyGains& gains, double chi, double omega0)
{
    return omega0 - gains.kp * io.x() - gains.kI * delta + chi;
}

SwingForm swing_form(const FrequencyGains& gains)
{
    if (!(gains.kp > 0.0)) {
        throw ModelError("swing form needs kp > 0");
    }
    return {1.0 / gains.kp, gains.kI / gains.kp};
}

DcLawOutput dc_law(double vdc, double zeta, const DcGains& gains)
{
    const double err = vdc - gains.vdc_ref;
    return {-gains.Lambda_P * err - gains.Lambda_I * zeta, err};
}

Vec2 current_limit(const Vec2& i_ref, double i_max)
{
    const double mag = i_ref.norm();
    if (mag <= i_max) {
        return i_ref;
    }
    return i_ref * (i_max / mag);
}

AcLawOutput ac_voltage_law(const InverterState& s,
                           const Vec2& beta,
                           const Vec2& xi,
                           const AcGains& g,
                           double vdc_ref)
{
    AcLawOutput out;
    const Vec2 target = rotation(s.delta) * Vec2(g.Vn, 0.0);
    // nq e2 i_o only shifts the D-axis set-point by nq i_oQ
    const Vec2 err = s.vo - target - Vec2(g.nq * s.io.y(), 0.0);
    const Vec2 raw_ref = -g.cp * err - g.cI * beta;
    out.i_ref = current_limit(raw_ref, g.i_max);
    out.limited = out.i_ref != raw_ref;
    out.beta_dot = out.limited ? Vec2::Zero() : err;
    const Vec2 imbalance = s.i * vdc_ref - out.i_ref * s.vdc;
    out.xi_dot = imbalance;
    out.m = -g.lambda_P * imbalance - g.lambda_I * xi;
    return out;
}

UnitVector pack_unit(const UnitState& s)
{
    UnitVector v;
    v << s.phys.delta, s.zeta, s.phys.vdc, s.phys.i, s.phys.vo, s.phys.io, s.beta, s.xi;
    return v;
}

UnitState unpack_unit(const UnitVector& v)
{
    UnitState s;
    s.phys.delta = v[0];
    s.zeta = v[1];
    s.phys.vdc = v[2];
    s.phys.i = v.segment<2>(3);
    s.phys.vo = v.segment<2>(5);
    s.phys.io = v.segment<2>(7);
    s.beta = v.segment<2>(9);
    s.xi = v.segment<2>(11);
    return s;
}

UnitDerivative closed_loop_derivatives(const InverterParams& params,
                                       const ControlGains& gains,
                                       const UnitState& state,
                                       const Vec2& vb,
                                       double chi,
                                       double omega0,
                                       UnitSignals* signals)
{
    const double omega = frequency_law(state.phys.io, state.phys.delta, gains.freq, chi, omega0);
    const DcLawOutput dc = dc_law(state.phys.vdc, state.zeta, gains.dc);
    const AcLawOutput ac = ac_voltage_law(state.phys, state.beta, state.xi, gains.ac, gains.dc.vdc_ref);
    UnitDerivative d;
    d.phys = inverter_derivatives(params, state.phys, ac.m, dc.idc, vb, omega, omega0);
    d.zeta = dc.zeta_dot;
    d.beta = ac.beta_dot;
    d.xi = ac.xi_dot;
    if (signals) {
        *signals = {omega, dc.idc, ac.m, ac.i_ref, ac.limited};
    }
    return d;
}

Vector stack_units(std::span<const UnitState> units)
{
    const auto n = static_cast<Eigen::Index>(units.size());
    Vector out(kUnitStates * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const UnitState& s = units[static_cast<std::size_t>(k)];
        out[k] = s.phys.delta;
        out[n + k] = s.zeta;
        out[2 * n + k] = s.phys.vdc;
        out.segment<2>(3 * n + 2 * k) = s.phys.i;
        out.segment<2>(5 * n + 2 * k) = s.phys.vo;
        out.segment<2>(7 * n + 2 * k) = s.phys.io;
        out.segment<2>(9 * n + 2 * k) = s.beta;
        out.segment<2>(11 * n + 2 * k) = s.xi;
    }
    return out;
}

std::vector<UnitState> unstack_units(const Vector& stacked, int count)
{
    const Eigen::Index n = count;
    if (stacked.size() != kUnitStates * n) {
        throw ModelError("stacked unit vector has wrong length");
    }
    std::vector<UnitState> out(static_cast<std::size_t>(count));
    for (Eigen::Index k = 0; k < n; ++k) {
        UnitState& s = out[static_cast<std::size_t>(k)];
        s.phys.delta = stacked[k];
        s.zeta = stacked[n + k];
        s.phys.vdc = stacked[2 * n + k];
        s.phys.i = stacked.segment<2>(3 * n + 2 * k);
        s.phys.vo = stacked.segment<2>(5 * n + 2 * k);
        s.phys.io = stacked.segment<2>(7 * n + 2 * k);
        s.beta = stacked.segment<2>(9 * n + 2 * k);
        s.xi = stacked.segment<2>(11 * n + 2 * k);
    }
    return out;
}

UnitState flat_start_unit(const ControlGains& gains)
{
    UnitState s;
    s.phys.vdc = gains.dc.vdc_ref;
    s.phys.vo = Vec2(gains.ac.Vn, 0.0);
    return s;
}

} // namespace mgrid
