// SPDX-License-Identifier: Apache-2.0
#include "mgrid/microgrid.hpp"

#include "mgrid/error.hpp"
#include "mgrid/frames.hpp"

#include <cmath>
#include <string>

namespace mgrid {

void MicrogridSpec::validate() const
{
    network.validate();
    const auto buses = static_cast<std::size_t>(network.bus_count());
    if (inverters.empty()) {
        throw ModelError("microgrid needs at least one inverter");
    }
    for (std::size_t k = 0; k < inverters.size(); ++k) {
        const auto& inv = inverters[k];
        const std::string who = "inverter " + std::to_string(k + 1);
        if (inv.bus < 0 || inv.bus >= network.bus_count()) {
            throw ModelError(who + ": bus index out of range");
        }
        try {
            inv.params.validate();
            inv.gains.validate();
        } catch (const ModelError& e) {
            throw ModelError(who + ": " + e.what());
        }
    }
    if ((!cpl_P.empty() && cpl_P.size() != buses) || (!cpl_Q.empty() && cpl_Q.size() != buses)) {
        throw ModelError("constant-power load arrays must have one entry per bus");
    }
    for (std::size_t k = 0; k < switched_loads.size(); ++k) {
        if (switched_loads[k].bus < 0 || switched_loads[k].bus >= network.bus_count()) {
            throw ModelError("switched load " + std::to_string(k + 1) + ": bus index out of range");
        }
    }
    if (secondary.enabled) {
        if (!(secondary.alpha > 0.0)) {
            throw ModelError("secondary control: alpha must be positive");
        }
        const Graph g = communication_graph();
        if (g.bus_count() != inverter_count()) {
            throw ModelError("secondary control: communication graph must have one node per inverter");
        }
    }
}

Graph MicrogridSpec::communication_graph() const
{
    if (secondary.comm_graph) {
        return *secondary.comm_graph;
    }
    bool identity_map = inverter_count() == network.bus_count();
    for (int k = 0; identity_map && k < inverter_count(); ++k) {
        identity_map = inverters[static_cast<std::size_t>(k)].bus == k;
    }
    if (!identity_map) {
        throw ModelError("secondary control: communication edges must be given when inverters do not map "
                         "one-to-one onto buses");
    }
    return network.graph;
}

StateLayout::StateLayout(const MicrogridSpec& spec)
    : n(spec.inverter_count()),
      network_offset(14 * n),
      size(14 * n + NetworkState::packed_size(spec.network))
{
}

std::vector<Eigen::Index> StateLayout::unit_indices(Eigen::Index k) const
{
    return {delta(k), zeta(k), vdc(k), i(k), i(k) + 1, vo(k), vo(k) + 1, io(k), io(k) + 1,
            beta(k), beta(k) + 1, xi(k), xi(k) + 1};
}

SystemModel::SystemModel(MicrogridSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
    layout_ = StateLayout(spec_);
    if (spec_.secondary.enabled) {
        comm_graph_ = spec_.communication_graph();
    }
    for (const auto& inv : spec_.inverters) {
        active_.push_back(inv.connected);
    }
    for (const auto& load : spec_.switched_loads) {
        load_on_.push_back(load.on);
    }
    secondary_active_ = spec_.secondary.enabled && spec_.secondary.activation_time <= 0.0;
    recompute_loads();
}

void SystemModel::set_inverter_active(int k, bool active)
{
    if (k < 0 || k >= spec_.inverter_count()) {
        throw ModelError("inverter index " + std::to_string(k + 1) + " out of range");
    }
    active_[static_cast<std::size_t>(k)] = active;
}

void SystemModel::set_switched_load(std::size_t idx, bool on)
{
    if (idx >= load_on_.size()) {
        throw ModelError("switched load index " + std::to_string(idx + 1) + " out of range");
    }
    load_on_[idx] = on;
    recompute_loads();
}

void SystemModel::recompute_loads()
{
    const auto buses = static_cast<std::size_t>(spec_.network.bus_count());
    bus_P_.assign(buses, 0.0);
    bus_Q_.assign(buses, 0.0);
    for (std::size_t b = 0; b < buses; ++b) {
        if (!spec_.cpl_P.empty()) {
            bus_P_[b] += spec_.cpl_P[b];
        }
        if (!spec_.cpl_Q.empty()) {
            bus_Q_[b] += spec_.cpl_Q[b];
        }
    }
    for (std::size_t k = 0; k < spec_.switched_loads.size(); ++k) {
        if (load_on_[k]) {
            const auto& load = spec_.switched_loads[k];
            bus_P_[static_cast<std::size_t>(load.bus)] += load.P;
            bus_Q_[static_cast<std::size_t>(load.bus)] += load.Q;
        }
    }
}

UnitState SystemModel::unit_state(const Vector& x, int k) const
{
    const auto& L = layout_;
    UnitState s;
    s.phys.delta = x[L.delta(k)];
    s.zeta = x[L.zeta(k)];
    s.phys.vdc = x[L.vdc(k)];
    s.phys.i = x.segment<2>(L.i(k));
    s.phys.vo = x.segment<2>(L.vo(k));
    s.phys.io = x.segment<2>(L.io(k));
    s.beta = x.segment<2>(L.beta(k));
    s.xi = x.segment<2>(L.xi(k));
    return s;
}

void SystemModel::set_unit_state(Vector& x, int k, const UnitState& s) const
{
    const auto& L = layout_;
    x[L.delta(k)] = s.phys.delta;
    x[L.zeta(k)] = s.zeta;
    x[L.vdc(k)] = s.phys.vdc;
    x.segment<2>(L.i(k)) = s.phys.i;
    x.segment<2>(L.vo(k)) = s.phys.vo;
    x.segment<2>(L.io(k)) = s.phys.io;
    x.segment<2>(L.beta(k)) = s.beta;
    x.segment<2>(L.xi(k)) = s.xi;
}

Vector SystemModel::chi(const Vector& x) const { return x.segment(layout_.chi(0), layout_.n); }

NetworkState SystemModel::network_state(const Vector& x) const
{
    return NetworkState::unpack(spec_.network, x.tail(layout_.size - layout_.network_offset));
}

Vector SystemModel::injected_currents(const Vector& x) const
{
    Vector inj = Vector::Zero(2 * spec_.network.bus_count());
    for (int k = 0; k < spec_.inverter_count(); ++k) {
        if (active_[static_cast<std::size_t>(k)]) {
            inj.segment<2>(2 * spec_.inverters[static_cast<std::size_t>(k)].bus) += x.segment<2>(layout_.io(k));
        }
    }
    return inj;
}

UnitSignals SystemModel::unit_signals(const Vector& x, int k) const
{
    const auto& inv = spec_.inverters[static_cast<std::size_t>(k)];
    const Vec2 vb = x.segment<2>(layout_.network_offset + 2 * inv.bus);
    UnitSignals sig;
    closed_loop_derivatives(inv.params, inv.gains, unit_state(x, k), vb, x[layout_.chi(k)],
                            spec_.network.omega0, &sig);
    return sig;
}

void SystemModel::derivatives(const Vector& x, Vector& dx, ModelDiagnostics* diagnostics) const
{
    if (x.size() != layout_.size) {
        throw ModelError("state vector has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(layout_.size));
    }
    dx.setZero(layout_.size);
    const double w0 = spec_.network.omega0;
    const int n = spec_.inverter_count();
    for (int k = 0; k < n; ++k) {
        if (!active_[static_cast<std::size_t>(k)]) {
            continue;
        }
        const auto& inv = spec_.inverters[static_cast<std::size_t>(k)];
        const Vec2 vb = x.segment<2>(layout_.network_offset + 2 * inv.bus);
        UnitSignals sig;
        const UnitDerivative d =
            closed_loop_derivatives(inv.params, inv.gains, unit_state(x, k), vb, x[layout_.chi(k)], w0, &sig);
        set_unit_state(dx, k, d);
        if (diagnostics) {
            diagnostics->overmodulation += overmodulated(sig.m) ? 1 : 0;
            diagnostics->angle_out_of_domain += Angle{x[layout_.delta(k)]}.in_domain() ? 0 : 1;
            diagnostics->current_limit_active += sig.limited ? 1 : 0;
        }
    }
    if (secondary_active_) {
        for (const Edge& e : comm_graph_.edges()) {
            const auto a = static_cast<std::size_t>(e.source);
            const auto b = static_cast<std::size_t>(e.sink);
            if (!active_[a] || !active_[b]) {
                continue;
            }
            const double alpha = spec_.secondary.alpha;
            const double kIa = spec_.inverters[a].gains.freq.kI;
            const double kIb = spec_.inverters[b].gains.freq.kI;
            const double diff = (x[layout_.chi(e.source)] - kIa * x[layout_.delta(e.source)]) -
                                (x[layout_.chi(e.sink)] - kIb * x[layout_.delta(e.sink)]);
            dx[layout_.chi(e.source)] -= alpha * diff;
            dx[layout_.chi(e.sink)] += alpha * diff;
        }
    }
    const Eigen::Index net_size = layout_.size - layout_.network_offset;
    NetworkDiagnostics net_diag;
    network_derivatives_into(spec_.network, x.segment(layout_.network_offset, net_size), injected_currents(x),
                             bus_P_, bus_Q_, dx.segment(layout_.network_offset, net_size), &net_diag);
    if (diagnostics) {
        diagnostics->cpl_floor_hits += net_diag.cpl_floor_hits;
    }
}

Vector SystemModel::derivatives(const Vector& x) const
{
    Vector dx;
    derivatives(x, dx);
    return dx;
}

Vector SystemModel::state_scale() const
{
    Vector s = Vector::Ones(layout_.size);
    for (int k = 0; k < spec_.inverter_count(); ++k) {
        const auto& p = spec_.inverters[static_cast<std::size_t>(k)].params;
        s[layout_.vdc(k)] = p.Cdc;
        s.segment<2>(layout_.i(k)).setConstant(p.Lf);
        s.segment<2>(layout_.vo(k)).setConstant(p.Cf);
        s.segment<2>(layout_.io(k)).setConstant(p.Lc);
    }
    const auto& net = spec_.network;
    const Eigen::Index n = net.bus_count();
    const auto ne = static_cast<Eigen::Index>(net.edge_count());
    const Eigen::Index o = layout_.network_offset;
    for (Eigen::Index b = 0; b < n; ++b) {
        s.segment<2>(o + 2 * b).setConstant(net.shunts[static_cast<std::size_t>(b)].C);
        if (const auto& load = net.rl_loads[static_cast<std::size_t>(b)]) {
            s.segment<2>(o + 2 * n + 2 * ne + 2 * b).setConstant(load->L);
        }
        if (net.cpl.time_constant > 0.0) {
            s.segment<2>(o + 4 * n + 2 * ne + 2 * b).setConstant(net.cpl.time_constant);
        }
    }
    for (Eigen::Index z = 0; z < ne; ++z) {
        s.segment<2>(o + 2 * n + 2 * z).setConstant(net.lines[static_cast<std::size_t>(z)].L);
    }
    return s;
}

std::vector<bool> SystemModel::frozen_mask() const
{
    std::vector<bool> frozen(static_cast<std::size_t>(layout_.size), false);
    auto freeze = [&](Eigen::Index idx) { frozen[static_cast<std::size_t>(idx)] = true; };
    for (int k = 0; k < spec_.inverter_count(); ++k) {
        if (!active_[static_cast<std::size_t>(k)]) {
            for (Eigen::Index idx : layout_.unit_indices(k)) {
                freeze(idx);
            }
            freeze(layout_.chi(k));
        } else if (!secondary_active_) {
            freeze(layout_.chi(k));
        }
    }
    const auto& net = spec_.network;
    const Eigen::Index n = net.bus_count();
    const auto ne = static_cast<Eigen::Index>(net.edge_count());
    const Eigen::Index o = layout_.network_offset;
    for (Eigen::Index b = 0; b < n; ++b) {
        if (!net.rl_loads[static_cast<std::size_t>(b)]) {
            freeze(o + 2 * n + 2 * ne + 2 * b);
            freeze(o + 2 * n + 2 * ne + 2 * b + 1);
        }
        if (net.cpl.time_constant <= 0.0) {
            freeze(o + 4 * n + 2 * ne + 2 * b);
            freeze(o + 4 * n + 2 * ne + 2 * b + 1);
        }
    }
    return frozen;
}

Vector SystemModel::flat_start() const
{
    Vector x = Vector::Zero(layout_.size);
    for (int k = 0; k < spec_.inverter_count(); ++k) {
        set_unit_state(x, k, flat_start_unit(spec_.inverters[static_cast<std::size_t>(k)].gains));
    }
    return x;
}

std::string SystemModel::state_name(Eigen::Index idx) const
{
    const Eigen::Index n = layout_.n;
    auto axis = [](Eigen::Index local) { return local % 2 == 0 ? "_D" : "_Q"; };
    auto unit = [](Eigen::Index k) { return "inverter " + std::to_string(k + 1) + " "; };
    if (idx < 0 || idx >= layout_.size) {
        return "state " + std::to_string(idx);
    }
    if (idx < 3 * n) {
        const char* names[] = {"delta", "zeta", "vdc"};
        return unit(idx % n) + names[idx / n];
    }
    if (idx < 13 * n) {
        const char* names[] = {"i", "vo", "io", "beta", "xi"};
        const Eigen::Index local = idx - 3 * n;
        return unit((local % (2 * n)) / 2) + names[local / (2 * n)] + axis(local);
    }
    if (idx < 14 * n) {
        return unit(idx - 13 * n) + "chi";
    }
    const Eigen::Index b = spec_.network.bus_count();
    const auto ne = static_cast<Eigen::Index>(spec_.network.edge_count());
    Eigen::Index local = idx - layout_.network_offset;
    if (local < 2 * b) {
        return "bus " + std::to_string(local / 2 + 1) + " vb" + axis(local);
    }
    local -= 2 * b;
    if (local < 2 * ne) {
        return "line " + std::to_string(local / 2 + 1) + " current" + axis(local);
    }
    local -= 2 * ne;
    if (local < 2 * b) {
        return "bus " + std::to_string(local / 2 + 1) + " load current" + axis(local);
    }
    local -= 2 * b;
    return "bus " + std::to_string(local / 2 + 1) + " constant-power current" + axis(local);
}

void SystemModel::initialize_connecting_unit(Vector& x, int k) const
{
    const auto& inv = spec_.inverters[static_cast<std::size_t>(k)];
    const Vec2 vb = x.segment<2>(layout_.network_offset + 2 * inv.bus);
    UnitState s = flat_start_unit(inv.gains);
    if (vb.norm() > 0.0) {
        s.phys.delta = std::atan2(vb.y(), vb.x());
        s.phys.vo = vb;
    }
    set_unit_state(x, k, s);
    x[layout_.chi(k)] = 0.0;
}

} // namespace mgrid
