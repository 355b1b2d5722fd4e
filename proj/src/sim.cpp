// SPDX-License-Identifier: Apache-2.0
#include "mgrid/sim.hpp"

#include "mgrid/error.hpp"
#include "mgrid/linearize.hpp"
#include "mgrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace mgrid {

const char* to_string(EventKind kind)
{
    switch (kind) {
    case EventKind::LoadStep:
        return "load-step";
    case EventKind::InverterConnect:
        return "inverter-connect";
    case EventKind::InverterDisconnect:
        return "inverter-disconnect";
    case EventKind::SecondaryEnable:
        return "secondary-enable";
    }
    return "unknown";
}

void Scenario::validate() const
{
    spec.validate();
    if (!(horizon > 0.0)) {
        throw ModelError("horizon must be positive");
    }
    if (!(integrator.step > 0.0) || !(integrator.output_interval > 0.0) || !(integrator.max_step > 0.0) ||
        !(integrator.atol > 0.0) || !(integrator.rtol > 0.0)) {
        throw ModelError("integrator settings must be positive");
    }
    for (std::size_t k = 0; k < events.size(); ++k) {
        const Event& ev = events[k];
        const std::string who = "event " + std::to_string(k + 1);
        if (!(ev.time >= 0.0 && ev.time <= horizon)) {
            throw ModelError(who + ": time outside [0, horizon]");
        }
        switch (ev.kind) {
        case EventKind::LoadStep:
            if (ev.target >= spec.switched_loads.size()) {
                throw ModelError(who + ": unknown switched load");
            }
            break;
        case EventKind::InverterConnect:
        case EventKind::InverterDisconnect:
            if (ev.target >= spec.inverters.size()) {
                throw ModelError(who + ": unknown inverter");
            }
            break;
        case EventKind::SecondaryEnable:
            if (!spec.secondary.enabled) {
                throw ModelError(who + ": secondary control is not configured");
            }
            break;
        }
    }
    if (initial.mode == InitialMode::Explicit && initial.x.size() != StateLayout(spec).size) {
        throw ModelError("explicit initial state has length " + std::to_string(initial.x.size()) + ", expected " +
                         std::to_string(StateLayout(spec).size));
    }
}

std::size_t Trajectory::channel_index(const std::string& name) const
{
    const auto it = std::find(channel_names.begin(), channel_names.end(), name);
    if (it == channel_names.end()) {
        throw ModelError("unknown channel " + name);
    }
    return static_cast<std::size_t>(it - channel_names.begin());
}

const std::vector<double>& Trajectory::channel(const std::string& name) const
{
    return channels[channel_index(name)];
}

namespace {

const char* const kChannelStems[] = {"f", "P", "Q", "vo", "voD", "voQ", "vdc", "ioD", "ioQ", "delta", "chi", "m"};
constexpr std::size_t kChannelsPerInverter = std::size(kChannelStems);

void check_finite(const SystemModel& model, const Vector& x, double t_valid)
{
    if (x.allFinite()) {
        return;
    }
    Eigen::Index bad = 0;
    while (bad < x.size() && std::isfinite(x[bad])) {
        ++bad;
    }
    throw IntegrationError("state " + model.state_name(bad) + " became non-finite after t = " +
                               std::to_string(t_valid) + " s",
                           t_valid);
}

/// Workspace-holding single-step integrators.
class Stepper {
public:
    Stepper(const SystemModel& model, const IntegratorSettings& settings)
        : model_(model), settings_(settings), h_(settings.step)
    {
    }

    /// Advances x from t towards at most t_target. Returns the time reached.
    double step(Vector& x, double t, double t_target, ModelDiagnostics* diag)
    {
        return settings_.method == IntegratorMethod::Rk4 ? rk4(x, t, t_target, diag) : dopri(x, t, t_target, diag);
    }

private:
    static double clip(double h, double t, double t_target)
    {
        const double remaining = t_target - t;
        if (h >= remaining || remaining - h < 1e-3 * h) {
            return remaining;
        }
        return h;
    }

    double rk4(Vector& x, double t, double t_target, ModelDiagnostics* diag)
    {
        const double h = clip(settings_.step, t, t_target);
        model_.derivatives(x, k1_, diag);
        tmp_ = x + 0.5 * h * k1_;
        model_.derivatives(tmp_, k2_);
        tmp_ = x + 0.5 * h * k2_;
        model_.derivatives(tmp_, k3_);
        tmp_ = x + h * k3_;
        model_.derivatives(tmp_, k4_);
        x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
        return h == t_target - t ? t_target : t + h;
    }

    double dopri(Vector& x, double t, double t_target, ModelDiagnostics* diag)
    {
        static constexpr double a21 = 1.0 / 5.0;
        static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                                a54 = -212.0 / 729.0;
        static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                                a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
        static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                                b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
        static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                                e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double h = clip(std::min(h_, settings_.max_step), t, t_target);
            model_.derivatives(x, k1_, attempt == 0 ? diag : nullptr);
            tmp_ = x + h * a21 * k1_;
            model_.derivatives(tmp_, k2_);
            tmp_ = x + h * (a31 * k1_ + a32 * k2_);
            model_.derivatives(tmp_, k3_);
            tmp_ = x + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
            model_.derivatives(tmp_, k4_);
            tmp_ = x + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
            model_.derivatives(tmp_, k5_);
            tmp_ = x + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
            model_.derivatives(tmp_, k6_);
            x_new_ = x + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
            model_.derivatives(x_new_, k7_);
            err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
            double acc = 0.0;
            for (Eigen::Index k = 0; k < x.size(); ++k) {
                const double sc = settings_.atol + settings_.rtol * std::max(std::abs(x[k]), std::abs(x_new_[k]));
                acc += (err_[k] / sc) * (err_[k] / sc);
            }
            const double err = std::sqrt(acc / static_cast<double>(x.size()));
            if (!std::isfinite(err)) {
                h_ = 0.2 * h;
                continue;
            }
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (err <= 1.0) {
                x = x_new_;
                if (h == t_target - t) {
                    h_ = std::max(h_, h * factor);
                    return t_target;
                }
                h_ = h * factor;
                return t + h;
            }
            h_ = h * factor;
            if (h_ < 1e-14) {
                break;
            }
        }
        throw IntegrationError("adaptive step size underflow after t = " + std::to_string(t) + " s", t);
    }

    const SystemModel& model_;
    IntegratorSettings settings_;
    double h_;
    Vector k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, x_new_, err_;
};

void record(Trajectory& traj, const SystemModel& model, double t, const Vector& x)
{
    traj.time.push_back(t);
    traj.states.push_back(x);
    const std::vector<double> values = evaluate_channels(model, x);
    for (std::size_t c = 0; c < values.size(); ++c) {
        traj.channels[c].push_back(values[c]);
    }
}

void apply_event(const Event& ev, SystemModel& model, Vector& x, Trajectory& traj)
{
    char buffer[96];
    std::snprintf(buffer, sizeof(buffer), "t=%.6g s: %s", ev.time, to_string(ev.kind));
    std::string msg = buffer;
    switch (ev.kind) {
    case EventKind::LoadStep:
        model.set_switched_load(ev.target, ev.on);
        msg += " '" + model.spec().switched_loads[ev.target].name + "' " + (ev.on ? "on" : "off");
        break;
    case EventKind::InverterConnect:
        if (!model.inverter_active(static_cast<int>(ev.target))) {
            model.initialize_connecting_unit(x, static_cast<int>(ev.target));
            model.set_inverter_active(static_cast<int>(ev.target), true);
        }
        msg += " inverter " + std::to_string(ev.target + 1);
        break;
    case EventKind::InverterDisconnect:
        model.set_inverter_active(static_cast<int>(ev.target), false);
        msg += " inverter " + std::to_string(ev.target + 1);
        break;
    case EventKind::SecondaryEnable:
        model.set_secondary_active(ev.on);
        msg += ev.on ? " on" : " off";
        break;
    }
    traj.log.push_back(msg);
}

} // namespace

std::vector<std::string> channel_names(int inverter_count)
{
    std::vector<std::string> names;
    for (int k = 1; k <= inverter_count; ++k) {
        for (const char* stem : kChannelStems) {
            names.push_back(std::string(stem) + std::to_string(k));
        }
    }
    return names;
}

std::vector<double> evaluate_channels(const SystemModel& model, const Vector& x)
{
    const int n = model.spec().inverter_count();
    std::vector<double> out(kChannelsPerInverter * static_cast<std::size_t>(n),
                            std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < n; ++k) {
        if (!model.inverter_active(k)) {
            continue;
        }
        const UnitState s = model.unit_state(x, k);
        const UnitSignals sig = model.unit_signals(x, k);
        const Vec2& v = s.phys.vo;
        const Vec2& i = s.phys.io;
        double* row = out.data() + kChannelsPerInverter * static_cast<std::size_t>(k);
        row[0] = sig.omega / (2.0 * std::numbers::pi);
        row[1] = kThreePhasePowerScale * v.dot(i);
        row[2] = kThreePhasePowerScale * (v.y() * i.x() - v.x() * i.y());
        row[3] = v.norm();
        row[4] = v.x();
        row[5] = v.y();
        row[6] = s.phys.vdc;
        row[7] = i.x();
        row[8] = i.y();
        row[9] = s.phys.delta;
        row[10] = x[model.layout().chi(k)];
        row[11] = sig.m.norm();
    }
    return out;
}

Vector initial_state(const Scenario& scenario, SystemModel& model)
{
    switch (scenario.initial.mode) {
    case InitialMode::Flat:
        return model.flat_start();
    case InitialMode::Equilibrium:
        return solve_equilibrium(model).x;
    case InitialMode::Explicit:
        if (scenario.initial.x.size() != model.layout().size) {
            throw ModelError("explicit initial state has the wrong length");
        }
        return scenario.initial.x;
    }
    return model.flat_start();
}

Vector integrate(const SystemModel& model, Vector x, double t0, double t1, const IntegratorSettings& settings)
{
    Stepper stepper(model, settings);
    double t = t0;
    while (t < t1) {
        t = stepper.step(x, t, t1, nullptr);
        check_finite(model, x, t);
    }
    return x;
}

Vector settle(const SystemModel& model, Vector x, double max_time, double step, double rate_tol, double* reached)
{
    IntegratorSettings settings;
    settings.step = step;
    Stepper stepper(model, settings);
    const Vector scale = model.state_scale();
    const double check_every = 1e-3;
    double t = 0.0;
    double rate = (scale.cwiseProduct(model.derivatives(x))).norm();
    while (t < max_time && rate >= rate_tol) {
        const double t_next = std::min(t + check_every, max_time);
        while (t < t_next) {
            t = stepper.step(x, t, t_next, nullptr);
        }
        check_finite(model, x, t);
        rate = (scale.cwiseProduct(model.derivatives(x))).norm();
    }
    if (reached) {
        *reached = rate;
    }
    return x;
}

Trajectory simulate(const Scenario& scenario)
{
    scenario.validate();
    SystemModel model(scenario.spec);
    Vector x = initial_state(scenario, model);

    std::vector<Event> events = scenario.events;
    const auto& sec = scenario.spec.secondary;
    if (sec.enabled && sec.activation_time > 0.0 && sec.activation_time <= scenario.horizon) {
        events.push_back({sec.activation_time, EventKind::SecondaryEnable, 0, true});
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });

    Trajectory traj;
    traj.channel_names = channel_names(scenario.spec.inverter_count());
    traj.channels.resize(traj.channel_names.size());

    std::size_t next_event = 0;
    while (next_event < events.size() && events[next_event].time <= 0.0) {
        apply_event(events[next_event++], model, x, traj);
    }
    record(traj, model, 0.0, x);

    Stepper stepper(model, scenario.integrator);
    const double dt_out = scenario.integrator.output_interval;
    std::size_t out_index = 1;
    double t = 0.0;
    while (t < scenario.horizon) {
        const double t_out = std::min(static_cast<double>(out_index) * dt_out, scenario.horizon);
        const double t_event = next_event < events.size() ? events[next_event].time : scenario.horizon;
        const double t_target = std::min(t_out, t_event);
        while (t < t_target) {
            t = stepper.step(x, t, t_target, &traj.diagnostics);
            check_finite(model, x, t);
        }
        if (t_target == t_out) {
            record(traj, model, t, x);
            ++out_index;
        }
        while (next_event < events.size() && events[next_event].time <= t) {
            apply_event(events[next_event++], model, x, traj);
        }
    }
    if (traj.diagnostics.overmodulation > 0) {
        traj.log.push_back("warning: overmodulation in " + std::to_string(traj.diagnostics.overmodulation) +
                           " inverter-steps");
    }
    if (traj.diagnostics.angle_out_of_domain > 0) {
        traj.log.push_back("warning: |delta| >= pi/2 in " + std::to_string(traj.diagnostics.angle_out_of_domain) +
                           " inverter-steps");
    }
    if (traj.diagnostics.cpl_floor_hits > 0) {
        traj.log.push_back("warning: constant-power loads below the voltage floor in " +
                           std::to_string(traj.diagnostics.cpl_floor_hits) + " bus-steps");
    }
    return traj;
}

const ChannelStats& SteadyStateReport::at(const std::string& name) const
{
    for (const auto& c : channels) {
        if (c.name == name) {
            return c;
        }
    }
    throw ModelError("channel " + name + " not in report");
}

SteadyStateReport window_report(const Trajectory& traj, double t_begin, double t_end, double rel_tol, double abs_tol)
{
    SteadyStateReport report;
    report.t_begin = t_begin;
    report.t_end = t_end;
    for (std::size_t c = 0; c < traj.channel_names.size(); ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t s = 0; s < traj.time.size(); ++s) {
            if (traj.time[s] >= t_begin && traj.time[s] <= t_end && std::isfinite(traj.channels[c][s])) {
                sum += traj.channels[c][s];
                ++count;
            }
        }
        if (count == 0) {
            continue;
        }
        ChannelStats stats;
        stats.name = traj.channel_names[c];
        stats.mean = sum / static_cast<double>(count);
        for (std::size_t s = 0; s < traj.time.size(); ++s) {
            if (traj.time[s] >= t_begin && traj.time[s] <= t_end && std::isfinite(traj.channels[c][s])) {
                stats.max_deviation = std::max(stats.max_deviation, std::abs(traj.channels[c][s] - stats.mean));
            }
        }
        stats.settled = stats.max_deviation <= abs_tol + rel_tol * std::abs(stats.mean);
        report.channels.push_back(stats);
    }
    return report;
}

SteadyStateReport steady_state_report(const Trajectory& traj, double window, double rel_tol, double abs_tol)
{
    if (traj.time.empty()) {
        return {};
    }
    const double t_end = traj.time.back();
    return window_report(traj, t_end - window, t_end, rel_tol, abs_tol);
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out)
{
    out << "t";
    for (const auto& name : traj.channel_names) {
        out << ',' << name;
    }
    out << '\n';
    char buffer[32];
    for (std::size_t s = 0; s < traj.time.size(); ++s) {
        std::snprintf(buffer, sizeof(buffer), "%.9g", traj.time[s]);
        out << buffer;
        for (const auto& ch : traj.channels) {
            std::snprintf(buffer, sizeof(buffer), "%.10g", ch[s]);
            out << ',' << buffer;
        }
        out << '\n';
    }
}

} // namespace mgrid
