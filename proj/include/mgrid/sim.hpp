// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linalg.hpp"
#include "mgrid/microgrid.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mgrid {

enum class EventKind { LoadStep, InverterConnect, InverterDisconnect, SecondaryEnable };

const char* to_string(EventKind kind);

/// Configuration change applied at an exact time instant. `target` indexes switched loads
/// (LoadStep) or inverters (connect/disconnect) and is ignored otherwise.
struct Event {
    double time = 0.0;
    EventKind kind = EventKind::LoadStep;
    std::size_t target = 0;
    bool on = true;
    bool operator==(const Event&) const = default;
};

enum class IntegratorMethod { Rk4, DormandPrince };

struct IntegratorSettings {
    IntegratorMethod method = IntegratorMethod::Rk4;
    double step = 5e-6;              ///< fixed step, or initial step for the adaptive method [s]
    double atol = 1e-6;
    double rtol = 1e-4;
    double max_step = 1e-3;          ///< adaptive method only [s]
    double output_interval = 5e-4;   ///< trajectory decimation [s]
    bool operator==(const IntegratorSettings&) const = default;
};

enum class InitialMode { Flat, Equilibrium, Explicit };

struct InitialState {
    InitialMode mode = InitialMode::Flat;
    Vector x;  ///< used by Explicit
};

/// A microgrid plus what happens to it over a time horizon.
struct Scenario {
    MicrogridSpec spec;
    std::vector<Event> events;
    double horizon = 1.0;
    IntegratorSettings integrator;
    InitialState initial;

    /// Throws ModelError for events outside [0, horizon] or with bad targets.
    void validate() const;
};

/// Sampled simulation output.
struct Trajectory {
    std::vector<double> time;
    std::vector<Vector> states;                   ///< full state snapshot per sample
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> channels;    ///< [channel][sample]
    ModelDiagnostics diagnostics;
    std::vector<std::string> log;                 ///< event and warning messages

    std::size_t channel_index(const std::string& name) const;
    const std::vector<double>& channel(const std::string& name) const;
};

/// Names of the per-inverter channels: f (Hz), P (W), Q (var), vo (|v_o| V), voD, voQ (V),
/// vdc (V), ioD, ioQ (A), delta (rad), chi (rad/s), m (|m|). Channel names are suffixed by the
/// 1-based inverter number.
std::vector<std::string> channel_names(int inverter_count);

/// Channel values of one state; inactive inverters give NaN.
std::vector<double> evaluate_channels(const SystemModel& model, const Vector& x);

/// Resolves the initial state of a scenario (solving the equilibrium if requested).
Vector initial_state(const Scenario& scenario, SystemModel& model);

/// Integrates the scenario, applying events at their exact times.
Trajectory simulate(const Scenario& scenario);

/// Integrates a model from x over [t0, t1] without events, returning the final state.
Vector integrate(const SystemModel& model, Vector x, double t0, double t1, const IntegratorSettings& settings);

/// Runs RK4 until the scaled derivative norm drops below `rate_tol` or `max_time` elapses.
/// Returns the final state and writes the reached norm.
Vector settle(const SystemModel& model, Vector x, double max_time, double step, double rate_tol,
              double* reached = nullptr);

/// Window statistics of one channel.
struct ChannelStats {
    std::string name;
    double mean = 0.0;
    double max_deviation = 0.0;
    bool settled = true;
};

struct SteadyStateReport {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<ChannelStats> channels;

    const ChannelStats& at(const std::string& name) const;
};

/// Statistics over [t_begin, t_end]. A channel is flagged unsettled when its maximum deviation
/// from the mean exceeds abs_tol + rel_tol |mean|. Channels that are NaN in the window are skipped.
SteadyStateReport window_report(const Trajectory& traj, double t_begin, double t_end, double rel_tol = 1e-3,
                                double abs_tol = 1e-3);

/// Statistics over the final `window` seconds.
SteadyStateReport steady_state_report(const Trajectory& traj, double window, double rel_tol = 1e-3,
                                      double abs_tol = 1e-3);

/// Writes "t,<channels>" followed by one row per sample.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

} // namespace mgrid
