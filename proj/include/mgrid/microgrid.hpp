// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/controllers.hpp"
#include "mgrid/inverter.hpp"
#include "mgrid/linalg.hpp"
#include "mgrid/network.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mgrid {

/// One grid-forming unit attached to a bus.
struct InverterUnit {
    int bus = 0;              ///< 0-based bus index
    InverterParams params;
    ControlGains gains;
    bool connected = true;    ///< connected at t = 0
    bool operator==(const InverterUnit&) const = default;
};

/// Constant-power load that can be switched by events.
struct SwitchedLoad {
    std::string name;
    int bus = 0;
    double P = 0.0;  ///< [W] at nominal voltage
    double Q = 0.0;  ///< [var] at nominal voltage
    bool on = false;  ///< state at t = 0
    bool operator==(const SwitchedLoad&) const = default;
};

struct SecondarySpec {
    bool enabled = false;
    double alpha = 667.0;          ///< consensus gain [1/s]
    double activation_time = 0.0;  ///< [s]
    /// Communication graph over inverters; defaults to the electrical graph when every bus
    /// hosts exactly one inverter with inverter j on bus j.
    std::optional<Graph> comm_graph;
    bool operator==(const SecondarySpec&) const = default;
};

/// Declarative microgrid description: network, loads, inverters and secondary control.
struct MicrogridSpec {
    NetworkParams network;
    std::vector<InverterUnit> inverters;
    std::vector<double> cpl_P;  ///< permanent constant-power demand per bus [W]
    std::vector<double> cpl_Q;  ///< [var]
    std::vector<SwitchedLoad> switched_loads;
    SecondarySpec secondary;

    int inverter_count() const noexcept { return static_cast<int>(inverters.size()); }

    /// Throws ModelError with the offending element named.
    void validate() const;

    /// The graph used by the secondary law.
    Graph communication_graph() const;

    bool operator==(const MicrogridSpec&) const = default;
};

/// Index map of the full state: 13n unit block (stack_units order), chi (n), packed network.
struct StateLayout {
    Eigen::Index n = 0;
    Eigen::Index network_offset = 0;
    Eigen::Index size = 0;

    StateLayout() = default;
    explicit StateLayout(const MicrogridSpec& spec);

    Eigen::Index delta(Eigen::Index k) const { return k; }
    Eigen::Index zeta(Eigen::Index k) const { return n + k; }
    Eigen::Index vdc(Eigen::Index k) const { return 2 * n + k; }
    Eigen::Index i(Eigen::Index k) const { return 3 * n + 2 * k; }
    Eigen::Index vo(Eigen::Index k) const { return 5 * n + 2 * k; }
    Eigen::Index io(Eigen::Index k) const { return 7 * n + 2 * k; }
    Eigen::Index beta(Eigen::Index k) const { return 9 * n + 2 * k; }
    Eigen::Index xi(Eigen::Index k) const { return 11 * n + 2 * k; }
    Eigen::Index chi(Eigen::Index k) const { return 13 * n + k; }
    Eigen::Index units_size() const { return 13 * n; }

    /// All 13 entries of unit k in local order.
    std::vector<Eigen::Index> unit_indices(Eigen::Index k) const;
};

/// Counters for conditions flagged during evaluation.
struct ModelDiagnostics {
    std::size_t overmodulation = 0;
    std::size_t angle_out_of_domain = 0;
    std::size_t cpl_floor_hits = 0;
    std::size_t current_limit_active = 0;
};

/// Full closed-loop microgrid as an ODE x' = f(x) with a mutable switching configuration.
class SystemModel {
public:
    explicit SystemModel(MicrogridSpec spec);

    const MicrogridSpec& spec() const noexcept { return spec_; }
    const StateLayout& layout() const noexcept { return layout_; }

    bool inverter_active(int k) const { return active_.at(static_cast<std::size_t>(k)); }
    const std::vector<bool>& active_mask() const noexcept { return active_; }
    void set_inverter_active(int k, bool active);

    bool switched_load_on(std::size_t idx) const { return load_on_.at(idx); }
    void set_switched_load(std::size_t idx, bool on);

    bool secondary_active() const noexcept { return secondary_active_; }
    void set_secondary_active(bool active) { secondary_active_ = active; }

    /// Currently demanded constant power per bus.
    const std::vector<double>& bus_P() const noexcept { return bus_P_; }
    const std::vector<double>& bus_Q() const noexcept { return bus_Q_; }

    void derivatives(const Vector& x, Vector& dx, ModelDiagnostics* diagnostics = nullptr) const;
    Vector derivatives(const Vector& x) const;

    /// Multiplies each derivative by its storage element (C, L, or 1) so that residual entries
    /// are currents, voltages or plain rates.
    Vector state_scale() const;

    /// Entries whose derivative vanishes identically in the current configuration
    /// (inactive units, frozen chi, unused load slots).
    std::vector<bool> frozen_mask() const;

    /// Flat start: every unit from flat_start_unit, network at zero.
    Vector flat_start() const;

    UnitState unit_state(const Vector& x, int k) const;
    void set_unit_state(Vector& x, int k, const UnitState& s) const;
    Vector chi(const Vector& x) const;
    NetworkState network_state(const Vector& x) const;

    /// Sum of active inverter output currents per bus (2 x buses).
    Vector injected_currents(const Vector& x) const;

    UnitSignals unit_signals(const Vector& x, int k) const;

    /// Human-readable name of a state entry, e.g. "inverter 2 vo_D" or "bus 3 vb_Q".
    std::string state_name(Eigen::Index idx) const;

    /// Initializes a connecting unit from the measured voltage of its bus.
    void initialize_connecting_unit(Vector& x, int k) const;

private:
    void recompute_loads();

    MicrogridSpec spec_;
    StateLayout layout_;
    Graph comm_graph_;
    std::vector<bool> active_;
    std::vector<bool> load_on_;
    bool secondary_active_ = false;
    std::vector<double> bus_P_;
    std::vector<double> bus_Q_;
};

} // namespace mgrid
