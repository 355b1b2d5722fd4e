// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linalg.hpp"

#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace mgrid {

/// Directed edge between two buses (0-based). Direction only fixes the sign of line currents.
struct Edge {
    int source = 0;
    int sink = 0;

    bool operator==(const Edge&) const = default;
};

/// Connected multigraph without self-loops. Used for both the electrical and the
/// communication topology.
class Graph {
public:
    Graph() = default;
    Graph(int bus_count, std::vector<Edge> edges);

    int bus_count() const noexcept { return bus_count_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    /// Adjacency lists; parallel edges appear once per edge.
    std::vector<std::vector<int>> neighbors() const;

    bool operator==(const Graph&) const = default;

private:
    int bus_count_ = 0;
    std::vector<Edge> edges_;
};

/// Node-edge incidence matrix: +1 at the source bus, -1 at the sink bus.
Matrix incidence_matrix(const Graph& graph);

/// Graph Laplacian B B^T.
Matrix laplacian(const Graph& graph);

/// Ring 0-1-...-(n-1)-0 (a single edge for n = 2, no edges for n = 1).
Graph ring_graph(int bus_count);

/// Path 0-1-...-(n-1).
Graph path_graph(int bus_count);

struct LineParams {
    double R = 0.0;  ///< series resistance [Ohm]
    double L = 0.0;  ///< series inductance [H]
    bool operator==(const LineParams&) const = default;
};

/// Shunt elements lumped at a bus (both halves of the adjoining pi-sections).
struct BusShunt {
    double C = 0.0;  ///< [F]
    double G = 0.0;  ///< [S]
    bool operator==(const BusShunt&) const = default;
};

/// Series resistive-inductive (constant impedance) load.
struct RlLoad {
    double R = 0.0;  ///< [Ohm]
    double L = 0.0;  ///< [H]
    bool operator==(const RlLoad&) const = default;
};

/// Constant-power load behaviour.
struct CplOptions {
    /// Below this voltage magnitude the load draws constant-impedance current [V].
    double voltage_floor = 0.4 * 311.0;
    /// First-order lag on the load current [s]; 0 makes the current algebraic.
    double time_constant = 1e-3;
    bool operator==(const CplOptions&) const = default;
};

/// Three-phase power of peak-amplitude DQ quantities: P = 1.5 (v_D i_D + v_Q i_Q).
inline constexpr double kThreePhasePowerScale = 1.5;

struct NetworkParams {
    Graph graph;
    std::vector<LineParams> lines;                ///< one per edge
    std::vector<BusShunt> shunts;                 ///< one per bus
    std::vector<std::optional<RlLoad>> rl_loads;  ///< one slot per bus
    double omega0 = 2.0 * std::numbers::pi * 50.0;
    CplOptions cpl;

    int bus_count() const noexcept { return graph.bus_count(); }
    std::size_t edge_count() const noexcept { return graph.edge_count(); }

    /// Throws ModelError on dimension mismatch or non-positive parameters.
    void validate() const;

    bool operator==(const NetworkParams&) const = default;
};

/// DQ-frame network state. Packed order: [V_b (2n), I_l (2|E|), I_load (2n), I_cpl (2n)].
struct NetworkState {
    Vector vb;
    Vector il;
    Vector iload;
    Vector icpl;

    static NetworkState zero(const NetworkParams& params);
    static Eigen::Index packed_size(const NetworkParams& params);

    Vector pack() const;
    static NetworkState unpack(const NetworkParams& params, const Vector& packed);
};

/// Counters for non-fatal network events.
struct NetworkDiagnostics {
    std::size_t cpl_floor_hits = 0;
};

/// Current drawn by a constant-power load at bus voltage v. Below the voltage floor the load
/// keeps the admittance it has at the floor.
Vec2 constant_power_current(double P, double Q, const Vec2& v, double voltage_floor);

/// Jacobian of constant_power_current with respect to v.
Mat2 constant_power_jacobian(double P, double Q, const Vec2& v, double voltage_floor);

/// In-place derivative of the packed network state. `P` and `Q` are the per-bus
/// constant-power demands currently switched in.
void network_derivatives_into(const NetworkParams& params,
                              Eigen::Ref<const Vector> x,
                              Eigen::Ref<const Vector> injected,
                              std::span<const double> P,
                              std::span<const double> Q,
                              Eigen::Ref<Vector> dx,
                              NetworkDiagnostics* diagnostics = nullptr);

/// Time derivatives of the line, load and bus-voltage dynamics for a given injection.
NetworkState network_derivatives(const NetworkParams& params,
                                 const NetworkState& state,
                                 const Vector& injected,
                                 std::span<const double> P = {},
                                 std::span<const double> Q = {},
                                 NetworkDiagnostics* diagnostics = nullptr);

/// Static admittance Y1 = (G - w0 C J) + (R_load - w0 L_load J)^-1 + B (R_l - w0 L_l J)^-1 B^T.
Matrix network_admittance_Y1(const NetworkParams& params);

/// Steady state of the constant-impedance network under a constant injection.
NetworkState network_steady_state(const NetworkParams& params, const Vector& injected);

/// Quadratic storage 1/2 x^T diag(C, L_l, L_load) x of a (deviation) state.
double network_storage(const NetworkParams& params, const NetworkState& deviation);

} // namespace mgrid
