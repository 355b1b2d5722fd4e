// SPDX-License-Identifier: Apache-2.0
#include "mgrid/network.hpp"

#include "mgrid/error.hpp"

#include <cmath>
#include <string>

namespace mgrid {

Graph::Graph(int bus_count, std::vector<Edge> edges) : bus_count_(bus_count), edges_(std::move(edges))
{
    if (bus_count_ < 1) {
        throw ModelError("graph needs at least one bus");
    }
    for (std::size_t z = 0; z < edges_.size(); ++z) {
        const auto& e = edges_[z];
        if (e.source < 0 || e.source >= bus_count_ || e.sink < 0 || e.sink >= bus_count_) {
            throw ModelError("edge " + std::to_string(z + 1) + " references a bus outside 1.." +
                             std::to_string(bus_count_));
        }
        if (e.source == e.sink) {
            throw ModelError("edge " + std::to_string(z + 1) + " is a self-loop at bus " +
                             std::to_string(e.source + 1));
        }
    }
    // connectivity by flood fill
    std::vector<bool> seen(static_cast<std::size_t>(bus_count_), false);
    std::vector<int> stack{0};
    seen[0] = true;
    const auto adj = neighbors();
    while (!stack.empty()) {
        const int b = stack.back();
        stack.pop_back();
        for (int nb : adj[static_cast<std::size_t>(b)]) {
            if (!seen[static_cast<std::size_t>(nb)]) {
                seen[static_cast<std::size_t>(nb)] = true;
                stack.push_back(nb);
            }
        }
    }
    for (int b = 0; b < bus_count_; ++b) {
        if (!seen[static_cast<std::size_t>(b)]) {
            throw ModelError("graph is not connected: bus " + std::to_string(b + 1) + " is unreachable");
        }
    }
}

std::vector<std::vector<int>> Graph::neighbors() const
{
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(bus_count_));
    for (const auto& e : edges_) {
        adj[static_cast<std::size_t>(e.source)].push_back(e.sink);
        adj[static_cast<std::size_t>(e.sink)].push_back(e.source);
    }
    return adj;
}

Matrix incidence_matrix(const Graph& graph)
{
    Matrix b = Matrix::Zero(graph.bus_count(), static_cast<Eigen::Index>(graph.edge_count()));
    for (std::size_t z = 0; z < graph.edge_count(); ++z) {
        const auto& e = graph.edges()[z];
        b(e.source, static_cast<Eigen::Index>(z)) = 1.0;
        b(e.sink, static_cast<Eigen::Index>(z)) = -1.0;
    }
    return b;
}

Matrix laplacian(const Graph& graph)
{
    const Matrix b = incidence_matrix(graph);
    return b * b.transpose();
}

Graph ring_graph(int bus_count)
{
    std::vector<Edge> edges;
    if (bus_count == 2) {
        edges.push_back({0, 1});
    } else if (bus_count > 2) {
        for (int k = 0; k < bus_count; ++k) {
            edges.push_back({k, (k + 1) % bus_count});
        }
    }
    return Graph(bus_count, std::move(edges));
}

Graph path_graph(int bus_count)
{
    std::vector<Edge> edges;
    for (int k = 0; k + 1 < bus_count; ++k) {
        edges.push_back({k, k + 1});
    }
    return Graph(bus_count, std::move(edges));
}

void NetworkParams::validate() const
{
    const auto n = static_cast<std::size_t>(bus_count());
    if (lines.size() != edge_count()) {
        throw ModelError("expected " + std::to_string(edge_count()) + " line parameter sets, got " +
                         std::to_string(lines.size()));
    }
    if (shunts.size() != n || rl_loads.size() != n) {
        throw ModelError("bus shunt / load arrays must have one entry per bus");
    }
    for (std::size_t z = 0; z < lines.size(); ++z) {
        if (!(lines[z].R > 0.0) || !(lines[z].L > 0.0)) {
            throw ModelError("line " + std::to_string(z + 1) + ": R and L must be positive");
        }
    }
    for (std::size_t b = 0; b < n; ++b) {
        if (!(shunts[b].C > 0.0) || !(shunts[b].G > 0.0)) {
            throw ModelError("bus " + std::to_string(b + 1) + ": shunt C and G must be positive");
        }
        if (rl_loads[b] && (!(rl_loads[b]->R > 0.0) || !(rl_loads[b]->L > 0.0))) {
            throw ModelError("bus " + std::to_string(b + 1) + ": load R and L must be positive");
        }
    }
    if (!(omega0 > 0.0)) {
        throw ModelError("omega0 must be positive");
    }
    if (!(cpl.voltage_floor > 0.0) || cpl.time_constant < 0.0) {
        throw ModelError("constant-power load options out of range");
    }
}

NetworkState NetworkState::zero(const NetworkParams& params)
{
    const Eigen::Index n = params.bus_count();
    const auto e = static_cast<Eigen::Index>(params.edge_count());
    return {Vector::Zero(2 * n), Vector::Zero(2 * e), Vector::Zero(2 * n), Vector::Zero(2 * n)};
}

Eigen::Index NetworkState::packed_size(const NetworkParams& params)
{
    return 6 * params.bus_count() + 2 * static_cast<Eigen::Index>(params.edge_count());
}

Vector NetworkState::pack() const
{
    Vector out(vb.size() + il.size() + iload.size() + icpl.size());
    out << vb, il, iload, icpl;
    return out;
}

NetworkState NetworkState::unpack(const NetworkParams& params, const Vector& packed)
{
    const Eigen::Index n = params.bus_count();
    const auto e = static_cast<Eigen::Index>(params.edge_count());
    if (packed.size() != packed_size(params)) {
        throw ModelError("packed network state has wrong length");
    }
    return {packed.segment(0, 2 * n), packed.segment(2 * n, 2 * e), packed.segment(2 * n + 2 * e, 2 * n),
            packed.segment(4 * n + 2 * e, 2 * n)};
}

Vec2 constant_power_current(double P, double Q, const Vec2& v, double voltage_floor)
{
    const double v2 = std::max(v.squaredNorm(), voltage_floor * voltage_floor);
    const double k = 1.0 / (kThreePhasePowerScale * v2);
    return {k * (P * v.x() + Q * v.y()), k * (P * v.y() - Q * v.x())};
}

Mat2 constant_power_jacobian(double P, double Q, const Vec2& v, double voltage_floor)
{
    Mat2 g;
    g << P, Q, -Q, P;
    const double v2 = v.squaredNorm();
    if (v2 <= voltage_floor * voltage_floor) {
        return g / (kThreePhasePowerScale * voltage_floor * voltage_floor);
    }
    // d/dv [g v / v2] = g / v2 - 2 g v v^T / v2^2
    return (g / v2 - 2.0 * (g * v) * v.transpose() / (v2 * v2)) / kThreePhasePowerScale;
}

void network_derivatives_into(const NetworkParams& params,
                              Eigen::Ref<const Vector> x,
                              Eigen::Ref<const Vector> injected,
                              std::span<const double> P,
                              std::span<const double> Q,
                              Eigen::Ref<Vector> dx,
                              NetworkDiagnostics* diagnostics)
{
    const int n = params.bus_count();
    const auto ne = static_cast<Eigen::Index>(params.edge_count());
    const Eigen::Index o_il = 2 * n;
    const Eigen::Index o_ld = 2 * n + 2 * ne;
    const Eigen::Index o_cp = 4 * n + 2 * ne;
    const double w0 = params.omega0;
    const bool has_power = !P.empty();
    const double tau = params.cpl.time_constant;
    const double floor = params.cpl.voltage_floor;

    // bus current balance: C dV = (-G + w0 C J) V + I_o - I_load - I_cpl - B I_l
    for (int b = 0; b < n; ++b) {
        const Eigen::Index k = 2 * b;
        const auto& sh = params.shunts[static_cast<std::size_t>(b)];
        const double vd = x[k];
        const double vq = x[k + 1];
        double id = injected[k] - sh.G * vd + w0 * sh.C * vq;
        double iq = injected[k + 1] - sh.G * vq - w0 * sh.C * vd;
        if (params.rl_loads[static_cast<std::size_t>(b)]) {
            id -= x[o_ld + k];
            iq -= x[o_ld + k + 1];
        }
        double pd = has_power ? P[static_cast<std::size_t>(b)] : 0.0;
        double qd = has_power && !Q.empty() ? Q[static_cast<std::size_t>(b)] : 0.0;
        if (pd != 0.0 || qd != 0.0) {
            const Vec2 v(vd, vq);
            if (diagnostics && v.squaredNorm() < floor * floor) {
                ++diagnostics->cpl_floor_hits;
            }
            const Vec2 target = constant_power_current(pd, qd, v, floor);
            if (tau > 0.0) {
                dx[o_cp + k] = (target.x() - x[o_cp + k]) / tau;
                dx[o_cp + k + 1] = (target.y() - x[o_cp + k + 1]) / tau;
                id -= x[o_cp + k];
                iq -= x[o_cp + k + 1];
            } else {
                dx[o_cp + k] = 0.0;
                dx[o_cp + k + 1] = 0.0;
                id -= target.x();
                iq -= target.y();
            }
        } else if (tau > 0.0) {
            // a switched-off load still lets its lagged current decay
            dx[o_cp + k] = -x[o_cp + k] / tau;
            dx[o_cp + k + 1] = -x[o_cp + k + 1] / tau;
            id -= x[o_cp + k];
            iq -= x[o_cp + k + 1];
        } else {
            dx[o_cp + k] = 0.0;
            dx[o_cp + k + 1] = 0.0;
        }
        dx[k] = id;
        dx[k + 1] = iq;
    }
    // lines: L dI = (-R + w0 L J) I + B^T V
    for (Eigen::Index z = 0; z < ne; ++z) {
        const auto& e = params.graph.edges()[static_cast<std::size_t>(z)];
        const auto& ln = params.lines[static_cast<std::size_t>(z)];
        const Eigen::Index k = o_il + 2 * z;
        const double i_d = x[k];
        const double i_q = x[k + 1];
        const double dv_d = x[2 * e.source] - x[2 * e.sink];
        const double dv_q = x[2 * e.source + 1] - x[2 * e.sink + 1];
        dx[k] = (-ln.R * i_d + w0 * ln.L * i_q + dv_d) / ln.L;
        dx[k + 1] = (-ln.R * i_q - w0 * ln.L * i_d + dv_q) / ln.L;
        dx[2 * e.source] -= i_d;
        dx[2 * e.source + 1] -= i_q;
        dx[2 * e.sink] += i_d;
        dx[2 * e.sink + 1] += i_q;
    }
    for (int b = 0; b < n; ++b) {
        const Eigen::Index k = 2 * b;
        const double c = params.shunts[static_cast<std::size_t>(b)].C;
        dx[k] /= c;
        dx[k + 1] /= c;
        const auto& load = params.rl_loads[static_cast<std::size_t>(b)];
        if (load) {
            const double i_d = x[o_ld + k];
            const double i_q = x[o_ld + k + 1];
            dx[o_ld + k] = (-load->R * i_d + w0 * load->L * i_q + x[k]) / load->L;
            dx[o_ld + k + 1] = (-load->R * i_q - w0 * load->L * i_d + x[k + 1]) / load->L;
        } else {
            dx[o_ld + k] = 0.0;
            dx[o_ld + k + 1] = 0.0;
        }
    }
}

NetworkState network_derivatives(const NetworkParams& params,
                                 const NetworkState& state,
                                 const Vector& injected,
                                 std::span<const double> P,
                                 std::span<const double> Q,
                                 NetworkDiagnostics* diagnostics)
{
    if (injected.size() != 2 * params.bus_count()) {
        throw ModelError("injected current vector must have 2n entries");
    }
    const Vector x = state.pack();
    if (x.size() != NetworkState::packed_size(params)) {
        throw ModelError("network state dimensions do not match the graph");
    }
    Vector dx = Vector::Zero(x.size());
    network_derivatives_into(params, x, injected, P, Q, dx, diagnostics);
    return NetworkState::unpack(params, dx);
}

namespace {

Mat2 impedance_block(double r, double x_reactance)
{
    // R - X J
    Mat2 z = r * Mat2::Identity() - x_reactance * J2();
    return z;
}

} // namespace

Matrix network_admittance_Y1(const NetworkParams& params)
{
    params.validate();
    const int n = params.bus_count();
    const double w0 = params.omega0;
    Matrix y = Matrix::Zero(2 * n, 2 * n);
    for (int b = 0; b < n; ++b) {
        const auto& sh = params.shunts[static_cast<std::size_t>(b)];
        y.block<2, 2>(2 * b, 2 * b) = impedance_block(sh.G, w0 * sh.C);
        if (const auto& load = params.rl_loads[static_cast<std::size_t>(b)]) {
            const Mat2 z = impedance_block(load->R, w0 * load->L);
            if (std::abs(z.determinant()) < 1e-300) {
                throw SingularMatrixError("load impedance (R - w0 L J) at bus " + std::to_string(b + 1) +
                                          " is singular");
            }
            y.block<2, 2>(2 * b, 2 * b) += z.inverse();
        }
    }
    for (std::size_t z = 0; z < params.edge_count(); ++z) {
        const auto& e = params.graph.edges()[z];
        const auto& ln = params.lines[z];
        const Mat2 yl = impedance_block(ln.R, w0 * ln.L).inverse();
        y.block<2, 2>(2 * e.source, 2 * e.source) += yl;
        y.block<2, 2>(2 * e.sink, 2 * e.sink) += yl;
        y.block<2, 2>(2 * e.source, 2 * e.sink) -= yl;
        y.block<2, 2>(2 * e.sink, 2 * e.source) -= yl;
    }
    return y;
}

NetworkState network_steady_state(const NetworkParams& params, const Vector& injected)
{
    const Matrix y1 = network_admittance_Y1(params);
    const int n = params.bus_count();
    const double w0 = params.omega0;
    NetworkState s = NetworkState::zero(params);
    s.vb = y1.partialPivLu().solve(injected);
    for (std::size_t z = 0; z < params.edge_count(); ++z) {
        const auto& e = params.graph.edges()[z];
        const auto& ln = params.lines[z];
        const Vec2 dv = s.vb.segment<2>(2 * e.source) - s.vb.segment<2>(2 * e.sink);
        s.il.segment<2>(2 * static_cast<Eigen::Index>(z)) = impedance_block(ln.R, w0 * ln.L).inverse() * dv;
    }
    for (int b = 0; b < n; ++b) {
        if (const auto& load = params.rl_loads[static_cast<std::size_t>(b)]) {
            s.iload.segment<2>(2 * b) = impedance_block(load->R, w0 * load->L).inverse() * s.vb.segment<2>(2 * b);
        }
    }
    return s;
}

double network_storage(const NetworkParams& params, const NetworkState& deviation)
{
    double v = 0.0;
    for (int b = 0; b < params.bus_count(); ++b) {
        v += params.shunts[static_cast<std::size_t>(b)].C * deviation.vb.segment<2>(2 * b).squaredNorm();
        if (const auto& load = params.rl_loads[static_cast<std::size_t>(b)]) {
            v += load->L * deviation.iload.segment<2>(2 * b).squaredNorm();
        }
    }
    for (std::size_t z = 0; z < params.edge_count(); ++z) {
        v += params.lines[z].L * deviation.il.segment<2>(2 * static_cast<Eigen::Index>(z)).squaredNorm();
    }
    return 0.5 * v;
}

} // namespace mgrid
