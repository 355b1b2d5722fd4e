// SPDX-License-Identifier: Apache-2.0
#include "mgrid/secondary.hpp"

#include "mgrid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mgrid {

const char* to_string(CertificateKind kind)
{
    switch (kind) {
    case CertificateKind::Passivity:
        return "passivity";
    case CertificateKind::Consensus:
        return "consensus";
    case CertificateKind::PowerSharing:
        return "power-sharing";
    }
    return "unknown";
}

Vector secondary_derivative(std::span<const double> chi,
                            std::span<const double> delta,
                            std::span<const double> kI,
                            double alpha,
                            const Graph& comm_graph)
{
    const auto n = static_cast<std::size_t>(comm_graph.bus_count());
    if (chi.size() != n || delta.size() != n || kI.size() != n) {
        throw ModelError("secondary control: vector sizes do not match the communication graph");
    }
    Vector out = Vector::Zero(static_cast<Eigen::Index>(n));
    for (const Edge& edge : comm_graph.edges()) {
        const auto a = static_cast<std::size_t>(edge.source);
        const auto b = static_cast<std::size_t>(edge.sink);
        const double diff = (chi[a] - kI[a] * delta[a]) - (chi[b] - kI[b] * delta[b]);
        out[edge.source] -= alpha * diff;
        out[edge.sink] += alpha * diff;
    }
    return out;
}

Vector secondary_derivative(const Vector& chi,
                            const Vector& delta,
                            const Vector& kI,
                            double alpha,
                            const Matrix& laplacian)
{
    return -alpha * (laplacian * (chi - kI.cwiseProduct(delta)));
}

Certificate check_power_sharing(std::span<const SharingSample> samples, double tol_rel)
{
    Certificate cert;
    cert.kind = CertificateKind::PowerSharing;
    if (samples.empty()) {
        cert.reason = "no units";
        return cert;
    }
    double worst = 0.0;
    std::vector<double> weighted;
    std::vector<double> power_ratio;
    for (const SharingSample& s : samples) {
        weighted.push_back(s.kp * s.ioD);
    }
    for (std::size_t j = 0; j < samples.size(); ++j) {
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double denom = std::abs(weighted[j]);
            const double dev = denom > 0.0 ? std::abs(weighted[j] - weighted[k]) / denom
                                           : std::numeric_limits<double>::infinity();
            worst = std::max(worst, j == k ? 0.0 : dev);
        }
        const double p0 = samples[0].voD * samples[0].ioD;
        power_ratio.push_back((samples[j].voD * samples[j].ioD) / p0);
    }
    cert.values["max_relative_deviation"] = worst;
    cert.values["tolerance"] = tol_rel;
    cert.series["kp_ioD"] = weighted;
    cert.series["active_power_ratio"] = power_ratio;
    cert.margin = tol_rel - worst;
    cert.pass = std::isfinite(worst) && worst <= tol_rel;
    cert.reason = cert.pass ? "weighted output currents agree" : "weighted output currents differ";
    return cert;
}

} // namespace mgrid
