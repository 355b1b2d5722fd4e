// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/certificate.hpp"
#include "mgrid/linalg.hpp"
#include "mgrid/network.hpp"

#include <span>

namespace mgrid {

/// Distributed set-point update chi' = -alpha L chi + alpha L kI delta over the communication graph.
/// Each entry is assembled edge by edge, so row j only reads values of neighbours of j.
Vector secondary_derivative(std::span<const double> chi,
                            std::span<const double> delta,
                            std::span<const double> kI,
                            double alpha,
                            const Graph& comm_graph);

/// Same law with an explicit dense Laplacian.
Vector secondary_derivative(const Vector& chi,
                            const Vector& delta,
                            const Vector& kI,
                            double alpha,
                            const Matrix& laplacian);

/// Steady-state sharing data for one unit.
struct SharingSample {
    double kp = 0.0;
    double ioD = 0.0;
    double voD = 0.0;
};

/// Passes iff max_{j,k} |kp_j ioD_j - kp_k ioD_k| / |kp_j ioD_j| <= tol_rel. Reports the
/// active-power ratios against the first unit in the metadata.
Certificate check_power_sharing(std::span<const SharingSample> samples, double tol_rel);

} // namespace mgrid
