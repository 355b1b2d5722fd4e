// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/certificate.hpp"
#include "mgrid/linalg.hpp"
#include "mgrid/linearize.hpp"
#include "mgrid/microgrid.hpp"

#include <string>
#include <vector>

namespace mgrid {

/// Smallest eigenvalue of the Hermitian part G + G^H.
double hermitian_min_eigenvalue(const CMatrix& G);

/// Frequency sweep of the Hermitian part of G(j omega).
struct PassivitySweep {
    std::vector<double> omega_grid;
    std::vector<double> min_eigenvalues;
    double overall_margin = 0.0;     ///< minimum over the grid
    double argmin_omega = 0.0;
    double refined_margin = 0.0;     ///< after golden-section refinement around the argmin
    double refined_omega = 0.0;
    bool hurwitz = false;
    double spectral_abscissa = 0.0;  ///< max real part of eig(A_cl)
    std::vector<std::string> warnings;
};

struct SweepOptions {
    double omega_min = 1e-2;
    double omega_max = 1e6;
    int points = 1000;
    bool refine = true;
};

/// Evaluates the minimum Hermitian-part eigenvalue on a log grid and refines the minimum.
PassivitySweep passivity_sweep(const LinearizedInverter& lin, const SweepOptions& options = {});

/// Pass iff A_cl is Hurwitz and the refined margin is positive.
Certificate passivity_certificate(const PassivitySweep& sweep);

/// Linearizes each listed inverter separately and sweeps it (all active inverters when empty).
std::vector<Certificate> certify_inverters(const Equilibrium& equilibrium,
                                           const MicrogridSpec& spec,
                                           const SweepOptions& options = {},
                                           std::vector<int> units = {});

struct KIPoint {
    double kI = 0.0;
    double margin = 0.0;
    bool pass = false;
};

/// Re-solves the equilibrium and re-sweeps the chosen inverter for kI on a uniform grid over
/// [kI_min, kI_max] (a single evaluation when steps <= 1 or the range is degenerate).
std::vector<KIPoint> find_passive_kI(const MicrogridSpec& spec,
                                     int inverter_index,
                                     double kI_min,
                                     double kI_max,
                                     int steps,
                                     const SweepOptions& options = {});

/// Largest absolute margin jump between neighbouring points of a kI curve.
double max_margin_jump(const std::vector<KIPoint>& curve);

/// [[P A_cl + A_cl^T P + eps P, P B_u - C^T], [B_u^T P - C, -D_u^T - D_u]].
Matrix kyp_lmi_matrix(const LinearizedInverter& lin, const Matrix& P, double epsilon);

/// Largest eigenvalue of kyp_lmi_matrix; a value <= 0 certifies passivity for P.
double kyp_lmi_residual(const LinearizedInverter& lin, const Matrix& P, double epsilon);

} // namespace mgrid
