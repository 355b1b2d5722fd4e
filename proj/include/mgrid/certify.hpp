// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/certificate.hpp"
#include "mgrid/linalg.hpp"
#include "mgrid/linearize.hpp"
#include "mgrid/microgrid.hpp"

#include <vector>

namespace mgrid {

/// Which gain matrix couples chi to delta in the reduced secondary model.
///  - Literal: M = I + kI (kI kp^-1 + F Vn)^-1 kp^-1.
///  - ModelConsistent: M = I - kI (kI kp^-1 + F Vn)^-1 kp^-1, obtained from the frequency law
///    with +chi, which is what the full dynamics obey.
enum class ReducedGainForm { Literal, ModelConsistent };

const char* to_string(ReducedGainForm form);

/// Y2 = ((Rc - w0 Lc J) + Y1^-1 - nq)^-1 with nq = blkdiag(nq_j e2). Requires inverter j on bus j.
Matrix build_Y2(const MicrogridSpec& spec);

/// Equilibrium overload (kept for symmetry with the other certificate inputs; Y2 only depends
/// on parameters).
Matrix build_Y2(const MicrogridSpec& spec, const Equilibrium& equilibrium);

/// 2n x n matrix blkdiag(J^T T(delta_j) e).
Matrix angle_sensitivity(const Vector& delta_star);

/// F = e^T Y2 J^T T(delta*) e.
Matrix build_F(const Matrix& Y2, const Vector& delta_star);

/// M from F with the chosen sign; Vn multiplies F column-wise.
Matrix build_M(const Matrix& F, const Vector& kp, const Vector& kI, const Vector& Vn,
               ReducedGainForm form = ReducedGainForm::Literal);

/// Uniform-ratio form: I +/- (I + (1/tau) F Vn)^-1.
Matrix build_M_tau(const Matrix& F, double tau, double Vn, ReducedGainForm form = ReducedGainForm::Literal);

/// Gains, nominal voltages and equilibrium angles collected from a spec and equilibrium.
struct ReducedInputs {
    Matrix Y2;
    Matrix laplacian;
    Vector kp;
    Vector kI;
    Vector Vn;
    Vector delta_star;
    double alpha = 0.0;
};

ReducedInputs reduced_inputs(const MicrogridSpec& spec, const Equilibrium& equilibrium);

/// Bauer-Fike data for one gain form.
struct ConsensusNumbers {
    double K_raw = 0.0;
    double K_symmetric = 0.0;   ///< NaN when M(0) is not symmetric positive definite
    double K = 0.0;             ///< the smaller of the two
    double lambda_n1 = 0.0;     ///< second-smallest eigenvalue of H = L M(0)
    double delta_norm = 0.0;    ///< ||L (M(delta*) - M(0))||_2
    double bound = 0.0;         ///< lambda_n1 / K
    double margin = 0.0;        ///< bound - delta_norm
    std::vector<double> H_eigenvalues;           ///< descending
    std::vector<double> spectrum_real;           ///< eig(L M(delta*)), ascending by real part
    std::vector<double> spectrum_imag;
    int zero_eigenvalues = 0;
    bool others_positive = false;
    bool pass = false;
};

ConsensusNumbers consensus_numbers(const ReducedInputs& in, ReducedGainForm form);

/// Runs both gain forms. Passes when both satisfy the norm bound and show a single zero
/// eigenvalue with all others in the open right half-plane. Throws ModelError when kI/kp is not
/// uniform.
Certificate consensus_certificate(const MicrogridSpec& spec, const Equilibrium& equilibrium);

/// Sampled solution of chi' = -alpha L M(delta*) chi.
struct ReducedTrajectory {
    std::vector<double> time;
    std::vector<Vector> chi;
};

ReducedTrajectory reduced_secondary_simulate(const MicrogridSpec& spec,
                                             const Equilibrium& equilibrium,
                                             const Vector& chi0,
                                             double horizon,
                                             int samples = 200,
                                             ReducedGainForm form = ReducedGainForm::ModelConsistent);

/// Same integration for explicit matrices.
ReducedTrajectory reduced_secondary_simulate(const Matrix& laplacian,
                                             const Matrix& M,
                                             double alpha,
                                             const Vector& chi0,
                                             double horizon,
                                             int samples = 200);

/// Strict row diagonal dominance with positive diagonal; returns the smallest slack
/// min_i (m_ii - sum_{j != i} |m_ij|), negative when violated.
double diagonal_dominance_margin(const Matrix& M);

/// Same test on columns.
double column_dominance_margin(const Matrix& M);

} // namespace mgrid
