// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linalg.hpp"
#include "mgrid/microgrid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mgrid {

/// Solved operating point of the closed loop.
struct Equilibrium {
    Vector x;                       ///< full state
    std::vector<bool> active;       ///< inverter mask at solve time
    bool secondary_active = false;
    std::vector<double> idc;        ///< I*_dc per inverter
    std::vector<Vec2> m;            ///< m*_DQ per inverter
    std::vector<Vec2> vb;           ///< V*_bDQ at each inverter's bus
    std::vector<Vec2> i_ref;        ///< outer-loop reference per inverter
    double residual_norm = 0.0;     ///< 2-norm of the scaled vector field
    int iterations = 0;
    bool used_fallback = false;
    std::vector<std::string> warnings;
};

struct EquilibriumOptions {
    double tol = 1e-8;
    int max_iterations = 60;
    bool allow_fallback = true;
    double fallback_horizon = 10.0;  ///< [s]
    double fallback_step = 5e-6;     ///< [s]
    double fallback_rate = 1e-4;
};

/// Newton iteration with damped steps on the full vector field. Frozen entries keep their
/// initial value; with secondary control on, one chi equation per communication component is
/// replaced by conservation of the component's chi sum. Falls back to simulating towards rest
/// followed by Newton polishing. Throws ConvergenceError carrying the best residual.
Equilibrium solve_equilibrium(const SystemModel& model,
                              const std::optional<Vector>& initial_guess = std::nullopt,
                              const EquilibriumOptions& options = {});

Equilibrium solve_equilibrium(const MicrogridSpec& spec,
                              const std::optional<Vector>& initial_guess = std::nullopt,
                              const EquilibriumOptions& options = {});

/// Scaled residual of an arbitrary point.
double equilibrium_residual(const SystemModel& model, const Vector& x);

/// Linearized inverters about an equilibrium with v_b as the input. State ordering follows
/// stack_units: [delta, zeta, v_dc, I, V_o, I_o, beta, xi] with 13n entries.
struct LinearizedInverter {
    int n = 0;
    std::vector<int> units;    ///< inverter indices covered
    Matrix Gamma;              ///< storage weights
    Matrix A_hat;              ///< open-loop rows before scaling
    Matrix A;                  ///< Gamma^-1 A_hat
    Matrix B_hat;              ///< input m
    Matrix B;                  ///< Gamma^-1 B_hat
    Matrix B_u;                ///< Gamma^-1 C^T, input -v_b
    Matrix C;                  ///< selects I_o
    Matrix C_delta;            ///< selects delta
    Matrix D_u;                ///< zero
    Matrix K_hat;              ///< m = -K_hat x
    Vector kp;
    Vector kI;
    Matrix A_cl;               ///< A - C_delta^T kp e^T C - C_delta^T kI C_delta - B K_hat
    Vector x_star;             ///< stacked units at the equilibrium
};

/// Builds the linearization for the listed inverters (all active inverters when empty).
LinearizedInverter build_linearized(const Equilibrium& equilibrium,
                                    const MicrogridSpec& spec,
                                    std::vector<int> units = {});

/// Nonlinear inverter plus controller dynamics of the listed units in stack_units order,
/// with v_b and chi held at their equilibrium values.
Vector unit_vector_field(const Equilibrium& equilibrium,
                         const MicrogridSpec& spec,
                         const std::vector<int>& units,
                         const Vector& stacked);

/// G(j omega) = C (j omega I - A_cl)^-1 B_u by LU solve. Throws SingularMatrixError naming omega.
CMatrix transfer_function(const LinearizedInverter& lin, double omega);

} // namespace mgrid
