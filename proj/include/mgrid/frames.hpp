// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linalg.hpp"

#include <numbers>
#include <span>

namespace mgrid {

/// Angle between a local dq frame and the common DQ frame, stored unwrapped in radians.
struct Angle {
    double value = 0.0;

    /// Controllers are only meaningful for |delta| < pi/2.
    bool in_domain() const noexcept { return std::abs(value) < std::numbers::pi / 2.0; }
};

/// Park rotation T(delta) mapping local dq quantities into the common DQ frame.
Mat2 rotation(double delta);

/// dT/d(delta) = J^T T(delta).
Mat2 rotation_derivative(double delta);

/// blkdiag(T(delta_j)). Throws ModelError("empty system") for an empty input.
Matrix block_rotation(std::span<const double> deltas);

} // namespace mgrid
