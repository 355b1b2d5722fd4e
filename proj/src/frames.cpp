// SPDX-License-Identifier: Apache-2.0
#include "mgrid/frames.hpp"

#include "mgrid/error.hpp"

#include <cmath>

namespace mgrid {

Mat2 rotation(double delta)
{
    const double c = std::cos(delta);
    const double s = std::sin(delta);
    Mat2 t;
    t << c, -s, s, c;
    return t;
}

Mat2 rotation_derivative(double delta) { return J2().transpose() * rotation(delta); }

Matrix block_rotation(std::span<const double> deltas)
{
    if (deltas.empty()) {
        throw ModelError("empty system");
    }
    const auto n = static_cast<Eigen::Index>(deltas.size());
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.block<2, 2>(2 * k, 2 * k) = rotation(deltas[static_cast<std::size_t>(k)]);
    }
    return out;
}

} // namespace mgrid
