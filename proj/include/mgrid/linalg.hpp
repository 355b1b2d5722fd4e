// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <vector>

namespace mgrid {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

/// Skew rotation J = [[0, 1], [-1, 0]]. In D + jQ phasor notation J x corresponds to -j x.
inline Mat2 J2()
{
    Mat2 j;
    j << 0.0, 1.0, -1.0, 0.0;
    return j;
}

/// Direct-axis selector e = [1, 0]^T.
inline Vec2 e_direct() { return Vec2(1.0, 0.0); }

/// e2 = [[0, 1], [0, 0]]: routes the Q component into the D slot.
inline Mat2 e2_matrix()
{
    Mat2 m;
    m << 0.0, 1.0, 0.0, 0.0;
    return m;
}

/// blkdiag over n copies of a 2x2 block.
inline Matrix block_diag2(std::span<const Mat2> blocks)
{
    const auto n = static_cast<Eigen::Index>(blocks.size());
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.block<2, 2>(2 * k, 2 * k) = blocks[static_cast<std::size_t>(k)];
    }
    return out;
}

/// diag(values) (x) I_2.
inline Matrix diag_kron_i2(std::span<const double> values)
{
    const auto n = static_cast<Eigen::Index>(values.size());
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out(2 * k, 2 * k) = values[static_cast<std::size_t>(k)];
        out(2 * k + 1, 2 * k + 1) = values[static_cast<std::size_t>(k)];
    }
    return out;
}

/// I_n (x) J.
inline Matrix block_j(Eigen::Index n)
{
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.block<2, 2>(2 * k, 2 * k) = J2();
    }
    return out;
}

/// e_ = I_n (x) e, the 2n x n direct-axis selector.
inline Matrix direct_selector(Eigen::Index n)
{
    Matrix out = Matrix::Zero(2 * n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out(2 * k, k) = 1.0;
    }
    return out;
}

/// Kronecker product A (x) I_2.
inline Matrix kron_i2(const Matrix& a)
{
    Matrix out = Matrix::Zero(2 * a.rows(), 2 * a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            out(2 * r, 2 * c) = a(r, c);
            out(2 * r + 1, 2 * c + 1) = a(r, c);
        }
    }
    return out;
}

inline Vec2 segment2(const Vector& v, Eigen::Index offset) { return v.segment<2>(offset); }

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

} // namespace mgrid
