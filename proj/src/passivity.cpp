// SPDX-License-Identifier: Apache-2.0
#include "mgrid/passivity.hpp"

#include "mgrid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mgrid {

double hermitian_min_eigenvalue(const CMatrix& G)
{
    const CMatrix H = G + G.adjoint();
    const Eigen::SelfAdjointEigenSolver<CMatrix> eig(H, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

namespace {

double safe_min_eig(const LinearizedInverter& lin, double omega, bool* ok)
{
    try {
        *ok = true;
        return hermitian_min_eigenvalue(transfer_function(lin, omega));
    } catch (const SingularMatrixError&) {
        *ok = false;
        return std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace

PassivitySweep passivity_sweep(const LinearizedInverter& lin, const SweepOptions& options)
{
    if (!(options.omega_min > 0.0) || !(options.omega_max > options.omega_min) || options.points < 2) {
        throw ModelError("sweep needs 0 < omega_min < omega_max and at least two points");
    }
    PassivitySweep sweep;
    const Eigen::EigenSolver<Matrix> eig(lin.A_cl, false);
    sweep.spectral_abscissa = eig.eigenvalues().real().maxCoeff();
    sweep.hurwitz = sweep.spectral_abscissa < 0.0;

    const double l0 = std::log10(options.omega_min);
    const double l1 = std::log10(options.omega_max);
    sweep.overall_margin = std::numeric_limits<double>::infinity();
    std::size_t argmin = 0;
    for (int k = 0; k < options.points; ++k) {
        const double w = std::pow(10.0, l0 + (l1 - l0) * k / (options.points - 1));
        bool ok = true;
        const double value = safe_min_eig(lin, w, &ok);
        if (!ok) {
            sweep.warnings.push_back("resolvent singular at omega = " + std::to_string(w) + " rad/s, point skipped");
            continue;
        }
        sweep.omega_grid.push_back(w);
        sweep.min_eigenvalues.push_back(value);
        if (value < sweep.overall_margin) {
            sweep.overall_margin = value;
            argmin = sweep.omega_grid.size() - 1;
        }
    }
    if (sweep.omega_grid.empty()) {
        throw SingularMatrixError("resolvent singular on the whole grid");
    }
    sweep.argmin_omega = sweep.omega_grid[argmin];
    sweep.refined_margin = sweep.overall_margin;
    sweep.refined_omega = sweep.argmin_omega;
    if (!options.refine || sweep.omega_grid.size() < 3) {
        return sweep;
    }
    // golden-section search in log10(omega) over the bracket around the grid minimum
    double a = std::log10(sweep.omega_grid[argmin == 0 ? 0 : argmin - 1]);
    double b = std::log10(sweep.omega_grid[std::min(argmin + 1, sweep.omega_grid.size() - 1)]);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double lw) {
        bool ok = true;
        const double v = safe_min_eig(lin, std::pow(10.0, lw), &ok);
        return ok ? v : std::numeric_limits<double>::infinity();
    };
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < 60 && (b - a) > 1e-12; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    const double lw = fc < fd ? c : d;
    const double fmin = std::min(fc, fd);
    if (fmin < sweep.refined_margin) {
        sweep.refined_margin = fmin;
        sweep.refined_omega = std::pow(10.0, lw);
    }
    return sweep;
}

Certificate passivity_certificate(const PassivitySweep& sweep)
{
    Certificate cert;
    cert.kind = CertificateKind::Passivity;
    cert.margin = sweep.refined_margin;
    cert.values["grid_margin"] = sweep.overall_margin;
    cert.values["argmin_omega"] = sweep.refined_omega;
    cert.values["spectral_abscissa"] = sweep.spectral_abscissa;
    cert.values["omega_min"] = sweep.omega_grid.front();
    cert.values["omega_max"] = sweep.omega_grid.back();
    cert.values["points"] = static_cast<double>(sweep.omega_grid.size());
    cert.warnings = sweep.warnings;
    if (!sweep.hurwitz) {
        cert.pass = false;
        cert.reason = "not asymptotically stable";
    } else if (sweep.refined_margin > 0.0) {
        cert.pass = true;
        cert.reason = "Hermitian part positive definite over the sweep";
    } else {
        cert.pass = false;
        cert.reason = "Hermitian part not positive definite";
    }
    return cert;
}

std::vector<Certificate> certify_inverters(const Equilibrium& equilibrium,
                                           const MicrogridSpec& spec,
                                           const SweepOptions& options,
                                           std::vector<int> units)
{
    if (units.empty()) {
        for (std::size_t k = 0; k < equilibrium.active.size(); ++k) {
            if (equilibrium.active[k]) {
                units.push_back(static_cast<int>(k));
            }
        }
    }
    std::vector<Certificate> out;
    for (int k : units) {
        const LinearizedInverter lin = build_linearized(equilibrium, spec, {k});
        Certificate cert = passivity_certificate(passivity_sweep(lin, options));
        cert.values["inverter"] = k + 1;
        out.push_back(std::move(cert));
    }
    return out;
}

std::vector<KIPoint> find_passive_kI(const MicrogridSpec& spec,
                                     int inverter_index,
                                     double kI_min,
                                     double kI_max,
                                     int steps,
                                     const SweepOptions& options)
{
    if (inverter_index < 0 || inverter_index >= spec.inverter_count()) {
        throw ModelError("inverter index " + std::to_string(inverter_index + 1) + " out of range");
    }
    if (!(kI_min > 0.0) || kI_max < kI_min) {
        throw ModelError("kI range must be positive and ordered");
    }
    const int count = (steps <= 1 || kI_max == kI_min) ? 1 : steps;
    std::vector<KIPoint> curve;
    std::optional<Vector> guess;
    for (int s = 0; s < count; ++s) {
        const double kI = count == 1 ? kI_min : kI_min + (kI_max - kI_min) * s / (count - 1);
        MicrogridSpec trial = spec;
        trial.inverters[static_cast<std::size_t>(inverter_index)].gains.freq.kI = kI;
        KIPoint point;
        point.kI = kI;
        try {
            const SystemModel model(trial);
            const Equilibrium eq = solve_equilibrium(model, guess);
            guess = eq.x;
            const LinearizedInverter lin = build_linearized(eq, trial, {inverter_index});
            const Certificate cert = passivity_certificate(passivity_sweep(lin, options));
            point.margin = cert.margin;
            point.pass = cert.pass;
        } catch (const ConvergenceError&) {
            point.margin = std::numeric_limits<double>::quiet_NaN();
            point.pass = false;
        }
        curve.push_back(point);
    }
    return curve;
}

double max_margin_jump(const std::vector<KIPoint>& curve)
{
    double jump = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
        if (std::isfinite(curve[k].margin) && std::isfinite(curve[k - 1].margin)) {
            jump = std::max(jump, std::abs(curve[k].margin - curve[k - 1].margin));
        }
    }
    return jump;
}

Matrix kyp_lmi_matrix(const LinearizedInverter& lin, const Matrix& P, double epsilon)
{
    const Eigen::Index N = lin.A_cl.rows();
    const Eigen::Index m = lin.C.rows();
    if (P.rows() != N || P.cols() != N) {
        throw ModelError("P must match the state dimension");
    }
    Matrix lmi(N + m, N + m);
    lmi.topLeftCorner(N, N) = P * lin.A_cl + lin.A_cl.transpose() * P + epsilon * P;
    lmi.topRightCorner(N, m) = P * lin.B_u - lin.C.transpose();
    lmi.bottomLeftCorner(m, N) = lin.B_u.transpose() * P - lin.C;
    lmi.bottomRightCorner(m, m) = -lin.D_u.transpose() - lin.D_u;
    return lmi;
}

double kyp_lmi_residual(const LinearizedInverter& lin, const Matrix& P, double epsilon)
{
    const Matrix lmi = kyp_lmi_matrix(lin, P, epsilon);
    const Matrix sym = 0.5 * (lmi + lmi.transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

} // namespace mgrid
