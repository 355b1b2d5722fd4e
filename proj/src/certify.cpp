// SPDX-License-Identifier: Apache-2.0
#include "mgrid/certify.hpp"

#include "mgrid/error.hpp"
#include "mgrid/frames.hpp"
#include "mgrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mgrid {

const char* to_string(ReducedGainForm form)
{
    return form == ReducedGainForm::Literal ? "literal" : "model_consistent";
}

namespace {

void require_one_inverter_per_bus(const MicrogridSpec& spec)
{
    if (spec.inverter_count() != spec.network.bus_count()) {
        throw ModelError("reduced model needs exactly one inverter per bus");
    }
    for (int k = 0; k < spec.inverter_count(); ++k) {
        if (spec.inverters[static_cast<std::size_t>(k)].bus != k) {
            throw ModelError("reduced model needs inverter " + std::to_string(k + 1) + " on bus " +
                             std::to_string(k + 1));
        }
    }
}

Matrix checked_inverse(const Matrix& m, const std::string& what)
{
    const Eigen::FullPivLU<Matrix> lu(m);
    if (!lu.isInvertible() || lu.rcond() < 1e-14) {
        throw SingularMatrixError(what + " is singular");
    }
    return lu.inverse();
}

double condition_number(const Matrix& m)
{
    const Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    return s(0) / s(s.size() - 1);
}

} // namespace

Matrix build_Y2(const MicrogridSpec& spec)
{
    require_one_inverter_per_bus(spec);
    const int n = spec.inverter_count();
    const double w0 = spec.network.omega0;
    const Matrix y1 = network_admittance_Y1(spec.network);
    Matrix inner = checked_inverse(y1, "Y1");
    for (int k = 0; k < n; ++k) {
        const auto& inv = spec.inverters[static_cast<std::size_t>(k)];
        inner.block<2, 2>(2 * k, 2 * k) +=
            inv.params.Rc * Mat2::Identity() - w0 * inv.params.Lc * J2() - inv.gains.ac.nq * e2_matrix();
    }
    return checked_inverse(inner, "(Rc - w0 Lc J) + Y1^-1 - nq");
}

Matrix build_Y2(const MicrogridSpec& spec, const Equilibrium& /*equilibrium*/) { return build_Y2(spec); }

Matrix angle_sensitivity(const Vector& delta_star)
{
    const Eigen::Index n = delta_star.size();
    Matrix w = Matrix::Zero(2 * n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        w.block<2, 1>(2 * j, j) = J2().transpose() * rotation(delta_star[j]) * e_direct();
    }
    return w;
}

Matrix build_F(const Matrix& Y2, const Vector& delta_star)
{
    const Eigen::Index n = delta_star.size();
    if (Y2.rows() != 2 * n || Y2.cols() != 2 * n) {
        throw ModelError("Y2 must be 2n x 2n for n angles");
    }
    return direct_selector(n).transpose() * Y2 * angle_sensitivity(delta_star);
}

Matrix build_M(const Matrix& F, const Vector& kp, const Vector& kI, const Vector& Vn, ReducedGainForm form)
{
    const Eigen::Index n = F.rows();
    if (F.cols() != n || kp.size() != n || kI.size() != n || Vn.size() != n) {
        throw ModelError("build_M: dimension mismatch");
    }
    if ((kp.array() <= 0.0).any() || (kI.array() <= 0.0).any()) {
        throw ModelError("build_M: kp and kI must be positive");
    }
    Matrix inner = F * Vn.asDiagonal();
    inner.diagonal() += kI.cwiseQuotient(kp);
    const Matrix term = kI.asDiagonal() * checked_inverse(inner, "kI kp^-1 + F Vn") * kp.cwiseInverse().asDiagonal();
    const double sign = form == ReducedGainForm::Literal ? 1.0 : -1.0;
    return Matrix::Identity(n, n) + sign * term;
}

Matrix build_M_tau(const Matrix& F, double tau, double Vn, ReducedGainForm form)
{
    const Eigen::Index n = F.rows();
    const Matrix inner = Matrix::Identity(n, n) + (Vn / tau) * F;
    const double sign = form == ReducedGainForm::Literal ? 1.0 : -1.0;
    return Matrix::Identity(n, n) + sign * checked_inverse(inner, "I + F Vn / tau");
}

ReducedInputs reduced_inputs(const MicrogridSpec& spec, const Equilibrium& equilibrium)
{
    require_one_inverter_per_bus(spec);
    const StateLayout layout(spec);
    if (equilibrium.x.size() != layout.size) {
        throw ModelError("equilibrium does not match the microgrid dimensions");
    }
    const int n = spec.inverter_count();
    ReducedInputs in;
    in.Y2 = build_Y2(spec);
    in.laplacian = laplacian(spec.communication_graph());
    in.kp.resize(n);
    in.kI.resize(n);
    in.Vn.resize(n);
    in.delta_star.resize(n);
    for (int k = 0; k < n; ++k) {
        const auto& g = spec.inverters[static_cast<std::size_t>(k)].gains;
        in.kp[k] = g.freq.kp;
        in.kI[k] = g.freq.kI;
        in.Vn[k] = g.ac.Vn;
        in.delta_star[k] = equilibrium.x[layout.delta(k)];
    }
    in.alpha = spec.secondary.alpha;
    return in;
}

ConsensusNumbers consensus_numbers(const ReducedInputs& in, ReducedGainForm form)
{
    const Eigen::Index n = in.kp.size();
    ConsensusNumbers out;
    const Matrix M_star = build_M(build_F(in.Y2, in.delta_star), in.kp, in.kI, in.Vn, form);
    const Matrix M_zero = build_M(build_F(in.Y2, Vector::Zero(n)), in.kp, in.kI, in.Vn, form);
    const Matrix H = in.laplacian * M_zero;
    const Matrix Delta = in.laplacian * (M_star - M_zero);

    const Eigen::EigenSolver<Matrix> eig_h(H);
    const Matrix psi = eig_h.eigenvectors().real();
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        lam[static_cast<std::size_t>(k)] = eig_h.eigenvalues()[k].real();
    }
    std::sort(lam.begin(), lam.end(), std::greater<>());
    out.H_eigenvalues = lam;
    out.lambda_n1 = n >= 2 ? lam[static_cast<std::size_t>(n - 2)] : 0.0;
    out.K_raw = condition_number(psi);

    out.K_symmetric = std::numeric_limits<double>::quiet_NaN();
    const Matrix M0_sym = 0.5 * (M_zero + M_zero.transpose());
    if ((M_zero - M0_sym).norm() <= 1e-12 * M_zero.norm()) {
        const Eigen::SelfAdjointEigenSolver<Matrix> eig_m(M0_sym);
        if (eig_m.eigenvalues().minCoeff() > 0.0) {
            out.K_symmetric = std::sqrt(eig_m.eigenvalues().maxCoeff() / eig_m.eigenvalues().minCoeff());
        }
    }
    out.K = std::isfinite(out.K_symmetric) ? std::min(out.K_raw, out.K_symmetric) : out.K_raw;
    const Eigen::JacobiSVD<Matrix> svd(Delta);
    out.delta_norm = svd.singularValues()(0);
    out.bound = out.lambda_n1 / out.K;
    out.margin = out.bound - out.delta_norm;

    const Eigen::EigenSolver<Matrix> eig_s(in.laplacian * M_star, false);
    std::vector<std::pair<double, double>> spec;
    double largest = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto z = eig_s.eigenvalues()[k];
        spec.emplace_back(z.real(), z.imag());
        largest = std::max(largest, std::abs(z));
    }
    std::sort(spec.begin(), spec.end());
    out.others_positive = true;
    for (const auto& [re, im] : spec) {
        out.spectrum_real.push_back(re);
        out.spectrum_imag.push_back(im);
        if (std::hypot(re, im) < 1e-9 * largest) {
            ++out.zero_eigenvalues;
        } else if (!(re > 0.0)) {
            out.others_positive = false;
        }
    }
    out.pass = out.margin > 0.0 && out.zero_eigenvalues == 1 && out.others_positive;
    return out;
}

Certificate consensus_certificate(const MicrogridSpec& spec, const Equilibrium& equilibrium)
{
    const ReducedInputs in = reduced_inputs(spec, equilibrium);
    const double tau = in.kI[0] / in.kp[0];
    for (Eigen::Index k = 0; k < in.kp.size(); ++k) {
        if (std::abs(in.kI[k] / in.kp[k] - tau) > 1e-9 * tau) {
            throw ModelError("stability certificate requires kI/kp to be identical for every inverter");
        }
    }
    Certificate cert;
    cert.kind = CertificateKind::Consensus;
    cert.values["tau"] = tau;
    bool domain_ok = true;
    for (Eigen::Index k = 0; k < in.delta_star.size(); ++k) {
        if (!Angle{in.delta_star[k]}.in_domain()) {
            domain_ok = false;
            cert.warnings.push_back("inverter " + std::to_string(k + 1) + ": |delta*| >= pi/2");
        }
    }
    cert.series["delta_star"] = to_std(in.delta_star);
    bool pass = domain_ok;
    double margin = std::numeric_limits<double>::infinity();
    for (ReducedGainForm form : {ReducedGainForm::Literal, ReducedGainForm::ModelConsistent}) {
        const ConsensusNumbers t = consensus_numbers(in, form);
        const std::string p = std::string(to_string(form)) + ".";
        cert.values[p + "K"] = t.K;
        cert.values[p + "K_raw"] = t.K_raw;
        cert.values[p + "K_symmetric"] = t.K_symmetric;
        cert.values[p + "lambda_n1"] = t.lambda_n1;
        cert.values[p + "delta_norm"] = t.delta_norm;
        cert.values[p + "bound"] = t.bound;
        cert.values[p + "margin"] = t.margin;
        cert.values[p + "zero_eigenvalues"] = t.zero_eigenvalues;
        cert.values[p + "others_positive"] = t.others_positive ? 1.0 : 0.0;
        cert.series[p + "H_eigenvalues"] = t.H_eigenvalues;
        cert.series[p + "spectrum_real"] = t.spectrum_real;
        cert.series[p + "spectrum_imag"] = t.spectrum_imag;
        pass = pass && t.pass;
        margin = std::min(margin, t.margin);
    }
    cert.pass = pass;
    cert.margin = margin;
    cert.reason = pass ? "norm bound and spectrum hold for both gain forms"
                       : "norm bound or spectrum condition violated";
    return cert;
}

ReducedTrajectory reduced_secondary_simulate(const Matrix& laplacian,
                                             const Matrix& M,
                                             double alpha,
                                             const Vector& chi0,
                                             double horizon,
                                             int samples)
{
    if (!(horizon > 0.0) || samples < 1) {
        throw ModelError("reduced simulation needs a positive horizon and at least one sample");
    }
    const Matrix A = -alpha * laplacian * M;
    const Eigen::EigenSolver<Matrix> eig(A, false);
    double rho = 0.0;
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
        rho = std::max(rho, std::abs(eig.eigenvalues()[k]));
    }
    const double dt_out = horizon / samples;
    const int sub = std::max(1, static_cast<int>(std::ceil(dt_out * rho / 0.1)));
    const double h = dt_out / sub;
    ReducedTrajectory traj;
    Vector x = chi0;
    traj.time.push_back(0.0);
    traj.chi.push_back(x);
    for (int s = 1; s <= samples; ++s) {
        for (int k = 0; k < sub; ++k) {
            const Vector k1 = A * x;
            const Vector k2 = A * (x + 0.5 * h * k1);
            const Vector k3 = A * (x + 0.5 * h * k2);
            const Vector k4 = A * (x + h * k3);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        traj.time.push_back(s * dt_out);
        traj.chi.push_back(x);
    }
    return traj;
}

ReducedTrajectory reduced_secondary_simulate(const MicrogridSpec& spec,
                                             const Equilibrium& equilibrium,
                                             const Vector& chi0,
                                             double horizon,
                                             int samples,
                                             ReducedGainForm form)
{
    const ReducedInputs in = reduced_inputs(spec, equilibrium);
    if (chi0.size() != in.kp.size()) {
        throw ModelError("chi0 must have one entry per inverter");
    }
    const Matrix M = build_M(build_F(in.Y2, in.delta_star), in.kp, in.kI, in.Vn, form);
    return reduced_secondary_simulate(in.laplacian, M, in.alpha, chi0, horizon, samples);
}

double diagonal_dominance_margin(const Matrix& M)
{
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        const double off = M.row(i).cwiseAbs().sum() - std::abs(M(i, i));
        margin = std::min(margin, M(i, i) - off);
    }
    return margin;
}

double column_dominance_margin(const Matrix& M) { return diagonal_dominance_margin(M.transpose()); }

} // namespace mgrid
