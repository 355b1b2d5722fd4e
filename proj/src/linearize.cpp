// SPDX-License-Identifier: Apache-2.0
#include "mgrid/linearize.hpp"

#include "mgrid/error.hpp"
#include "mgrid/frames.hpp"
#include "mgrid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mgrid {

namespace {

/// Groups of active inverters connected through the communication graph.
std::vector<std::vector<int>> active_components(const SystemModel& model)
{
    const int n = model.spec().inverter_count();
    const Graph g = model.spec().communication_graph();
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<int>> groups;
    const auto adj = g.neighbors();
    for (int start = 0; start < n; ++start) {
        if (!model.inverter_active(start) || label[static_cast<std::size_t>(start)] >= 0) {
            continue;
        }
        groups.emplace_back();
        std::vector<int> stack{start};
        label[static_cast<std::size_t>(start)] = static_cast<int>(groups.size()) - 1;
        while (!stack.empty()) {
            const int k = stack.back();
            stack.pop_back();
            groups.back().push_back(k);
            for (int nb : adj[static_cast<std::size_t>(k)]) {
                if (model.inverter_active(nb) && label[static_cast<std::size_t>(nb)] < 0) {
                    label[static_cast<std::size_t>(nb)] = label[static_cast<std::size_t>(start)];
                    stack.push_back(nb);
                }
            }
        }
    }
    return groups;
}

class NewtonSystem {
public:
    NewtonSystem(const SystemModel& model, const Vector& anchor)
        : model_(model), anchor_(anchor), scale_(model.state_scale()), frozen_(model.frozen_mask())
    {
        if (model.secondary_active()) {
            groups_ = active_components(model);
        }
    }

    Vector residual(const Vector& x) const
    {
        Vector r = scale_.cwiseProduct(model_.derivatives(x));
        for (Eigen::Index k = 0; k < r.size(); ++k) {
            if (frozen_[static_cast<std::size_t>(k)]) {
                r[k] = x[k] - anchor_[k];
            }
        }
        const auto& L = model_.layout();
        for (const auto& group : groups_) {
            double sum = 0.0;
            for (int k : group) {
                sum += x[L.chi(k)] - anchor_[L.chi(k)];
            }
            r[L.chi(group.front())] = sum;
        }
        return r;
    }

    Matrix jacobian(const Vector& x) const
    {
        const Eigen::Index size = x.size();
        Matrix jac(size, size);
        Vector xp = x;
        for (Eigen::Index k = 0; k < size; ++k) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
            xp[k] = x[k] + h;
            const Vector rp = residual(xp);
            xp[k] = x[k] - h;
            const Vector rm = residual(xp);
            xp[k] = x[k];
            jac.col(k) = (rp - rm) / (2.0 * h);
        }
        return jac;
    }

private:
    const SystemModel& model_;
    Vector anchor_;
    Vector scale_;
    std::vector<bool> frozen_;
    std::vector<std::vector<int>> groups_;
};

struct NewtonResult {
    Vector x;
    double norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

NewtonResult newton(const SystemModel& model, const Vector& start, const EquilibriumOptions& options)
{
    const NewtonSystem sys(model, start);
    NewtonResult out;
    out.x = start;
    Vector r = sys.residual(out.x);
    out.norm = r.norm();
    for (int it = 0; it < options.max_iterations; ++it) {
        if (out.norm <= options.tol && equilibrium_residual(model, out.x) <= options.tol) {
            out.converged = true;
            return out;
        }
        out.iterations = it + 1;
        const Matrix jac = sys.jacobian(out.x);
        const Vector dx = jac.colPivHouseholderQr().solve(-r);
        if (!dx.allFinite()) {
            return out;
        }
        double lambda = 1.0;
        bool accepted = false;
        while (lambda >= 1.0 / 1024.0) {
            const Vector trial = out.x + lambda * dx;
            const Vector r_trial = sys.residual(trial);
            const double n_trial = r_trial.norm();
            if (std::isfinite(n_trial) && n_trial < (1.0 - 1e-4 * lambda) * out.norm) {
                out.x = trial;
                r = r_trial;
                out.norm = n_trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            break;
        }
    }
    out.converged = out.norm <= options.tol && equilibrium_residual(model, out.x) <= options.tol;
    return out;
}

Equilibrium package(const SystemModel& model, const NewtonResult& result, bool fallback)
{
    Equilibrium eq;
    eq.x = result.x;
    eq.active = model.active_mask();
    eq.secondary_active = model.secondary_active();
    eq.residual_norm = equilibrium_residual(model, result.x);
    eq.iterations = result.iterations;
    eq.used_fallback = fallback;
    const int n = model.spec().inverter_count();
    for (int k = 0; k < n; ++k) {
        const auto& inv = model.spec().inverters[static_cast<std::size_t>(k)];
        const UnitSignals sig = model.unit_signals(result.x, k);
        eq.idc.push_back(sig.idc);
        eq.m.push_back(sig.m);
        eq.i_ref.push_back(sig.i_ref);
        eq.vb.push_back(result.x.segment<2>(model.layout().network_offset + 2 * inv.bus));
        if (!model.inverter_active(k)) {
            continue;
        }
        const double delta = result.x[model.layout().delta(k)];
        if (!Angle{delta}.in_domain()) {
            eq.warnings.push_back("inverter " + std::to_string(k + 1) + ": |delta*| >= pi/2");
        }
        if (overmodulated(sig.m)) {
            eq.warnings.push_back("inverter " + std::to_string(k + 1) + ": |m*| > 1");
        }
        if (sig.limited) {
            eq.warnings.push_back("inverter " + std::to_string(k + 1) + ": current limit active");
        }
    }
    return eq;
}

} // namespace

double equilibrium_residual(const SystemModel& model, const Vector& x)
{
    return model.state_scale().cwiseProduct(model.derivatives(x)).norm();
}

Equilibrium solve_equilibrium(const SystemModel& model,
                              const std::optional<Vector>& initial_guess,
                              const EquilibriumOptions& options)
{
    const Vector start = initial_guess ? *initial_guess : model.flat_start();
    if (start.size() != model.layout().size) {
        throw ModelError("initial guess has the wrong length");
    }
    NewtonResult first = newton(model, start, options);
    if (first.converged) {
        return package(model, first, false);
    }
    double best = equilibrium_residual(model, first.x);
    if (options.allow_fallback) {
        double reached = 0.0;
        Vector settled = start;
        try {
            settled = settle(model, start, options.fallback_horizon, options.fallback_step, options.fallback_rate,
                             &reached);
        } catch (const IntegrationError&) {
            throw ConvergenceError("equilibrium solver did not converge and the settling simulation diverged",
                                   best);
        }
        NewtonResult polished = newton(model, settled, options);
        if (polished.converged) {
            return package(model, polished, true);
        }
        best = std::min(best, equilibrium_residual(model, polished.x));
    }
    throw ConvergenceError("equilibrium solver did not converge (best scaled residual " + std::to_string(best) + ")",
                           best);
}

Equilibrium solve_equilibrium(const MicrogridSpec& spec,
                              const std::optional<Vector>& initial_guess,
                              const EquilibriumOptions& options)
{
    const SystemModel model(spec);
    return solve_equilibrium(model, initial_guess, options);
}

namespace {

std::vector<int> resolve_units(const Equilibrium& eq, std::vector<int> units)
{
    if (units.empty()) {
        for (std::size_t k = 0; k < eq.active.size(); ++k) {
            if (eq.active[k]) {
                units.push_back(static_cast<int>(k));
            }
        }
    }
    for (int k : units) {
        if (k < 0 || k >= static_cast<int>(eq.active.size())) {
            throw ModelError("inverter index " + std::to_string(k + 1) + " out of range");
        }
    }
    if (units.empty()) {
        throw ModelError("no inverters to linearize");
    }
    return units;
}

} // namespace

Vector unit_vector_field(const Equilibrium& equilibrium,
                         const MicrogridSpec& spec,
                         const std::vector<int>& units,
                         const Vector& stacked)
{
    const StateLayout layout(spec);
    const int n = static_cast<int>(units.size());
    const std::vector<UnitState> states = unstack_units(stacked, n);
    std::vector<UnitState> rates(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const int k = units[static_cast<std::size_t>(j)];
        const auto& inv = spec.inverters[static_cast<std::size_t>(k)];
        const Vec2 vb = equilibrium.x.segment<2>(layout.network_offset + 2 * inv.bus);
        rates[static_cast<std::size_t>(j)] =
            closed_loop_derivatives(inv.params, inv.gains, states[static_cast<std::size_t>(j)], vb,
                                    equilibrium.x[layout.chi(k)], spec.network.omega0);
    }
    return stack_units(rates);
}

LinearizedInverter build_linearized(const Equilibrium& equilibrium, const MicrogridSpec& spec, std::vector<int> units)
{
    units = resolve_units(equilibrium, std::move(units));
    const SystemModel model(spec);
    if (equilibrium.x.size() != model.layout().size) {
        throw ModelError("equilibrium does not match the microgrid dimensions");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(units.size());
    const Eigen::Index N = kUnitStates * n;
    const double w0 = spec.network.omega0;
    const Mat2 I2 = Mat2::Identity();
    const Mat2 J = J2();
    const Mat2 E2 = e2_matrix();

    auto d = [](Eigen::Index j) { return j; };
    auto z = [n](Eigen::Index j) { return n + j; };
    auto v = [n](Eigen::Index j) { return 2 * n + j; };
    auto ii = [n](Eigen::Index j) { return 3 * n + 2 * j; };
    auto vo = [n](Eigen::Index j) { return 5 * n + 2 * j; };
    auto io = [n](Eigen::Index j) { return 7 * n + 2 * j; };
    auto be = [n](Eigen::Index j) { return 9 * n + 2 * j; };
    auto xi = [n](Eigen::Index j) { return 11 * n + 2 * j; };

    LinearizedInverter lin;
    lin.n = static_cast<int>(n);
    lin.units = units;
    lin.Gamma = Matrix::Identity(N, N);
    lin.A_hat = Matrix::Zero(N, N);
    lin.B_hat = Matrix::Zero(N, 2 * n);
    lin.C = Matrix::Zero(2 * n, N);
    lin.C_delta = Matrix::Zero(n, N);
    lin.D_u = Matrix::Zero(2 * n, 2 * n);
    lin.K_hat = Matrix::Zero(2 * n, N);
    lin.kp = Vector::Zero(n);
    lin.kI = Vector::Zero(n);
    std::vector<UnitState> stars;

    for (Eigen::Index j = 0; j < n; ++j) {
        const int k = units[static_cast<std::size_t>(j)];
        const auto& inv = spec.inverters[static_cast<std::size_t>(k)];
        const auto& p = inv.params;
        const auto& g = inv.gains;
        const UnitState s = model.unit_state(equilibrium.x, k);
        stars.push_back(s);
        UnitSignals sig;
        closed_loop_derivatives(p, g, s, equilibrium.x.segment<2>(model.layout().network_offset + 2 * inv.bus),
                                equilibrium.x[model.layout().chi(k)], w0, &sig);
        if (sig.limited) {
            throw ModelError("inverter " + std::to_string(k + 1) +
                             ": cannot linearize with the current limit engaged");
        }
        const double vdc = s.phys.vdc;
        const double vdcr = g.dc.vdc_ref;
        const Vec2 m = sig.m;
        const Vec2 iref = sig.i_ref;
        const Vec2 jte = J * rotation(s.phys.delta) * e_direct() * g.ac.Vn;

        lin.Gamma(v(j), v(j)) = p.Cdc;
        lin.Gamma.block<2, 2>(ii(j), ii(j)) = p.Lf * I2;
        lin.Gamma.block<2, 2>(vo(j), vo(j)) = p.Cf * I2;
        lin.Gamma.block<2, 2>(io(j), io(j)) = p.Lc * I2;

        auto& A = lin.A_hat;
        A(z(j), v(j)) = 1.0;

        A(v(j), z(j)) = -g.dc.Lambda_I;
        A(v(j), v(j)) = -(p.Gdc + g.dc.Lambda_P);
        A.block<1, 2>(v(j), ii(j)) = -0.5 * m.transpose();

        A.block<2, 1>(ii(j), v(j)) = 0.5 * m;
        A.block<2, 2>(ii(j), ii(j)) = -p.Rf * I2 + w0 * p.Lf * J;
        A.block<2, 2>(ii(j), vo(j)) = -I2;

        A.block<2, 2>(vo(j), ii(j)) = I2;
        A.block<2, 2>(vo(j), vo(j)) = -p.Gs * I2 + w0 * p.Cf * J;
        A.block<2, 2>(vo(j), io(j)) = -I2;

        A.block<2, 2>(io(j), vo(j)) = I2;
        A.block<2, 2>(io(j), io(j)) = -p.Rc * I2 + w0 * p.Lc * J;

        A.block<2, 1>(be(j), d(j)) = jte;
        A.block<2, 2>(be(j), vo(j)) = I2;
        A.block<2, 2>(be(j), io(j)) = -g.ac.nq * E2;

        A.block<2, 1>(xi(j), d(j)) = g.ac.cp * vdc * jte;
        A.block<2, 1>(xi(j), v(j)) = -iref;
        A.block<2, 2>(xi(j), ii(j)) = vdcr * I2;
        A.block<2, 2>(xi(j), vo(j)) = g.ac.cp * vdc * I2;
        A.block<2, 2>(xi(j), io(j)) = -g.ac.cp * vdc * g.ac.nq * E2;
        A.block<2, 2>(xi(j), be(j)) = g.ac.cI * vdc * I2;

        lin.B_hat.block<1, 2>(v(j), 2 * j) = -0.5 * s.phys.i.transpose();
        lin.B_hat.block<2, 2>(ii(j), 2 * j) = 0.5 * vdc * I2;

        const double lp = g.ac.lambda_P;
        auto& K = lin.K_hat;
        K.block<2, 1>(2 * j, d(j)) = lp * g.ac.cp * vdc * jte;
        K.block<2, 1>(2 * j, v(j)) = -lp * iref;
        K.block<2, 2>(2 * j, ii(j)) = lp * vdcr * I2;
        K.block<2, 2>(2 * j, vo(j)) = lp * g.ac.cp * vdc * I2;
        K.block<2, 2>(2 * j, io(j)) = -lp * g.ac.cp * vdc * g.ac.nq * E2;
        K.block<2, 2>(2 * j, be(j)) = lp * g.ac.cI * vdc * I2;
        K.block<2, 2>(2 * j, xi(j)) = g.ac.lambda_I * I2;

        lin.C.block<2, 2>(2 * j, io(j)) = I2;
        lin.C_delta(j, d(j)) = 1.0;
        lin.kp[j] = g.freq.kp;
        lin.kI[j] = g.freq.kI;
    }

    const Vector gamma_inv = lin.Gamma.diagonal().cwiseInverse();
    lin.A = gamma_inv.asDiagonal() * lin.A_hat;
    lin.B = gamma_inv.asDiagonal() * lin.B_hat;
    lin.B_u = gamma_inv.asDiagonal() * lin.C.transpose();
    const Matrix e_t = direct_selector(n).transpose();
    lin.A_cl = lin.A - lin.C_delta.transpose() * lin.kp.asDiagonal() * e_t * lin.C -
               lin.C_delta.transpose() * lin.kI.asDiagonal() * lin.C_delta - lin.B * lin.K_hat;
    lin.x_star = stack_units(stars);
    return lin;
}

CMatrix transfer_function(const LinearizedInverter& lin, double omega)
{
    CMatrix resolvent = -lin.A_cl.cast<Complex>();
    resolvent.diagonal().array() += Complex(0.0, omega);
    const Eigen::PartialPivLU<CMatrix> lu(resolvent);
    const double rcond = lu.rcond();
    if (!(rcond > 1e3 * std::numeric_limits<double>::epsilon())) {
        throw SingularMatrixError("resolvent (j omega I - A_cl) is singular at omega = " + std::to_string(omega) +
                                  " rad/s");
    }
    const CMatrix x = lu.solve(lin.B_u.cast<Complex>());
    return lin.C.cast<Complex>() * x;
}

} // namespace mgrid
