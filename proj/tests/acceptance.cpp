// SPDX-License-Identifier: Apache-2.0
/// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any criterion fails.

#include "mgrid/certify.hpp"
#include "mgrid/error.hpp"
#include "mgrid/linearize.hpp"
#include "mgrid/passivity.hpp"
#include "mgrid/scenario.hpp"
#include "mgrid/secondary.hpp"
#include "mgrid/sim.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace mgrid;
using mgrid::testing::bundled;
using mgrid::testing::fd_jacobian;
using mgrid::testing::max_relative_error;
using mgrid::testing::uniform;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, double a)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, format, a);
    return buf;
}

std::string fmt2(const char* format, double a, double b)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, format, a, b);
    return buf;
}

struct FiveBus {
    ParsedScenario parsed;
    Equilibrium eq;
};

const FiveBus& five_bus()
{
    static const FiveBus s = [] {
        auto parsed = bundled("benchmark_5bus");
        SystemModel model(parsed.scenario.spec);
        auto eq = solve_equilibrium(model);
        return FiveBus{parsed, eq};
    }();
    return s;
}

const Trajectory& load_step_run()
{
    static const Trajectory traj = simulate(five_bus().parsed.scenario);
    return traj;
}

const std::vector<std::pair<double, double>> kWindows{{1.0, 1.5}, {3.0, 3.5}, {4.5, 5.0}};

Outcome linearization_oracle()
{
    double worst = 0.0;
    int systems = 0;
    auto check = [&](const MicrogridSpec& spec) {
        const auto eq = solve_equilibrium(spec);
        const auto lin = build_linearized(eq, spec);
        auto f = [&](const Vector& x) { return unit_vector_field(eq, spec, lin.units, x); };
        worst = std::max(worst, max_relative_error(fd_jacobian(f, lin.x_star), lin.A_cl));
        ++systems;
    };
    check(five_bus().parsed.scenario.spec);
    std::mt19937_64 rng(20240601);
    int failures = 0;
    while (systems < 21) {
        const int buses = 2 + static_cast<int>(rng() % 4);
        try {
            check(random_scenario(rng(), buses).scenario.spec);
        } catch (const ConvergenceError&) {
            if (++failures > 20) break;
        }
    }
    Outcome o;
    o.pass = systems == 21 && worst < 1e-4;
    o.detail = "worst entrywise relative error " + fmt("%.2e", worst) + " over " + std::to_string(systems) +
               " systems (tolerance 1e-4)";
    if (failures > 0) o.detail += ", " + std::to_string(failures) + " draws without equilibrium skipped";
    return o;
}

Outcome passivity_reproduction()
{
    const auto& s = five_bus();
    const SweepOptions opts{1e-2, 1e6, 1000, true};
    const auto certs = certify_inverters(s.eq, s.parsed.scenario.spec, opts);
    bool all = certs.size() == 5;
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& c : certs) {
        all = all && c.pass;
        margin = std::min(margin, c.margin);
    }
    auto undamped = s.parsed.scenario.spec;
    for (auto& inv : undamped.inverters) {
        inv.gains.freq.kI = 0.0;
    }
    const auto bad = certify_inverters(s.eq, undamped, opts);
    bool none = true;
    double bad_margin = std::numeric_limits<double>::infinity();
    for (const auto& c : bad) {
        none = none && !c.pass;
        bad_margin = std::min(bad_margin, c.margin);
    }
    Outcome o;
    o.pass = all && none;
    o.detail = "5/5 passive with min margin " + fmt("%.3e", margin) + "; with kI = 0 all fail (min eigenvalue " +
               fmt("%.3e", bad_margin) + ")";
    if (!all) o.detail = "not every inverter passive; min margin " + fmt("%.3e", margin);
    if (!none) o.detail += "; kI = 0 unexpectedly passes";
    return o;
}

Outcome frequency_restoration()
{
    const auto& traj = load_step_run();
    double worst = 0.0;
    for (const auto& [a, b] : kWindows) {
        const auto r = window_report(traj, a, b);
        for (int k = 1; k <= 5; ++k) {
            worst = std::max(worst, std::abs(r.at("f" + std::to_string(k)).mean - 50.0));
        }
    }
    return {worst < 0.01, "max |mean f - 50 Hz| over 3 windows " + fmt("%.2e", worst) + " Hz (limit 0.01 Hz)"};
}

Outcome power_sharing()
{
    const auto& s = five_bus();
    const auto& traj = load_step_run();
    double worst = 0.0;
    for (const auto& [a, b] : kWindows) {
        const auto r = window_report(traj, a, b);
        std::vector<SharingSample> samples;
        for (int k = 0; k < 5; ++k) {
            const auto suffix = std::to_string(k + 1);
            samples.push_back({s.parsed.scenario.spec.inverters[static_cast<std::size_t>(k)].gains.freq.kp,
                               r.at("ioD" + suffix).mean, r.at("voD" + suffix).mean});
        }
        worst = std::max(worst, check_power_sharing(samples, 0.02).values.at("max_relative_deviation"));
    }
    auto two = mgrid::testing::two_bus_spec(0.03, 0.06);
    two.secondary.enabled = true;
    SystemModel model(two);
    const auto eq = solve_equilibrium(model);
    const double ratio = model.unit_state(eq.x, 0).phys.io.x() / model.unit_state(eq.x, 1).phys.io.x();
    Outcome o;
    o.pass = worst < 0.02 && std::abs(ratio / 2.0 - 1.0) < 0.02;
    o.detail = "max kp*ioD deviation " + fmt("%.2e", worst) + " (limit 0.02); 1:2 droop gives ioD ratio " +
               fmt("%.4f", ratio) + " (target 2 +- 2%)";
    return o;
}

Outcome voltage_bounds()
{
    const auto& traj = load_step_run();
    const double vn = 311.0;
    double vo_min = std::numeric_limits<double>::infinity();
    double vo_max = 0.0;
    double vdc_dev = 0.0;
    for (const auto& [a, b] : kWindows) {
        for (std::size_t i = 0; i < traj.time.size(); ++i) {
            if (traj.time[i] < a - 1e-12 || traj.time[i] > b + 1e-12) continue;
            for (int k = 1; k <= 5; ++k) {
                const auto suffix = std::to_string(k);
                const double vo = traj.channel("vo" + suffix)[i];
                vo_min = std::min(vo_min, vo);
                vo_max = std::max(vo_max, vo);
                vdc_dev = std::max(vdc_dev, std::abs(traj.channel("vdc" + suffix)[i] / 1000.0 - 1.0));
            }
        }
    }
    Outcome o;
    o.pass = vo_min > 0.9 * vn && vo_max < 1.1 * vn && vdc_dev < 0.005;
    o.detail = "|vo| in [" + fmt("%.2f", vo_min) + ", " + fmt("%.2f", vo_max) + "] V (bounds 279.9, 342.1); max vdc deviation " +
               fmt("%.2e", vdc_dev) + " (limit 5e-3)";
    return o;
}

/// Largest deviation between the full and reduced chi responses relative to the reduced peak.
struct ReducedMatch {
    double literal = 0.0;
    double consistent = 0.0;
    bool converged = false;
};

ReducedMatch reduced_vs_full(double alpha, double horizon, double interval)
{
    auto spec = five_bus().parsed.scenario.spec;
    spec.secondary.alpha = alpha;
    const auto& eq = five_bus().eq;
    Vector pert(5);
    pert << 0.04, -0.03, 0.02, 0.01, -0.02;
    Scenario sc;
    sc.spec = spec;
    sc.horizon = horizon;
    sc.integrator.output_interval = interval;
    sc.initial.mode = InitialMode::Explicit;
    sc.initial.x = eq.x;
    const StateLayout L(spec);
    sc.initial.x.segment(L.chi(0), 5) += pert;
    const auto full = simulate(sc);
    const int samples = static_cast<int>(std::lround(horizon / interval));
    ReducedMatch out;
    for (auto form : {ReducedGainForm::Literal, ReducedGainForm::ModelConsistent}) {
        const auto red = reduced_secondary_simulate(spec, eq, pert, horizon, samples, form);
        double peak = 0.0;
        double err = 0.0;
        for (std::size_t i = 0; i < red.time.size() && i < full.time.size(); ++i) {
            Vector chi_full(5);
            for (int k = 0; k < 5; ++k) {
                chi_full[k] = full.channel("chi" + std::to_string(k + 1))[i] - eq.x[L.chi(k)];
            }
            peak = std::max(peak, red.chi[i].cwiseAbs().maxCoeff());
            err = std::max(err, (chi_full - red.chi[i]).cwiseAbs().maxCoeff());
        }
        (form == ReducedGainForm::Literal ? out.literal : out.consistent) = err / peak;
        if (form == ReducedGainForm::ModelConsistent) {
            const Vector last = red.chi.back();
            out.converged = (last.array() - last.mean()).abs().maxCoeff() < 0.05 * pert.cwiseAbs().maxCoeff() ||
                            (red.chi.back() - red.chi[red.chi.size() - 2]).norm() < 1e-6;
        }
    }
    return out;
}

Outcome consensus_certificate_check()
{
    const auto& s = five_bus();
    const auto cert = consensus_certificate(s.parsed.scenario.spec, s.eq);
    const auto fast = reduced_vs_full(s.parsed.scenario.spec.secondary.alpha, 0.1, 1e-4);
    const auto slow = reduced_vs_full(5.0, 4.0, 1e-3);
    Outcome o;
    o.pass = cert.pass && fast.converged && fast.consistent < 0.10;
    o.detail = "certificate " + std::string(cert.pass ? "passes" : "fails") + " with margin " +
               fmt("%.4f", cert.margin) + " (literal " + fmt("%.4f", cert.values.at("literal.margin")) +
               ", model-consistent " + fmt("%.4f", cert.values.at("model_consistent.margin")) +
               "), one zero eigenvalue in each form; reduced vs full chi mismatch at alpha 667: " +
               fmt2("%.1f%% (literal %.1f%%)", 100 * fast.consistent, 100 * fast.literal) + ", limit 10%" +
               "; supplementary alpha 5: " + fmt2("%.1f%% (literal %.1f%%)", 100 * slow.consistent, 100 * slow.literal);
    return o;
}

Outcome gain_matrix_properties()
{
    const auto in = reduced_inputs(five_bus().parsed.scenario.spec, five_bus().eq);
    std::mt19937_64 rng(7);
    double worst_dom = std::numeric_limits<double>::infinity();
    double worst_diag = std::numeric_limits<double>::infinity();
    int dominant = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Vector d(5);
        for (int k = 0; k < 5; ++k) {
            d[k] = uniform(rng, -0.999 * std::numbers::pi / 2, 0.999 * std::numbers::pi / 2);
        }
        const Matrix m = build_M(build_F(in.Y2, d), in.kp, in.kI, in.Vn, ReducedGainForm::Literal);
        const double dom = diagonal_dominance_margin(m);
        worst_dom = std::min(worst_dom, dom);
        worst_diag = std::min(worst_diag, m.diagonal().minCoeff());
        dominant += dom > 0.0 && m.diagonal().minCoeff() > 0.0 ? 1 : 0;
    }
    const Matrix m0 = build_M(build_F(in.Y2, Vector::Zero(5)), in.kp, in.kI, in.Vn, ReducedGainForm::Literal);
    const bool symmetric = (m0 - m0.transpose()).norm() <= 1e-12 * m0.norm();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m0 + m0.transpose())).eigenvalues().minCoeff();
    Outcome o;
    o.pass = dominant == 100 && symmetric && min_eig > 0.0;
    o.detail = std::to_string(dominant) + "/100 strictly diagonally dominant (worst slack " + fmt("%.3e", worst_dom) +
               ", min diagonal " + fmt("%.4f", worst_diag) + "); M(0) " + (symmetric ? "symmetric" : "not symmetric") +
               " with min eigenvalue " + fmt("%.4f", min_eig);
    return o;
}

/// Storage inequality along a simulated trajectory; returns the worst violation per unit energy.
double storage_violation(const NetworkParams& p, std::mt19937_64& rng)
{
    const Eigen::Index sz = NetworkState::packed_size(p);
    const Eigen::Index nb = 2 * p.bus_count();
    Vector x = Vector::Zero(sz + 1);
    for (Eigen::Index k = 0; k < sz - nb; ++k) {
        x[k] = uniform(rng, -30.0, 30.0);
    }
    std::vector<double> amp(static_cast<std::size_t>(nb));
    std::vector<double> freq(static_cast<std::size_t>(nb));
    for (Eigen::Index k = 0; k < nb; ++k) {
        amp[static_cast<std::size_t>(k)] = uniform(rng, 0.0, 20.0);
        freq[static_cast<std::size_t>(k)] = uniform(rng, 1.0, 2000.0);
    }
    auto input = [&](double t) {
        Vector u(nb);
        for (Eigen::Index k = 0; k < nb; ++k) {
            u[k] = amp[static_cast<std::size_t>(k)] * std::sin(freq[static_cast<std::size_t>(k)] * t + k);
        }
        return u;
    };
    auto f = [&](double t, const Vector& s) {
        Vector d = Vector::Zero(sz + 1);
        const Vector u = input(t);
        network_derivatives_into(p, s.head(sz), u, {}, {}, d.head(sz));
        d[sz] = s.head(nb).dot(u);
        return d;
    };
    auto storage = [&](const Vector& s) { return network_storage(p, NetworkState::unpack(p, s.head(sz))); };
    const double h = 2e-7;
    double t = 0.0;
    double worst = -std::numeric_limits<double>::infinity();
    double scale = storage(x);
    const double h0 = storage(x);
    for (int step = 0; step < 50000; ++step) {
        const Vector k1 = f(t, x);
        const Vector k2 = f(t + h / 2, x + h / 2 * k1);
        const Vector k3 = f(t + h / 2, x + h / 2 * k2);
        const Vector k4 = f(t + h, x + h * k3);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        t += h;
        const double v = storage(x);
        scale = std::max(scale, v);
        worst = std::max(worst, (v - h0) - x[sz]);
    }
    return worst / std::max(scale, 1e-12);
}

Outcome network_passivity()
{
    std::mt19937_64 rng(99);
    double worst = -std::numeric_limits<double>::infinity();
    int runs = 0;
    for (int buses : {2, 5}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto p = mgrid::testing::random_network(rng, buses);
            worst = std::max(worst, storage_violation(p, rng));
            ++runs;
        }
    }
    return {worst <= 1e-6, "worst (dV - supply) / peak energy over " + std::to_string(runs) +
                               " random 2- and 5-bus networks " + fmt("%.2e", worst) + " (limit 1e-6, negative means slack)"};
}

Outcome two_inverter_operating_point()
{
    const auto parsed = bundled("benchmark_2inv");
    SystemModel model(parsed.scenario.spec);
    const auto eq = solve_equilibrium(model);
    struct Entry {
        std::string name;
        double expected;
        double actual;
    };
    std::vector<Entry> entries;
    const double ref[2][11] = {{-0.0231, 14.3, -3.18, 310, -3.55, 13.4, -7.83, 0.33, 0.036},
                               {-0.0162, 14.2, -2.73, 311, -5.04, 13.2, -7.39, 0.33, -0.037}};
    for (int k = 0; k < 2; ++k) {
        const auto u = model.unit_state(eq.x, k);
        const auto sig = model.unit_signals(eq.x, k);
        const std::string s = std::to_string(k + 1);
        const double* r = ref[k];
        entries.push_back({"delta" + s, r[0], u.phys.delta});
        entries.push_back({"iD" + s, r[1], u.phys.i.x()});
        entries.push_back({"iQ" + s, r[2], u.phys.i.y()});
        entries.push_back({"voD" + s, r[3], u.phys.vo.x()});
        entries.push_back({"voQ" + s, r[4], u.phys.vo.y()});
        entries.push_back({"ioD" + s, r[5], u.phys.io.x()});
        entries.push_back({"ioQ" + s, r[6], u.phys.io.y()});
        entries.push_back({"mD" + s, r[7], sig.m.x()});
        entries.push_back({"mQ" + s, r[8], sig.m.y()});
    }
    int within = 0;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& e : entries) {
        const double rel = std::abs(e.actual - e.expected) / std::abs(e.expected);
        within += rel <= 0.02 ? 1 : 0;
        if (rel > worst) {
            worst = rel;
            worst_name = e.name + " " + fmt2("%.4g vs %.4g", e.actual, e.expected);
        }
    }
    return {within == static_cast<int>(entries.size()),
            std::to_string(within) + "/" + std::to_string(entries.size()) +
                " entries within 2%; worst " + worst_name + " (" + fmt("%.0f%%", 100 * worst) + ")"};
}

Outcome plug_and_play()
{
    const auto parsed = bundled("plugplay_3inv");
    const auto traj = simulate(parsed.scenario);
    bool bounded = true;
    double f_dev = 0.0;
    double vo_peak = 0.0;
    for (std::size_t c = 0; c < traj.channel_names.size(); ++c) {
        const auto& name = traj.channel_names[c];
        for (std::size_t i = 0; i < traj.time.size(); ++i) {
            const double v = traj.channels[c][i];
            if (std::isnan(v)) {
                bounded = bounded && name.back() == '3' && traj.time[i] <= 0.15 + 1e-12;
                continue;
            }
            bounded = bounded && std::isfinite(v);
            if (name[0] == 'f') f_dev = std::max(f_dev, std::abs(v - 50.0));
            if (name.rfind("vo", 0) == 0 && name.size() == 3) vo_peak = std::max(vo_peak, v);
        }
    }
    bounded = bounded && f_dev < 5.0 && vo_peak < 1.5 * 311.0;
    const auto tail = steady_state_report(traj, 0.5);
    int unsettled = 0;
    std::string first_unsettled;
    for (const auto& c : tail.channels) {
        if (!c.settled) {
            if (unsettled == 0) first_unsettled = c.name;
            ++unsettled;
        }
    }
    const bool all_three = tail.channels.size() == traj.channel_names.size();

    const SweepOptions opts{1e-2, 1e6, 1000, true};
    SystemModel before_model(parsed.scenario.spec);
    const auto before = certify_inverters(solve_equilibrium(before_model), parsed.scenario.spec, opts);
    SystemModel after_model(parsed.scenario.spec);
    after_model.set_inverter_active(2, true);
    const auto after = certify_inverters(solve_equilibrium(after_model), parsed.scenario.spec, opts);
    int passing = 0;
    for (const auto& c : before) passing += c.pass ? 1 : 0;
    const int before_pass = passing;
    passing = 0;
    for (const auto& c : after) passing += c.pass ? 1 : 0;
    const int after_pass = passing;

    Outcome o;
    o.pass = bounded && unsettled == 0 && all_three && before_pass == 2 && after_pass == 3;
    o.detail = std::string(bounded ? "bounded" : "unbounded") + " transient (peak |f - 50| " + fmt("%.3f", f_dev) +
               " Hz, peak |vo| " + fmt("%.1f", vo_peak) + " V); " +
               (unsettled == 0 ? std::string("all channels settled in the final 0.5 s")
                               : std::to_string(unsettled) + " channels unsettled, first " + first_unsettled) +
               "; passivity " + std::to_string(before_pass) + "/2 before and " + std::to_string(after_pass) +
               "/3 after connection";
    return o;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"linearization matches finite differences", linearization_oracle},
        {"inverter passivity sweep", passivity_reproduction},
        {"frequency restoration after load steps", frequency_restoration},
        {"proportional power sharing", power_sharing},
        {"voltage and DC-link bounds", voltage_bounds},
        {"secondary-control stability certificate", consensus_certificate_check},
        {"gain matrix dominance and symmetry", gain_matrix_properties},
        {"network storage inequality", network_passivity},
        {"two-inverter benchmark operating point", two_inverter_operating_point},
        {"plug-and-play connection", plug_and_play},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
