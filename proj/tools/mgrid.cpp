// SPDX-License-Identifier: Apache-2.0
/// Command-line front end: scenario ingestion, subcommand dispatch and result emission.

#include "mgrid/certify.hpp"
#include "mgrid/error.hpp"
#include "mgrid/linearize.hpp"
#include "mgrid/passivity.hpp"
#include "mgrid/scenario.hpp"
#include "mgrid/secondary.hpp"
#include "mgrid/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#ifndef MGRID_SCENARIO_DIR
#define MGRID_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum ExitCode : int {
    kExitPass = 0,
    kExitSchema = 1,
    kExitConvergence = 2,
    kExitCertificateFail = 3,
    kExitNumerical = 4,
};

struct CommonOptions {
    std::string scenario;
    std::string out = ".";
    int sweep_points = 1000;
    double omega_min = 1e-2;
    double omega_max = 1e6;
    double tol = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 1;
    int buses = 5;
    bool use_equilibrium = false;
};

/// Accepts a path, a path without the .json suffix, or the name of a bundled scenario.
fs::path resolve_scenario(const std::string& name) {
    const fs::path direct(name);
    if (fs::is_regular_file(direct)) return direct;
    const fs::path with_ext(name + ".json");
    if (fs::is_regular_file(with_ext)) return with_ext;
    const fs::path bundled = fs::path(MGRID_SCENARIO_DIR) / (name + ".json");
    if (fs::is_regular_file(bundled)) return bundled;
    throw mgrid::SchemaError("/", "scenario '" + name + "' not found");
}

mgrid::ParsedScenario load(const CommonOptions& opts) {
    if (opts.scenario.empty()) throw mgrid::SchemaError("/", "no scenario given");
    auto parsed = mgrid::parse_scenario(resolve_scenario(opts.scenario));
    for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
    return parsed;
}

fs::path output_path(const CommonOptions& opts, const std::string& file) {
    fs::create_directories(opts.out);
    return fs::path(opts.out) / file;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw mgrid::Error("cannot write " + path.string());
    out << text;
}

/// JSON numbers cannot hold NaN or infinities; those become null.
ordered_json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

ordered_json certificate_json(const mgrid::Certificate& cert) {
    ordered_json j;
    j["kind"] = mgrid::to_string(cert.kind);
    j["pass"] = cert.pass;
    j["margin"] = number(cert.margin);
    j["reason"] = cert.reason;
    ordered_json values = ordered_json::object();
    for (const auto& [key, v] : cert.values) values[key] = number(v);
    j["values"] = values;
    ordered_json series = ordered_json::object();
    for (const auto& [key, vs] : cert.series) {
        ordered_json arr = ordered_json::array();
        for (double v : vs) arr.push_back(number(v));
        series[key] = arr;
    }
    j["series"] = series;
    j["warnings"] = cert.warnings;
    return j;
}

mgrid::Equilibrium solve(const mgrid::SystemModel& model, const CommonOptions& opts) {
    mgrid::EquilibriumOptions eo;
    if (std::isfinite(opts.tol)) eo.tol = opts.tol;
    auto eq = mgrid::solve_equilibrium(model, std::nullopt, eo);
    for (const auto& w : eq.warnings) std::cerr << "warning: " << w << "\n";
    return eq;
}

int run_simulate(const CommonOptions& opts) {
    const auto parsed = load(opts);
    const auto traj = mgrid::simulate(parsed.scenario);

    const auto csv_path = output_path(opts, parsed.outputs.trajectory);
    {
        std::ofstream out(csv_path);
        if (!out) throw mgrid::Error("cannot write " + csv_path.string());
        mgrid::write_trajectory_csv(traj, out);
    }

    const auto report = mgrid::steady_state_report(traj, parsed.outputs.window);
    ordered_json summary;
    summary["scenario"] = parsed.name;
    summary["horizon"] = parsed.scenario.horizon;
    summary["samples"] = traj.time.size();
    summary["window"] = {report.t_begin, report.t_end};
    ordered_json channels = ordered_json::object();
    bool all_settled = true;
    for (const auto& c : report.channels) {
        channels[c.name] = {{"mean", number(c.mean)},
                            {"max_deviation", number(c.max_deviation)},
                            {"settled", c.settled}};
        all_settled = all_settled && c.settled;
    }
    summary["settled"] = all_settled;
    summary["steady_state"] = channels;
    summary["diagnostics"] = {{"overmodulation", traj.diagnostics.overmodulation},
                              {"angle_out_of_domain", traj.diagnostics.angle_out_of_domain},
                              {"cpl_floor_hits", traj.diagnostics.cpl_floor_hits},
                              {"current_limit_active", traj.diagnostics.current_limit_active}};
    summary["log"] = traj.log;
    write_text(output_path(opts, parsed.outputs.summary), summary.dump(2) + "\n");

    std::printf("simulate %s: %zu samples, %s, wrote %s\n", parsed.name.c_str(), traj.time.size(),
                all_settled ? "settled" : "not settled", csv_path.string().c_str());
    return kExitPass;
}

int run_equilibrium(const CommonOptions& opts) {
    const auto parsed = load(opts);
    mgrid::SystemModel model(parsed.scenario.spec);
    const auto eq = solve(model, opts);
    const auto path = output_path(opts, "equilibrium.json");
    write_text(path, mgrid::emit_equilibrium(eq, model));
    std::printf("equilibrium %s: residual %.3e after %d iterations%s, wrote %s\n", parsed.name.c_str(),
                eq.residual_norm, eq.iterations, eq.used_fallback ? " (fallback)" : "",
                path.string().c_str());
    return kExitPass;
}

int run_passivity(const CommonOptions& opts) {
    const auto parsed = load(opts);
    const auto& spec = parsed.scenario.spec;
    mgrid::SystemModel model(spec);
    const auto eq = solve(model, opts);

    mgrid::SweepOptions so;
    so.points = opts.sweep_points;
    so.omega_min = opts.omega_min;
    so.omega_max = opts.omega_max;

    std::vector<int> units;
    std::vector<mgrid::PassivitySweep> sweeps;
    ordered_json certs = ordered_json::array();
    bool all_pass = true;
    for (int k = 0; k < spec.inverter_count(); ++k) {
        if (!eq.active[static_cast<std::size_t>(k)]) continue;
        const auto lin = mgrid::build_linearized(eq, spec, {k});
        auto sweep = mgrid::passivity_sweep(lin, so);
        auto cert = mgrid::passivity_certificate(sweep);
        cert.values["inverter"] = k + 1;
        all_pass = all_pass && cert.pass;
        auto j = certificate_json(cert);
        certs.push_back(j);
        std::printf("passivity inverter %d: %s margin %.6e at omega %.6e rad/s\n", k + 1,
                    cert.pass ? "PASS" : "FAIL", cert.margin, sweep.refined_omega);
        units.push_back(k);
        sweeps.push_back(std::move(sweep));
    }

    const auto csv_path = output_path(opts, "passivity_sweep.csv");
    {
        std::ofstream out(csv_path);
        if (!out) throw mgrid::Error("cannot write " + csv_path.string());
        out << "omega";
        for (int k : units) out << ",min_eig" << (k + 1);
        out << "\n";
        char buf[64];
        const std::size_t rows = sweeps.empty() ? 0 : sweeps.front().omega_grid.size();
        for (std::size_t r = 0; r < rows; ++r) {
            std::snprintf(buf, sizeof buf, "%.10g", sweeps.front().omega_grid[r]);
            out << buf;
            for (const auto& s : sweeps) {
                std::snprintf(buf, sizeof buf, ",%.10g", s.min_eigenvalues[r]);
                out << buf;
            }
            out << "\n";
        }
    }

    ordered_json doc;
    doc["scenario"] = parsed.name;
    doc["pass"] = all_pass;
    doc["certificates"] = certs;
    write_text(output_path(opts, "passivity_certificate.json"), doc.dump(2) + "\n");
    return all_pass ? kExitPass : kExitCertificateFail;
}

int run_certify(const CommonOptions& opts) {
    const auto parsed = load(opts);
    mgrid::SystemModel model(parsed.scenario.spec);
    const auto eq = solve(model, opts);
    const auto cert = mgrid::consensus_certificate(parsed.scenario.spec, eq);
    ordered_json doc = certificate_json(cert);
    doc["scenario"] = parsed.name;
    write_text(output_path(opts, "secondary_certificate.json"), doc.dump(2) + "\n");
    std::printf("certify %s: %s margin %.6e%s%s\n", parsed.name.c_str(), cert.pass ? "PASS" : "FAIL",
                cert.margin, cert.reason.empty() ? "" : ", ", cert.reason.c_str());
    return cert.pass ? kExitPass : kExitCertificateFail;
}

int run_share(const CommonOptions& opts) {
    const auto parsed = load(opts);
    const auto& spec = parsed.scenario.spec;
    const double tol = std::isfinite(opts.tol) ? opts.tol : 0.02;

    std::vector<mgrid::SharingSample> samples;
    std::string source;
    if (opts.use_equilibrium || parsed.scenario.horizon <= 0.0) {
        mgrid::SystemModel model(spec);
        const auto eq = solve(model, CommonOptions{});
        for (int k = 0; k < spec.inverter_count(); ++k) {
            if (!eq.active[static_cast<std::size_t>(k)]) continue;
            const auto u = model.unit_state(eq.x, k);
            samples.push_back({spec.inverters[static_cast<std::size_t>(k)].gains.freq.kp, u.phys.io.x(),
                               u.phys.vo.x()});
        }
        source = "equilibrium";
    } else {
        const auto traj = mgrid::simulate(parsed.scenario);
        const auto report = mgrid::steady_state_report(traj, parsed.outputs.window);
        for (int k = 0; k < spec.inverter_count(); ++k) {
            const auto suffix = std::to_string(k + 1);
            const auto& io = report.channels;
            auto find = [&](const std::string& name) -> const mgrid::ChannelStats* {
                for (const auto& c : io)
                    if (c.name == name) return &c;
                return nullptr;
            };
            const auto* ioD = find("ioD" + suffix);
            const auto* voD = find("voD" + suffix);
            if (ioD == nullptr || voD == nullptr) continue;
            samples.push_back({spec.inverters[static_cast<std::size_t>(k)].gains.freq.kp, ioD->mean, voD->mean});
        }
        source = "terminal window";
    }

    const auto cert = mgrid::check_power_sharing(samples, tol);
    ordered_json doc = certificate_json(cert);
    doc["scenario"] = parsed.name;
    doc["source"] = source;
    write_text(output_path(opts, "sharing_certificate.json"), doc.dump(2) + "\n");
    std::printf("share %s (%s): %s margin %.6e\n", parsed.name.c_str(), source.c_str(),
                cert.pass ? "PASS" : "FAIL", cert.margin);
    return cert.pass ? kExitPass : kExitCertificateFail;
}

int run_generate(const CommonOptions& opts) {
    const auto parsed = mgrid::random_scenario(opts.seed, opts.buses);
    const auto path = output_path(opts, parsed.name + ".json");
    write_text(path, mgrid::emit_scenario(parsed));
    std::printf("generate: wrote %s\n", path.string().c_str());
    return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inverter-based microgrid simulation and certification"};
    app.require_subcommand(1);

    CommonOptions opts;
    auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("--scenario,scenario", opts.scenario, "Scenario file or bundled scenario name")
            ->required();
        sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
    };

    auto* simulate = app.add_subcommand("simulate", "Integrate a scenario and write trajectory and summary");
    add_scenario(simulate);

    auto* equilibrium = app.add_subcommand("equilibrium", "Solve and write the operating point");
    add_scenario(equilibrium);
    equilibrium->add_option("--tol", opts.tol, "Newton tolerance on the scaled residual");

    auto* passivity = app.add_subcommand("passivity", "Frequency sweep of each inverter's linearization");
    add_scenario(passivity);
    passivity->add_option("--sweep-points", opts.sweep_points, "Grid points")->check(CLI::Range(2, 10000000));
    passivity->add_option("--omega-min", opts.omega_min, "Lowest frequency [rad/s]")->check(CLI::PositiveNumber);
    passivity->add_option("--omega-max", opts.omega_max, "Highest frequency [rad/s]")->check(CLI::PositiveNumber);
    passivity->add_option("--tol", opts.tol, "Newton tolerance on the scaled residual");

    auto* certify = app.add_subcommand("certify", "Secondary-control stability certificate");
    add_scenario(certify);
    certify->add_option("--tol", opts.tol, "Newton tolerance on the scaled residual");

    auto* share = app.add_subcommand("share", "Proportional power-sharing certificate");
    add_scenario(share);
    share->add_option("--tol", opts.tol, "Relative sharing tolerance (default 0.02)");
    share->add_flag("--equilibrium", opts.use_equilibrium, "Use the solved equilibrium instead of a simulation");

    auto* generate = app.add_subcommand("generate", "Write a randomized benchmark scenario");
    generate->add_option("--seed", opts.seed, "Random seed")->capture_default_str();
    generate->add_option("--buses", opts.buses, "Number of buses")->check(CLI::Range(1, 64))->capture_default_str();
    generate->add_option("--out", opts.out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitPass : kExitSchema;
    }

    if (opts.omega_min >= opts.omega_max) {
        std::cerr << "error: --omega-min must be below --omega-max\n";
        return kExitSchema;
    }

    try {
        if (simulate->parsed()) return run_simulate(opts);
        if (equilibrium->parsed()) return run_equilibrium(opts);
        if (passivity->parsed()) return run_passivity(opts);
        if (certify->parsed()) return run_certify(opts);
        if (share->parsed()) return run_share(opts);
        if (generate->parsed()) return run_generate(opts);
    } catch (const mgrid::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const mgrid::ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const mgrid::ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << " (best residual " << e.best_residual() << ")\n";
        return kExitConvergence;
    } catch (const mgrid::IntegrationError& e) {
        std::cerr << "integration failed: " << e.what() << " (last valid time " << e.last_valid_time() << " s)\n";
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitSchema;
}
