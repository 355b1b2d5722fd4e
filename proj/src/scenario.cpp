// SPDX-License-Identifier: Apache-2.0
#include "mgrid/scenario.hpp"

#include "mgrid/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace mgrid {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string join(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

void require_object(const json& j, const std::string& path)
{
    if (!j.is_object()) {
        throw SchemaError(path.empty() ? "/" : path, "expected an object");
    }
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
    require_object(j, path);
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            ok = ok || item.key() == a;
        }
        if (!ok) {
            throw SchemaError(join(path, item.key()), "unknown key");
        }
    }
}

const json& require(const json& j, const std::string& key, const std::string& path)
{
    if (!j.contains(key)) {
        throw SchemaError(join(path, key), "missing required field");
    }
    return j.at(key);
}

double as_number(const json& j, const std::string& path)
{
    if (!j.is_number()) {
        throw SchemaError(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw SchemaError(path, "expected a finite number");
    }
    return v;
}

double number(const json& j, const std::string& key, const std::string& path, double fallback)
{
    return j.contains(key) ? as_number(j.at(key), join(path, key)) : fallback;
}

double required_number(const json& j, const std::string& key, const std::string& path)
{
    return as_number(require(j, key, path), join(path, key));
}

double check_positive(double v, const std::string& path, const std::string& who)
{
    if (!(v > 0.0)) {
        throw SchemaError(path, who + " must be positive");
    }
    return v;
}

double check_nonnegative(double v, const std::string& path, const std::string& who)
{
    if (!(v >= 0.0)) {
        throw SchemaError(path, who + " must be non-negative");
    }
    return v;
}

bool boolean(const json& j, const std::string& key, const std::string& path, bool fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_boolean()) {
        throw SchemaError(join(path, key), "expected true or false");
    }
    return j.at(key).get<bool>();
}

std::string text(const json& j, const std::string& key, const std::string& path, const std::string& fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_string()) {
        throw SchemaError(join(path, key), "expected a string");
    }
    return j.at(key).get<std::string>();
}

int bus_index(const json& j, const std::string& path, int bus_count)
{
    if (!j.is_number_integer()) {
        throw SchemaError(path, "expected a 1-based bus number");
    }
    const int b = j.get<int>();
    if (b < 1 || b > bus_count) {
        throw SchemaError(path, "bus " + std::to_string(b) + " outside 1.." + std::to_string(bus_count));
    }
    return b - 1;
}

const json& require_array(const json& j, const std::string& path)
{
    if (!j.is_array()) {
        throw SchemaError(path, "expected an array");
    }
    return j;
}

std::vector<Edge> parse_edges(const json& j, const std::string& path, int node_count, const char* node_word)
{
    std::vector<Edge> edges;
    require_array(j, path);
    for (std::size_t z = 0; z < j.size(); ++z) {
        const std::string p = join(path, z);
        const json& e = j[z];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            throw SchemaError(p, "expected a pair of 1-based " + std::string(node_word) + " numbers");
        }
        const int a = e[0].get<int>();
        const int b = e[1].get<int>();
        if (a < 1 || a > node_count || b < 1 || b > node_count) {
            throw SchemaError(p, std::string(node_word) + " number outside 1.." + std::to_string(node_count));
        }
        if (a == b) {
            throw SchemaError(p, "self-loop at " + std::string(node_word) + " " + std::to_string(a));
        }
        edges.push_back({a - 1, b - 1});
    }
    return edges;
}

void parse_params(const json& j, const std::string& path, const std::string& who, InverterParams& p,
                  std::vector<std::string>& warnings)
{
    check_keys(j, path, {"Rf", "Lf", "Cf", "Gs", "Rc", "Lc", "Cdc", "Gdc"});
    struct Field {
        const char* key;
        double* target;
        bool capacitance;
    };
    const Field fields[] = {{"Rf", &p.Rf, false}, {"Lf", &p.Lf, false},   {"Cf", &p.Cf, true},
                            {"Gs", &p.Gs, false}, {"Rc", &p.Rc, false},   {"Lc", &p.Lc, false},
                            {"Cdc", &p.Cdc, true}, {"Gdc", &p.Gdc, false}};
    for (const Field& f : fields) {
        if (j.contains(f.key)) {
            const std::string p_key = join(path, f.key);
            *f.target = check_positive(as_number(j.at(f.key), p_key), p_key, who + ": " + f.key);
            if (f.capacitance && *f.target > 1.0) {
                warnings.push_back(p_key + ": capacitance above 1 F, check the units");
            }
        }
    }
}

void parse_gains(const json& j, const std::string& path, const std::string& who, ControlGains& g)
{
    check_keys(j, path,
               {"kp", "kI", "Lambda_P", "Lambda_I", "vdc_ref", "cp", "cI", "lambda_P", "lambda_I", "nq", "Vn",
                "i_max"});
    auto pos = [&](const char* key, double& target) {
        if (j.contains(key)) {
            const std::string p = join(path, key);
            target = check_positive(as_number(j.at(key), p), p, who + ": " + key);
        }
    };
    pos("kp", g.freq.kp);
    if (j.contains("kI")) {
        const std::string p = join(path, "kI");
        g.freq.kI = check_nonnegative(as_number(j.at("kI"), p), p, who + ": kI");
    }
    pos("Lambda_P", g.dc.Lambda_P);
    pos("Lambda_I", g.dc.Lambda_I);
    pos("vdc_ref", g.dc.vdc_ref);
    pos("cp", g.ac.cp);
    pos("cI", g.ac.cI);
    pos("lambda_P", g.ac.lambda_P);
    pos("lambda_I", g.ac.lambda_I);
    pos("Vn", g.ac.Vn);
    if (j.contains("nq")) {
        const std::string p = join(path, "nq");
        g.ac.nq = check_nonnegative(as_number(j.at("nq"), p), p, who + ": nq");
    }
    if (j.contains("i_max") && !j.at("i_max").is_null()) {
        pos("i_max", g.ac.i_max);
    }
}

template <typename T>
std::vector<T> scalar_or_array(const json& j, const std::string& path, std::size_t count,
                               const std::function<T(const json&, const std::string&)>& read)
{
    std::vector<T> out;
    if (j.is_array()) {
        if (j.size() != count) {
            throw SchemaError(path, "expected " + std::to_string(count) + " entries");
        }
        for (std::size_t k = 0; k < count; ++k) {
            out.push_back(read(j[k], join(path, k)));
        }
    } else {
        const T v = read(j, path);
        out.assign(count, v);
    }
    return out;
}

IntegratorMethod parse_method(const std::string& s, const std::string& path)
{
    if (s == "rk4") {
        return IntegratorMethod::Rk4;
    }
    if (s == "dopri5") {
        return IntegratorMethod::DormandPrince;
    }
    throw SchemaError(path, "unknown method '" + s + "' (rk4 | dopri5)");
}

EventKind parse_event_kind(const std::string& s, const std::string& path)
{
    for (EventKind k : {EventKind::LoadStep, EventKind::InverterConnect, EventKind::InverterDisconnect,
                        EventKind::SecondaryEnable}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw SchemaError(path, "unknown event kind '" + s + "'");
}

Vector state_from_json(const json& j, const std::string& path)
{
    require_array(j, path);
    Vector x(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        x[static_cast<Eigen::Index>(k)] = as_number(j[k], join(path, k));
    }
    return x;
}

json parse_json(const std::string& content, const std::string& what)
{
    try {
        return json::parse(content, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", what + " is not valid JSON: " + e.what());
    }
}

} // namespace

ParsedScenario parse_scenario_text(const std::string& content, const std::filesystem::path& base_dir)
{
    const json root = parse_json(content, "scenario");
    check_keys(root, "",
               {"schema_version", "name", "description", "omega0", "graph", "lines", "shunts", "loads",
                "inverter_defaults", "inverters", "secondary", "events", "horizon", "integrator", "outputs",
                "initial_state"});
    const json& version = require(root, "schema_version", "");
    if (!version.is_number_integer() || version.get<int>() != kScenarioSchemaVersion) {
        throw SchemaError("/schema_version", "unsupported schema version (expected " +
                                                 std::to_string(kScenarioSchemaVersion) + ")");
    }
    ParsedScenario out;
    out.name = text(root, "name", "", "");
    out.description = text(root, "description", "", "");
    Scenario& sc = out.scenario;
    MicrogridSpec& spec = sc.spec;
    NetworkParams& net = spec.network;
    net.omega0 = check_positive(number(root, "omega0", "", net.omega0), "/omega0", "omega0");

    // graph
    const json& graph = require(root, "graph", "");
    check_keys(graph, "/graph", {"buses", "edges"});
    const json& buses_j = require(graph, "buses", "/graph");
    if (!buses_j.is_number_integer() || buses_j.get<int>() < 1) {
        throw SchemaError("/graph/buses", "expected a positive integer");
    }
    const int buses = buses_j.get<int>();
    std::vector<Edge> edges =
        graph.contains("edges") ? parse_edges(graph.at("edges"), "/graph/edges", buses, "bus") : std::vector<Edge>{};
    try {
        net.graph = Graph(buses, edges);
    } catch (const ModelError& e) {
        throw SchemaError("/graph", e.what());
    }
    const auto nb = static_cast<std::size_t>(buses);

    // lines
    if (!edges.empty()) {
        const json& lines = require_array(require(root, "lines", ""), "/lines");
        if (lines.size() != edges.size()) {
            throw SchemaError("/lines", "expected one entry per edge (" + std::to_string(edges.size()) + ")");
        }
        for (std::size_t z = 0; z < lines.size(); ++z) {
            const std::string p = join("/lines", z);
            check_keys(lines[z], p, {"R", "L"});
            const std::string who = "line " + std::to_string(z + 1);
            LineParams lp;
            lp.R = check_positive(required_number(lines[z], "R", p), join(p, "R"), who + ": R");
            lp.L = check_positive(required_number(lines[z], "L", p), join(p, "L"), who + ": L");
            net.lines.push_back(lp);
        }
    } else if (root.contains("lines") && !require_array(root.at("lines"), "/lines").empty()) {
        throw SchemaError("/lines", "lines given for a graph without edges");
    }

    // shunts
    const json& shunts = require(root, "shunts", "");
    check_keys(shunts, "/shunts", {"C", "G"});
    const std::function<double(const json&, const std::string&)> read_pos = [](const json& j, const std::string& p) {
        return check_positive(as_number(j, p), p, "shunt value");
    };
    const std::vector<double> cs = scalar_or_array<double>(require(shunts, "C", "/shunts"), "/shunts/C", nb, read_pos);
    const std::vector<double> gs = scalar_or_array<double>(require(shunts, "G", "/shunts"), "/shunts/G", nb, read_pos);
    for (std::size_t b = 0; b < nb; ++b) {
        net.shunts.push_back({cs[b], gs[b]});
        if (cs[b] > 1.0) {
            out.warnings.push_back("/shunts/C: capacitance above 1 F at bus " + std::to_string(b + 1) +
                                   ", check the units");
        }
    }

    // loads
    net.rl_loads.assign(nb, std::nullopt);
    spec.cpl_P.assign(nb, 0.0);
    spec.cpl_Q.assign(nb, 0.0);
    if (root.contains("loads")) {
        const json& loads = root.at("loads");
        check_keys(loads, "/loads", {"rl", "constant_power", "switched", "cpl_voltage_floor", "cpl_time_constant"});
        if (loads.contains("rl")) {
            const json& rl = require_array(loads.at("rl"), "/loads/rl");
            for (std::size_t k = 0; k < rl.size(); ++k) {
                const std::string p = join("/loads/rl", k);
                check_keys(rl[k], p, {"bus", "R", "L"});
                const int b = bus_index(require(rl[k], "bus", p), join(p, "bus"), buses);
                if (net.rl_loads[static_cast<std::size_t>(b)]) {
                    throw SchemaError(p, "bus " + std::to_string(b + 1) + " already has an RL load");
                }
                const std::string who = "load at bus " + std::to_string(b + 1);
                RlLoad load;
                load.R = check_positive(required_number(rl[k], "R", p), join(p, "R"), who + ": R");
                load.L = check_positive(required_number(rl[k], "L", p), join(p, "L"), who + ": L");
                net.rl_loads[static_cast<std::size_t>(b)] = load;
            }
        }
        if (loads.contains("constant_power")) {
            const json& cp = require_array(loads.at("constant_power"), "/loads/constant_power");
            for (std::size_t k = 0; k < cp.size(); ++k) {
                const std::string p = join("/loads/constant_power", k);
                check_keys(cp[k], p, {"bus", "P", "Q"});
                const int b = bus_index(require(cp[k], "bus", p), join(p, "bus"), buses);
                spec.cpl_P[static_cast<std::size_t>(b)] += required_number(cp[k], "P", p);
                spec.cpl_Q[static_cast<std::size_t>(b)] += number(cp[k], "Q", p, 0.0);
            }
        }
        if (loads.contains("switched")) {
            const json& sw = require_array(loads.at("switched"), "/loads/switched");
            for (std::size_t k = 0; k < sw.size(); ++k) {
                const std::string p = join("/loads/switched", k);
                check_keys(sw[k], p, {"name", "bus", "P", "Q", "on"});
                SwitchedLoad load;
                load.bus = bus_index(require(sw[k], "bus", p), join(p, "bus"), buses);
                load.name = text(sw[k], "name", p, "load" + std::to_string(k + 1));
                load.P = required_number(sw[k], "P", p);
                load.Q = number(sw[k], "Q", p, 0.0);
                load.on = boolean(sw[k], "on", p, false);
                for (const auto& other : spec.switched_loads) {
                    if (other.name == load.name) {
                        throw SchemaError(join(p, "name"), "duplicate switched load name '" + load.name + "'");
                    }
                }
                spec.switched_loads.push_back(load);
            }
        }
        net.cpl.voltage_floor = check_positive(number(loads, "cpl_voltage_floor", "/loads", net.cpl.voltage_floor),
                                               "/loads/cpl_voltage_floor", "cpl_voltage_floor");
        net.cpl.time_constant = check_nonnegative(
            number(loads, "cpl_time_constant", "/loads", net.cpl.time_constant), "/loads/cpl_time_constant",
            "cpl_time_constant");
    }

    // inverters
    InverterParams default_params;
    ControlGains default_gains;
    if (root.contains("inverter_defaults")) {
        const json& d = root.at("inverter_defaults");
        check_keys(d, "/inverter_defaults", {"params", "gains"});
        if (d.contains("params")) {
            parse_params(d.at("params"), "/inverter_defaults/params", "inverter defaults", default_params,
                         out.warnings);
        }
        if (d.contains("gains")) {
            parse_gains(d.at("gains"), "/inverter_defaults/gains", "inverter defaults", default_gains);
        }
    }
    const json& invs = require_array(require(root, "inverters", ""), "/inverters");
    if (invs.empty()) {
        throw SchemaError("/inverters", "at least one inverter is required");
    }
    for (std::size_t k = 0; k < invs.size(); ++k) {
        const std::string p = join("/inverters", k);
        const std::string who = "inverter " + std::to_string(k + 1);
        check_keys(invs[k], p, {"bus", "connected", "params", "gains"});
        InverterUnit unit;
        unit.bus = bus_index(require(invs[k], "bus", p), join(p, "bus"), buses);
        unit.connected = boolean(invs[k], "connected", p, true);
        unit.params = default_params;
        unit.gains = default_gains;
        if (invs[k].contains("params")) {
            parse_params(invs[k].at("params"), join(p, "params"), who, unit.params, out.warnings);
        }
        if (invs[k].contains("gains")) {
            parse_gains(invs[k].at("gains"), join(p, "gains"), who, unit.gains);
        }
        spec.inverters.push_back(unit);
    }
    const int n_inv = static_cast<int>(spec.inverters.size());

    // secondary
    if (root.contains("secondary")) {
        const json& s = root.at("secondary");
        check_keys(s, "/secondary", {"enabled", "alpha", "activation_time", "comm_edges"});
        spec.secondary.enabled = boolean(s, "enabled", "/secondary", false);
        spec.secondary.alpha =
            check_positive(number(s, "alpha", "/secondary", spec.secondary.alpha), "/secondary/alpha", "alpha");
        spec.secondary.activation_time = check_nonnegative(number(s, "activation_time", "/secondary", 0.0),
                                                           "/secondary/activation_time", "activation_time");
        if (s.contains("comm_edges")) {
            try {
                spec.secondary.comm_graph =
                    Graph(n_inv, parse_edges(s.at("comm_edges"), "/secondary/comm_edges", n_inv, "inverter"));
            } catch (const ModelError& e) {
                throw SchemaError("/secondary/comm_edges", e.what());
            }
        }
    }

    // events
    if (root.contains("events")) {
        const json& evs = require_array(root.at("events"), "/events");
        for (std::size_t k = 0; k < evs.size(); ++k) {
            const std::string p = join("/events", k);
            check_keys(evs[k], p, {"time", "kind", "target", "on"});
            Event ev;
            ev.time = check_nonnegative(required_number(evs[k], "time", p), join(p, "time"), "event time");
            const json& kind = require(evs[k], "kind", p);
            if (!kind.is_string()) {
                throw SchemaError(join(p, "kind"), "expected a string");
            }
            ev.kind = parse_event_kind(kind.get<std::string>(), join(p, "kind"));
            ev.on = boolean(evs[k], "on", p, true);
            const std::string pt = join(p, "target");
            switch (ev.kind) {
            case EventKind::LoadStep: {
                const json& t = require(evs[k], "target", p);
                if (!t.is_string()) {
                    throw SchemaError(pt, "expected a switched load name");
                }
                const std::string name = t.get<std::string>();
                bool found = false;
                for (std::size_t s = 0; s < spec.switched_loads.size(); ++s) {
                    if (spec.switched_loads[s].name == name) {
                        ev.target = s;
                        found = true;
                    }
                }
                if (!found) {
                    throw SchemaError(pt, "unknown switched load '" + name + "'");
                }
                break;
            }
            case EventKind::InverterConnect:
            case EventKind::InverterDisconnect: {
                const json& t = require(evs[k], "target", p);
                if (!t.is_number_integer() || t.get<int>() < 1 || t.get<int>() > n_inv) {
                    throw SchemaError(pt, "expected an inverter number in 1.." + std::to_string(n_inv));
                }
                ev.target = static_cast<std::size_t>(t.get<int>() - 1);
                break;
            }
            case EventKind::SecondaryEnable:
                if (evs[k].contains("target")) {
                    throw SchemaError(pt, "secondary-enable takes no target");
                }
                break;
            }
            sc.events.push_back(ev);
        }
    }

    sc.horizon = check_positive(number(root, "horizon", "", sc.horizon), "/horizon", "horizon");
    if (root.contains("integrator")) {
        const json& ig = root.at("integrator");
        check_keys(ig, "/integrator", {"method", "step", "atol", "rtol", "max_step", "output_interval"});
        IntegratorSettings& s = sc.integrator;
        s.method = parse_method(text(ig, "method", "/integrator", "rk4"), "/integrator/method");
        s.step = check_positive(number(ig, "step", "/integrator", s.step), "/integrator/step", "step");
        s.atol = check_positive(number(ig, "atol", "/integrator", s.atol), "/integrator/atol", "atol");
        s.rtol = check_positive(number(ig, "rtol", "/integrator", s.rtol), "/integrator/rtol", "rtol");
        s.max_step = check_positive(number(ig, "max_step", "/integrator", s.max_step), "/integrator/max_step",
                                    "max_step");
        s.output_interval = check_positive(number(ig, "output_interval", "/integrator", s.output_interval),
                                           "/integrator/output_interval", "output_interval");
    }
    if (root.contains("outputs")) {
        const json& o = root.at("outputs");
        check_keys(o, "/outputs", {"trajectory", "summary", "window"});
        out.outputs.trajectory = text(o, "trajectory", "/outputs", out.outputs.trajectory);
        out.outputs.summary = text(o, "summary", "/outputs", out.outputs.summary);
        out.outputs.window =
            check_positive(number(o, "window", "/outputs", out.outputs.window), "/outputs/window", "window");
    }
    if (root.contains("initial_state")) {
        const json& is = root.at("initial_state");
        if (is.is_string()) {
            const std::string mode = is.get<std::string>();
            if (mode == "flat") {
                sc.initial.mode = InitialMode::Flat;
            } else if (mode == "equilibrium") {
                sc.initial.mode = InitialMode::Equilibrium;
            } else {
                throw SchemaError("/initial_state", "expected \"flat\", \"equilibrium\" or an object");
            }
        } else {
            check_keys(is, "/initial_state", {"state", "file"});
            sc.initial.mode = InitialMode::Explicit;
            if (is.contains("state") == is.contains("file")) {
                throw SchemaError("/initial_state", "give exactly one of \"state\" or \"file\"");
            }
            if (is.contains("state")) {
                sc.initial.x = state_from_json(is.at("state"), "/initial_state/state");
            } else {
                const json& f = is.at("file");
                if (!f.is_string()) {
                    throw SchemaError("/initial_state/file", "expected a path");
                }
                std::filesystem::path file = f.get<std::string>();
                if (file.is_relative()) {
                    file = base_dir / file;
                }
                sc.initial.x = read_state_document(file);
            }
        }
    }
    try {
        sc.validate();
    } catch (const ModelError& e) {
        throw SchemaError("/", e.what());
    }
    return out;
}

ParsedScenario parse_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError(path.string(), "cannot open scenario file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str(), path.parent_path());
}

namespace {

json params_json(const InverterParams& p)
{
    return {{"Rf", p.Rf}, {"Lf", p.Lf}, {"Cf", p.Cf}, {"Gs", p.Gs},
            {"Rc", p.Rc}, {"Lc", p.Lc}, {"Cdc", p.Cdc}, {"Gdc", p.Gdc}};
}

json gains_json(const ControlGains& g)
{
    json j = {{"kp", g.freq.kp},         {"kI", g.freq.kI},         {"Lambda_P", g.dc.Lambda_P},
              {"Lambda_I", g.dc.Lambda_I}, {"vdc_ref", g.dc.vdc_ref}, {"cp", g.ac.cp},
              {"cI", g.ac.cI},           {"lambda_P", g.ac.lambda_P}, {"lambda_I", g.ac.lambda_I},
              {"nq", g.ac.nq},           {"Vn", g.ac.Vn}};
    if (std::isfinite(g.ac.i_max)) {
        j["i_max"] = g.ac.i_max;
    }
    return j;
}

json edges_json(const Graph& g)
{
    json e = json::array();
    for (const Edge& edge : g.edges()) {
        e.push_back({edge.source + 1, edge.sink + 1});
    }
    return e;
}

} // namespace

std::string emit_scenario(const ParsedScenario& parsed)
{
    const Scenario& sc = parsed.scenario;
    const MicrogridSpec& spec = sc.spec;
    const NetworkParams& net = spec.network;
    json root;
    root["schema_version"] = kScenarioSchemaVersion;
    root["name"] = parsed.name;
    root["description"] = parsed.description;
    root["omega0"] = net.omega0;
    root["graph"] = {{"buses", net.bus_count()}, {"edges", edges_json(net.graph)}};
    json lines = json::array();
    for (const auto& l : net.lines) {
        lines.push_back({{"R", l.R}, {"L", l.L}});
    }
    root["lines"] = lines;
    json c = json::array();
    json g = json::array();
    for (const auto& s : net.shunts) {
        c.push_back(s.C);
        g.push_back(s.G);
    }
    root["shunts"] = {{"C", c}, {"G", g}};
    json rl = json::array();
    json cp = json::array();
    for (int b = 0; b < net.bus_count(); ++b) {
        if (const auto& load = net.rl_loads[static_cast<std::size_t>(b)]) {
            rl.push_back({{"bus", b + 1}, {"R", load->R}, {"L", load->L}});
        }
        const double P = spec.cpl_P.empty() ? 0.0 : spec.cpl_P[static_cast<std::size_t>(b)];
        const double Q = spec.cpl_Q.empty() ? 0.0 : spec.cpl_Q[static_cast<std::size_t>(b)];
        if (P != 0.0 || Q != 0.0) {
            cp.push_back({{"bus", b + 1}, {"P", P}, {"Q", Q}});
        }
    }
    json sw = json::array();
    for (const auto& s : spec.switched_loads) {
        sw.push_back({{"name", s.name}, {"bus", s.bus + 1}, {"P", s.P}, {"Q", s.Q}, {"on", s.on}});
    }
    root["loads"] = {{"rl", rl},
                     {"constant_power", cp},
                     {"switched", sw},
                     {"cpl_voltage_floor", net.cpl.voltage_floor},
                     {"cpl_time_constant", net.cpl.time_constant}};
    json invs = json::array();
    for (const auto& inv : spec.inverters) {
        invs.push_back({{"bus", inv.bus + 1},
                        {"connected", inv.connected},
                        {"params", params_json(inv.params)},
                        {"gains", gains_json(inv.gains)}});
    }
    root["inverters"] = invs;
    json sec = {{"enabled", spec.secondary.enabled},
                {"alpha", spec.secondary.alpha},
                {"activation_time", spec.secondary.activation_time}};
    if (spec.secondary.comm_graph) {
        sec["comm_edges"] = edges_json(*spec.secondary.comm_graph);
    }
    root["secondary"] = sec;
    json evs = json::array();
    for (const auto& ev : sc.events) {
        json e = {{"time", ev.time}, {"kind", to_string(ev.kind)}, {"on", ev.on}};
        if (ev.kind == EventKind::LoadStep) {
            e["target"] = spec.switched_loads[ev.target].name;
        } else if (ev.kind != EventKind::SecondaryEnable) {
            e["target"] = ev.target + 1;
        }
        evs.push_back(e);
    }
    root["events"] = evs;
    root["horizon"] = sc.horizon;
    const auto& ig = sc.integrator;
    root["integrator"] = {{"method", ig.method == IntegratorMethod::Rk4 ? "rk4" : "dopri5"},
                          {"step", ig.step},
                          {"atol", ig.atol},
                          {"rtol", ig.rtol},
                          {"max_step", ig.max_step},
                          {"output_interval", ig.output_interval}};
    root["outputs"] = {{"trajectory", parsed.outputs.trajectory},
                       {"summary", parsed.outputs.summary},
                       {"window", parsed.outputs.window}};
    switch (sc.initial.mode) {
    case InitialMode::Flat:
        root["initial_state"] = "flat";
        break;
    case InitialMode::Equilibrium:
        root["initial_state"] = "equilibrium";
        break;
    case InitialMode::Explicit:
        root["initial_state"] = {{"state", to_std(sc.initial.x)}};
        break;
    }
    return root.dump(2) + "\n";
}

std::string emit_equilibrium(const Equilibrium& eq, const SystemModel& model)
{
    json root;
    root["schema_version"] = kScenarioSchemaVersion;
    root["kind"] = "equilibrium";
    root["residual_norm"] = eq.residual_norm;
    root["iterations"] = eq.iterations;
    root["used_fallback"] = eq.used_fallback;
    root["warnings"] = eq.warnings;
    json units = json::array();
    for (int k = 0; k < model.spec().inverter_count(); ++k) {
        if (!eq.active[static_cast<std::size_t>(k)]) {
            units.push_back({{"inverter", k + 1}, {"active", false}});
            continue;
        }
        const UnitState s = model.unit_state(eq.x, k);
        const auto k_idx = static_cast<std::size_t>(k);
        units.push_back({{"inverter", k + 1},
                         {"active", true},
                         {"delta", s.phys.delta},
                         {"vdc", s.phys.vdc},
                         {"i", {s.phys.i.x(), s.phys.i.y()}},
                         {"vo", {s.phys.vo.x(), s.phys.vo.y()}},
                         {"io", {s.phys.io.x(), s.phys.io.y()}},
                         {"m", {eq.m[k_idx].x(), eq.m[k_idx].y()}},
                         {"idc", eq.idc[k_idx]},
                         {"vb", {eq.vb[k_idx].x(), eq.vb[k_idx].y()}},
                         {"chi", eq.x[model.layout().chi(k)]}});
    }
    root["inverters"] = units;
    root["state"] = to_std(eq.x);
    return root.dump(2) + "\n";
}

Vector read_state_document(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError(path.string(), "cannot open state file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const json root = parse_json(buffer.str(), path.string());
    require_object(root, path.string());
    return state_from_json(require(root, "state", path.string()), path.string() + "/state");
}

ParsedScenario random_scenario(std::uint64_t seed, int buses)
{
    if (buses < 1) {
        throw ModelError("random scenario needs at least one bus");
    }
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    ParsedScenario out;
    out.name = "random_" + std::to_string(buses) + "bus_seed" + std::to_string(seed);
    out.description = "Randomized parameters within the benchmark ranges";
    MicrogridSpec& spec = out.scenario.spec;
    NetworkParams& net = spec.network;
    net.graph = ring_graph(buses);
    for (std::size_t z = 0; z < net.graph.edge_count(); ++z) {
        net.lines.push_back({uniform(0.05, 0.3), uniform(1e-3, 5e-3)});
    }
    for (int b = 0; b < buses; ++b) {
        net.shunts.push_back({1e-7, 1e-3});
        net.rl_loads.push_back(RlLoad{uniform(15.0, 30.0), uniform(20e-3, 40e-3)});
    }
    spec.cpl_P.assign(static_cast<std::size_t>(buses), 0.0);
    spec.cpl_Q.assign(static_cast<std::size_t>(buses), 0.0);
    for (int b = 0; b < buses; ++b) {
        InverterUnit unit;
        unit.bus = b;
        InverterParams& p = unit.params;
        p.Rf = uniform(0.05, 1.5);
        p.Lf = uniform(0.08e-3, 8e-3);
        p.Cf = uniform(20e-6, 150e-6);
        p.Lc = uniform(0.1e-3, 30e-3);
        p.Rc = uniform(0.03, 2.0);
        ControlGains& g = unit.gains;
        g.freq.kp = uniform(0.006, 0.06);
        g.freq.kI = uniform(10.0, 50.0);
        g.ac.nq = uniform(0.0, 0.078);
        g.ac.cp = uniform(1.0, 5.0);
        g.ac.cI = uniform(10.0, 50.0);
        g.ac.lambda_P = uniform(1e-3, 0.1);
        g.ac.lambda_I = uniform(2.5e-3, 2.5);
        spec.inverters.push_back(unit);
    }
    out.scenario.horizon = 1.0;
    out.scenario.initial.mode = InitialMode::Flat;
    return out;
}

} // namespace mgrid
