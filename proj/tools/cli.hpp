#pragma once

// Command-line front end for surfq. Kept out of the library headers because it depends on CLI11.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "surfq/surfq.hpp"

namespace surfq::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kContractFailure = 1, kUsage = 2, kNumerical = 3 };

/// Fully resolved inputs of one run. Serialized into every report.
struct RunConfig {
    std::string subcommand;
    std::string chart = "plane";
    std::string chart_file;
    ParamMap params;
    std::array<int, 2> grid{32, 32};
    std::optional<int> sector;
    double hbar = 1.0;
    double mass = 1.0;
    double charge = 1.0;
    std::string field_file;
    std::optional<double> flux;
    std::string gauge;
    int count = 6;
    std::string solver = "auto";
    bool geometric_potential = true;
    std::string reference;
    std::array<double, 2> at{0.0, 0.0};
    std::optional<double> u3;
    std::string op = "hamiltonian";
    std::string matrix_out;
    std::vector<double> d;
    int n3 = 16;
    std::optional<double> tolerance;
    std::string suite = "all";
    std::uint64_t seed = 0x5eed;
    int threads = 0;
    std::string out;
    std::string csv;
    bool no_timestamp = false;
    bool errors_json = false;
};

// ---------------------------------------------------------------------------------------------
// Argument value parsing

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double to_number(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParameterError(what + ": '" + s + "' is not a number");
    }
}

inline int to_int(const std::string& s, const std::string& what)
{
    const double v = to_number(s, what);
    if (v != static_cast<int>(v)) throw ParameterError(what + ": '" + s + "' is not an integer");
    return static_cast<int>(v);
}

/// "R=1,r=0.5"
inline ParamMap parse_params(const std::string& text)
{
    ParamMap p;
    if (text.empty()) return p;
    for (const auto& item : split(text, ',')) {
        const auto kv = split(item, '=');
        if (kv.size() != 2 || kv[0].empty()) throw ParameterError("--params: expected name=value, got '" + item + "'");
        p[kv[0]] = to_number(kv[1], "--params " + kv[0]);
    }
    return p;
}

/// "32x64" or "32"
inline std::array<int, 2> parse_grid(const std::string& text, int default_second)
{
    const auto parts = split(text, 'x');
    if (parts.size() == 1) return {to_int(parts[0], "--grid"), default_second};
    if (parts.size() != 2) throw ParameterError("--grid: expected N1xN2, got '" + text + "'");
    return {to_int(parts[0], "--grid"), to_int(parts[1], "--grid")};
}

/// "m=1" or "1"
inline int parse_sector(const std::string& text)
{
    const std::string v = text.rfind("m=", 0) == 0 ? text.substr(2) : text;
    return to_int(v, "--sector");
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    for (const auto& s : split(text, ',')) out.push_back(to_number(s, what));
    return out;
}

inline std::string timestamp()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

inline json to_json(const RunConfig& c)
{
    json j{{"subcommand", c.subcommand}};
    if (c.chart_file.empty()) {
        j["chart"] = c.chart;
    } else {
        j["chart_file"] = c.chart_file;
    }
    j["params"] = surfq::to_json(c.params);
    j["grid"] = c.grid;
    j["sector"] = c.sector ? json(*c.sector) : json(nullptr);
    j["hbar"] = c.hbar;
    j["mass"] = c.mass;
    j["charge"] = c.charge;
    j["field_file"] = c.field_file;
    j["flux"] = c.flux ? json(*c.flux) : json(nullptr);
    j["gauge"] = c.gauge;
    j["count"] = c.count;
    j["solver"] = c.solver;
    j["geometric_potential"] = c.geometric_potential;
    j["reference"] = c.reference;
    j["at"] = c.at;
    j["u3"] = c.u3 ? json(*c.u3) : json(nullptr);
    j["operator"] = c.op;
    j["matrix_out"] = c.matrix_out;
    j["d"] = c.d;
    j["n3"] = c.n3;
    j["tolerance"] = c.tolerance ? json(*c.tolerance) : json(nullptr);
    j["suite"] = c.suite;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["csv"] = c.csv;
    return j;
}

// ---------------------------------------------------------------------------------------------
// Subcommands

namespace detail {

struct Context {
    RunConfig cfg;
    SurfaceChart chart;
    std::optional<VectorPotentialField> field;
    std::ostream* out = &std::cout;
};

inline SolveOptions solve_options(const RunConfig& c)
{
    SolveOptions o;
    o.vectors = false;
    if (c.solver == "dense") o.solver = SolverKind::Dense;
    if (c.solver == "shift-invert") o.solver = SolverKind::ShiftInvert;
    return o;
}

inline Grid2 grid_of(const Context& ctx) { return build_grid(ctx.chart, ctx.cfg.grid[0], ctx.cfg.grid[1], ctx.cfg.sector); }

inline void write_csv(const std::string& path, const std::string& text)
{
    std::ofstream f(path);
    if (!f) throw ParameterError("cannot write '" + path + "'");
    f << text;
}

inline std::string csv_number(double v) { return surfq::detail::mm_number(v); }

inline json reference_comparison(const Context& ctx, const std::vector<double>& values, double flux)
{
    ParamMap p = ctx.chart.params;
    if (flux != 0.0) p["Phi"] = flux;
    const auto ref = analytic_reference(analytic_surface_from_name(ctx.cfg.reference), p, ctx.cfg.hbar, ctx.cfg.mass,
                                        static_cast<int>(values.size()), ctx.cfg.charge);
    std::vector<double> err;
    for (std::size_t k = 0; k < values.size(); ++k) err.push_back(std::abs(values[k] - ref[k]));
    return json{{"surface", ctx.cfg.reference}, {"values", ref}, {"absolute_error", err}};
}

inline json spectrum_csv_and_json(const Context& ctx, const SpectrumReport& rep)
{
    if (!ctx.cfg.csv.empty()) {
        std::string s = "index,eigenvalue,residual\n";
        for (std::size_t k = 0; k < rep.eigenvalues.size(); ++k)
            s += std::to_string(k) + "," + csv_number(rep.eigenvalues[k]) + "," + csv_number(rep.residuals[k]) + "\n";
        write_csv(ctx.cfg.csv, s);
    }
    return surfq::to_json(rep);
}

inline json cmd_geom(const Context& ctx)
{
    const SurfacePoint p = fundamental_forms(ctx.chart, ctx.cfg.at[0], ctx.cfg.at[1]);
    json j = surfq::to_json(p, ctx.cfg.hbar, ctx.cfg.mass);
    if (ctx.cfg.u3) j["layer"] = surfq::to_json(layer_point(p, *ctx.cfg.u3));
    return j;
}

inline json cmd_potential(const Context& ctx)
{
    const Grid2 g = grid_of(ctx);
    json nodes = json::array();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::string csv = "u1,u2,M,K,V_geo\n";
    for (const auto& p : g.points) {
        const double v = geometric_potential(p, ctx.cfg.hbar, ctx.cfg.mass);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        nodes.push_back({{"u1", p.u1}, {"u2", p.u2}, {"M", p.mean_curvature}, {"K", p.gaussian_curvature}, {"V_geo", v}});
        csv += csv_number(p.u1) + "," + csv_number(p.u2) + "," + csv_number(p.mean_curvature) + "," +
               csv_number(p.gaussian_curvature) + "," + csv_number(v) + "\n";
    }
    if (!ctx.cfg.csv.empty()) write_csv(ctx.cfg.csv, csv);
    return json{{"min", lo}, {"max", hi}, {"nodes", nodes}};
}

template <typename Scalar>
json assembled(const Context& ctx, const DiscreteOperator<Scalar>& op)
{
    if (!ctx.cfg.matrix_out.empty()) {
        std::ofstream f(ctx.cfg.matrix_out);
        if (!f) throw ParameterError("cannot write '" + ctx.cfg.matrix_out + "'");
        write_matrix_market(op, f);
    }
    return json{{"label", op.label},
                {"size", op.size()},
                {"nonzeros", op.matrix.nonZeros()},
                {"weighted_hermitian", op.hermitian},
                {"hermiticity_residual", hermiticity_residual(op)},
                {"tolerance", op.tolerance},
                {"metadata", surfq::to_json(op.metadata)}};
}

inline VectorPotentialField field_or_zero(const Context& ctx)
{
    if (ctx.field) return *ctx.field;
    return make_field("0", "0", "0", ctx.cfg.charge);
}

inline json cmd_assemble(const Context& ctx)
{
    const auto& c = ctx.cfg;
    if (c.op.rfind("layer", 0) == 0) {
        if (c.d.size() != 1) throw ParameterError("assemble layer: pass exactly one thickness with --d");
        const LayerGrid L = build_layer_grid(ctx.chart, c.grid[0], c.grid[1], c.n3, c.d[0], c.sector);
        const LayerBlock b = c.op == "layer" ? LayerBlock::Full
                             : c.op == "layer-surface" ? LayerBlock::Surface
                                                       : LayerBlock::Normal;
        return assembled(ctx, layer_hamiltonian(L, c.hbar, c.mass, b));
    }
    const Grid2 g = grid_of(ctx);
    if (c.op == "laplace-beltrami") return assembled(ctx, laplace_beltrami(g));
    if (c.op == "laplace-beltrami-wide") return assembled(ctx, laplace_beltrami_wide(g));
    if (c.op == "hamiltonian") return assembled(ctx, surface_hamiltonian(g, c.hbar, c.mass, c.geometric_potential));
    if (c.op == "kinetic") return assembled(ctx, surface_hamiltonian(g, c.hbar, c.mass, false));
    if (c.op == "em-hamiltonian") {
        const auto gauge = c.gauge.empty() ? std::nullopt : std::optional(make_gauge(c.gauge, field_or_zero(ctx).params));
        return assembled(ctx, em_surface_hamiltonian(g, field_or_zero(ctx), c.hbar, c.mass, gauge ? &*gauge : nullptr));
    }
    if (c.op == "momentum-x") return assembled(ctx, geometric_momentum(g, 0, c.hbar));
    if (c.op == "momentum-y") return assembled(ctx, geometric_momentum(g, 1, c.hbar));
    if (c.op == "momentum-z") return assembled(ctx, geometric_momentum(g, 2, c.hbar));
    throw ParameterError("unknown operator '" + c.op + "'");
}

inline json cmd_spectrum(const Context& ctx)
{
    const auto& c = ctx.cfg;
    const auto rep = solve_spectrum(surface_hamiltonian(grid_of(ctx), c.hbar, c.mass, c.geometric_potential), c.count,
                                    solve_options(c));
    json j = spectrum_csv_and_json(ctx, rep);
    if (!c.reference.empty()) j["reference"] = reference_comparison(ctx, rep.eigenvalues, 0.0);
    return j;
}

inline json cmd_em_spectrum(const Context& ctx)
{
    const auto& c = ctx.cfg;
    if (!ctx.field) throw ParameterError("em-spectrum: pass --field FILE or --flux PHI");
    const auto gauge = c.gauge.empty() ? std::nullopt : std::optional(make_gauge(c.gauge, ctx.field->params));
    const auto op = em_surface_hamiltonian(grid_of(ctx), *ctx.field, c.hbar, c.mass, gauge ? &*gauge : nullptr);
    const auto rep = solve_spectrum(op, c.count, solve_options(c));
    json j = spectrum_csv_and_json(ctx, rep);
    if (!c.reference.empty()) j["reference"] = reference_comparison(ctx, rep.eigenvalues, c.flux.value_or(0.0));
    return j;
}

inline json cmd_thin_layer(const Context& ctx)
{
    const auto& c = ctx.cfg;
    ThinLayerOptions o;
    o.count = c.count;
    o.n3 = c.n3;
    o.n1 = c.grid[0];
    o.n2 = c.grid[1];
    o.hbar = c.hbar;
    o.mass = c.mass;
    o.threads = c.threads;
    if (c.tolerance) o.tolerance = *c.tolerance;
    const auto rep = thin_layer_convergence(ctx.chart, c.sector, c.d, o);
    if (!c.csv.empty()) {
        std::string s = "d,transverse_energy";
        for (std::size_t j = 0; j < rep.extrapolated.size(); ++j) s += ",level" + std::to_string(j);
        s += "\n";
        for (std::size_t k = 0; k < rep.d.size(); ++k) {
            s += csv_number(rep.d[k]) + "," + csv_number(rep.transverse_energy[k]);
            for (double v : rep.levels[k]) s += "," + csv_number(v);
            s += "\n";
        }
        write_csv(c.csv, s);
    }
    return surfq::to_json(rep);
}

// verify ---------------------------------------------------------------------------------------

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool at_most = true;  // value <= threshold, else value >= threshold

    bool passed() const { return at_most ? value <= threshold : value >= threshold; }
};

inline std::vector<Check> identity_checks(std::uint64_t seed)
{
    std::vector<Check> out;
    const auto torus = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    const auto points = sample_layer_points(torus, 100, 0.1, seed);
    double div = 0.0;
    for (const auto& s : points) div = std::max(div, divergence_identity_residual(torus, s.u1, s.u2, s.u3).norm());
    out.push_back({"divergence_identity_torus", div, 1e-8});
    const std::vector<LayerSample> twenty(points.begin(), points.begin() + 20);
    out.push_back({"cross_term_torus", cross_term_identity_check(torus, twenty, default_test_bank()).max_relative_residual,
                   1e-6});
    double limit = 0.0;
    for (const auto& [name, params, u1] :
         std::vector<std::tuple<std::string, ParamMap, double>>{{"sphere", {{"R", 1.0}}, 1.0},
                                                                {"cylinder", {{"R", 1.0}}, 0.0},
                                                                {"torus", {{"R", 2.0}, {"r", 1.0}}, 0.7}}) {
        const auto r = limit_checks(fundamental_forms(builtin_chart(name, params), u1, 0.4));
        limit = std::max({limit, r.F_squared_residual, r.dF_residual});
    }
    out.push_back({"layer_limits", limit, 1e-6});
    const SurfacePoint tp = fundamental_forms(torus, 0.7, 0.0);
    out.push_back({"gamma_expansion_ratio",
                   gamma_expansion_residual(tp, 0.02).truncated_root / gamma_expansion_residual(tp, 0.01).truncated_root,
                   7.0, false});
    out.push_back({"psquared_plane", psquared_expansion_check(builtin_chart("plane", {}), 12, 16).fine.residual, 1e-10});
    out.push_back({"psquared_sphere_ratio",
                   psquared_expansion_check(builtin_chart("sphere", {{"R", 1.0}}), 16, 32).ratio, 3.5, false});
    return out;
}

inline std::vector<Check> tlq_checks()
{
    const auto r = tlq_transform_check(builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}}), 64, 1, 16, 0.2, 0);
    return {{"tlq_surface_before", r.surface_before, 1e-3, false},
            {"tlq_normal_before", r.normal_before, 1e-3, false},
            {"tlq_sum", r.sum_residual, 1e-12},
            {"tlq_surface_after", r.surface_after, 1e-10},
            {"tlq_normal_after", r.normal_after, 1e-10}};
}

inline std::vector<Check> hermiticity_checks()
{
    std::vector<Check> out;
    const auto torus = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    const auto sphere = builtin_chart("sphere", {{"R", 1.0}});
    for (const auto* chart : {&torus, &sphere}) {
        const Grid2 g = build_grid(*chart, 12, 16);
        const std::string n = chart->name;
        out.push_back({n + "_surface_hamiltonian", hermiticity_residual(surface_hamiltonian(g)), kHermitianTolerance});
        out.push_back({n + "_em_hamiltonian", hermiticity_residual(em_surface_hamiltonian(g, axial_flux_field(1.3))),
                       kHermitianTolerance});
        for (int x = 0; x < 3; ++x)
            out.push_back({n + "_momentum_" + "xyz"[x], hermiticity_residual(geometric_momentum(g, x)),
                           kMomentumHermitianTolerance});
        out.push_back({n + "_layer", hermiticity_residual(layer_hamiltonian(*chart, 12, 16, 6, 0.2)),
                       kHermitianTolerance});
    }
    out.push_back({"fixture_not_hermitian", hermiticity_residual(one_sided_laplacian(build_grid(sphere, 12, 16))), 1e-3,
                   false});
    return out;
}

inline std::vector<Check> thin_layer_checks(int threads)
{
    ThinLayerOptions o;
    o.threads = threads;
    const auto r = thin_layer_convergence(builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}}), 0, {0.2, 0.1, 0.05}, o);
    double with = 0.0, without = 0.0;
    for (double e : r.error_with) with = std::max(with, e);
    for (double e : r.error_without) without = std::max(without, e);
    return {{"thin_layer_error_with_potential", with, r.tolerance},
            {"thin_layer_error_without_potential", without, r.tolerance, false},
            {"thin_layer_linear_fit", r.linear_fit_residual, 0.1}};
}

inline json cmd_verify(const Context& ctx, bool& all_passed)
{
    const auto& s = ctx.cfg.suite;
    std::vector<Check> checks;
    auto add = [&](const std::vector<Check>& more) { checks.insert(checks.end(), more.begin(), more.end()); };
    if (s == "identities" || s == "all") add(identity_checks(ctx.cfg.seed));
    if (s == "tlq" || s == "all") add(tlq_checks());
    if (s == "hermiticity" || s == "all") add(hermiticity_checks());
    if (s == "thin-layer" || s == "all") add(thin_layer_checks(ctx.cfg.threads));
    json arr = json::array();
    all_passed = true;
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name},
                       {"value", c.value},
                       {"threshold", c.threshold},
                       {"comparison", c.at_most ? "<=" : ">="},
                       {"passed", c.passed()}});
        all_passed = all_passed && c.passed();
    }
    return json{{"suite", s}, {"passed", all_passed}, {"checks", arr}};
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------

inline int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const HermiticityError*>(&e)) return kNumerical;
    return kUsage;
}

inline void report_error(const RunConfig& cfg, std::ostream& err, const std::string& kind, const std::string& message,
                         int code)
{
    if (cfg.errors_json) {
        err << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
    } else {
        err << "surfq: " << message << "\n";
    }
}

/// Parses argv, runs one subcommand and writes its JSON report. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    RunConfig cfg;
    CLI::App app{"Quantum mechanics on parametrized surfaces and thin layers", "surfq"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    app.add_flag("--no-timestamp", cfg.no_timestamp, "Omit the timestamp from reports");
    app.add_flag("--errors-json", cfg.errors_json, "Print errors as JSON on stderr");

    std::string params_text, grid_text, sector_text, at_text, d_text, flux_text;
    auto common = [&](CLI::App* sub, bool grid) {
        sub->add_option("--chart", cfg.chart, "Built-in chart")
            ->check(CLI::IsMember({"plane", "sphere", "cylinder", "torus", "catenoid"}));
        sub->add_option("--chart-file", cfg.chart_file, "Chart JSON file")->check(CLI::ExistingFile);
        sub->add_option("--params", params_text, "Chart parameters, e.g. R=2,r=1");
        sub->add_option("--hbar", cfg.hbar, "Reduced Planck constant");
        sub->add_option("--mass", cfg.mass, "Particle mass");
        sub->add_option("--charge", cfg.charge, "Particle charge");
        sub->add_option("--out", cfg.out, "Report path (default stdout)");
        if (grid) {
            sub->add_option("--grid", grid_text, "Grid N1xN2");
            sub->add_option("--sector", sector_text, "Angular sector, e.g. m=0");
        }
    };
    auto solver = [&](CLI::App* sub) {
        sub->add_option("--count", cfg.count, "Number of eigenvalues")->check(CLI::PositiveNumber);
        sub->add_option("--solver", cfg.solver, "Eigensolver")->check(CLI::IsMember({"auto", "dense", "shift-invert"}));
        sub->add_option("--reference", cfg.reference, "Analytic reference: sphere, cylinder, ring, flat-torus");
        sub->add_option("--csv", cfg.csv, "Also write a CSV table");
    };
    auto field = [&](CLI::App* sub) {
        sub->add_option("--field", cfg.field_file, "Field JSON file")->check(CLI::ExistingFile);
        sub->add_option("--flux", flux_text, "Flux Phi threading the z axis");
        sub->add_option("--gauge", cfg.gauge, "Lattice gauge function chi(x, y, z)");
    };

    auto* geom = app.add_subcommand("geom", "Geometry at a point");
    common(geom, false);
    geom->add_option("--at", at_text, "u1,u2")->required();
    geom->add_option("--u3", cfg.u3, "Normal offset for layer quantities");

    auto* potential = app.add_subcommand("potential", "Geometric potential on a grid");
    common(potential, true);
    potential->add_option("--csv", cfg.csv, "Also write a CSV table");

    auto* assemble = app.add_subcommand("assemble", "Assemble an operator");
    common(assemble, true);
    field(assemble);
    assemble->add_option("--operator", cfg.op, "Operator to assemble")
        ->check(CLI::IsMember({"laplace-beltrami", "laplace-beltrami-wide", "hamiltonian", "kinetic", "em-hamiltonian",
                               "momentum-x", "momentum-y", "momentum-z", "layer", "layer-surface", "layer-normal"}));
    assemble->add_option("--matrix", cfg.matrix_out, "Matrix Market output path");
    assemble->add_option("--d", d_text, "Layer thickness");
    assemble->add_option("--n3", cfg.n3, "Normal grid points");
    assemble->add_flag("!--no-geometric-potential", cfg.geometric_potential, "Drop V_geo from the Hamiltonian");

    auto* spectrum = app.add_subcommand("spectrum", "Lowest eigenvalues of the surface Hamiltonian");
    common(spectrum, true);
    solver(spectrum);
    spectrum->add_flag("!--no-geometric-potential", cfg.geometric_potential, "Drop V_geo from the Hamiltonian");

    auto* em = app.add_subcommand("em-spectrum", "Spectrum with a magnetic field");
    common(em, true);
    solver(em);
    field(em);

    auto* thin = app.add_subcommand("thin-layer", "Thin-layer convergence study");
    common(thin, false);
    thin->add_option("--sector", sector_text, "Angular sector, e.g. m=0");
    thin->add_option("--d", d_text, "Thickness list, descending")->required();
    thin->add_option("--n3", cfg.n3, "Normal grid points");
    thin->add_option("--surface-grid", grid_text, "N1 (sector) or N1xN2");
    thin->add_option("--count", cfg.count, "Levels tracked")->check(CLI::PositiveNumber);
    thin->add_option("--tolerance", cfg.tolerance, "Relative tolerance against the surface levels");
    thin->add_option("--threads", cfg.threads, "Worker threads (0: SURFQ_THREADS or hardware)");
    thin->add_option("--csv", cfg.csv, "Also write a CSV table");

    auto* verify = app.add_subcommand("verify", "Run built-in contract checks");
    verify->add_option("--suite", cfg.suite, "Check suite")->check(CLI::IsMember({"identities", "tlq", "hermiticity", "thin-layer", "all"}));
    verify->add_option("--seed", cfg.seed, "Sampling seed");
    verify->add_option("--threads", cfg.threads, "Worker threads");
    verify->add_option("--out", cfg.out, "Report path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        report_error(cfg, err, "usage", e.what(), kUsage);
        return kUsage;
    }

    detail::Context ctx;
    try {
        cfg.subcommand = app.get_subcommands().front()->get_name();
        // resolve everything that reads input before computing
        cfg.params = detail::parse_params(params_text);
        if (cfg.subcommand == "thin-layer") {
            cfg.grid = {128, 1};
            if (!grid_text.empty()) cfg.grid = detail::parse_grid(grid_text, 1);
        } else if (!grid_text.empty()) {
            cfg.grid = detail::parse_grid(grid_text, detail::parse_grid(grid_text, 0)[0]);
        }
        if (!sector_text.empty()) cfg.sector = detail::parse_sector(sector_text);
        if (!at_text.empty()) {
            const auto v = detail::parse_list(at_text, "--at");
            if (v.size() != 2) throw ParameterError("--at: expected u1,u2");
            cfg.at = {v[0], v[1]};
        }
        if (!d_text.empty()) cfg.d = detail::parse_list(d_text, "--d");
        if (!flux_text.empty()) cfg.flux = detail::to_number(flux_text, "--flux");
        if (cfg.subcommand != "verify") {
            ctx.chart = cfg.chart_file.empty() ? builtin_chart(cfg.chart, cfg.params) : load_chart(cfg.chart_file);
            if (!cfg.chart_file.empty()) cfg.params = ctx.chart.params;
        }
        if (!cfg.field_file.empty() && cfg.flux) throw ParameterError("pass either --field or --flux, not both");
        if (!cfg.field_file.empty()) {
            ctx.field = load_field(cfg.field_file);
            cfg.charge = ctx.field->charge;
        } else if (cfg.flux) {
            ctx.field = axial_flux_field(*cfg.flux, cfg.charge);
        }
        if (!cfg.out.empty()) {
            std::ofstream probe(cfg.out, std::ios::app);
            if (!probe) throw ParameterError("cannot write '" + cfg.out + "'");
        }
        ctx.cfg = cfg;

        json result;
        bool passed = true;
        const std::string& s = cfg.subcommand;
        if (s == "geom") result = detail::cmd_geom(ctx);
        if (s == "potential") result = detail::cmd_potential(ctx);
        if (s == "assemble") result = detail::cmd_assemble(ctx);
        if (s == "spectrum") result = detail::cmd_spectrum(ctx);
        if (s == "em-spectrum") result = detail::cmd_em_spectrum(ctx);
        if (s == "thin-layer") result = detail::cmd_thin_layer(ctx);
        if (s == "verify") result = detail::cmd_verify(ctx, passed);

        json report{{"surfq", kVersion}, {"command", s}};
        if (!cfg.no_timestamp) report["timestamp"] = detail::timestamp();
        report["config"] = to_json(cfg);
        report["result"] = result;
        const std::string text = report.dump(2) + "\n";
        if (cfg.out.empty()) {
            out << text;
        } else {
            std::ofstream f(cfg.out);
            f << text;
        }
        if (!passed) {
            report_error(cfg, err, "contract", "verify suite '" + cfg.suite + "' failed", kContractFailure);
            return kContractFailure;
        }
        return kOk;
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        report_error(cfg, err, e.kind(), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        report_error(cfg, err, "internal", e.what(), kNumerical);
        return kNumerical;
    }
}

}  // namespace surfq::cli
