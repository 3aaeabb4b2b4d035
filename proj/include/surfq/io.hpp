#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "surfq/chart.hpp"
#include "surfq/experiments.hpp"
#include "surfq/field.hpp"
#include "surfq/geometry.hpp"
#include "surfq/spectra.hpp"

namespace surfq {

using json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what)
{
    if (!j.is_object()) throw ParameterError(what + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ParameterError(what + ": unknown key '" + key + "'");
    }
}

template <typename T>
T required(const json& j, const char* key, const std::string& what)
{
    if (!j.contains(key)) throw ParameterError(what + ": missing key '" + std::string(key) + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParameterError(what + ": bad value for '" + std::string(key) + "': " + e.what());
    }
}

template <typename T>
T optional_value(const json& j, const char* key, T fallback, const std::string& what)
{
    return j.contains(key) ? required<T>(j, key, what) : fallback;
}

inline ParamMap read_params(const json& j, const std::string& what)
{
    ParamMap p;
    if (!j.is_object()) throw ParameterError(what + ": 'params' must be an object of numbers");
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw ParameterError(what + ": parameter '" + k + "' is not a number");
        p[k] = v.get<double>();
    }
    return p;
}

inline AxisDomain read_axis(const json& j, const std::string& what)
{
    reject_unknown_keys(j, {"min", "max", "periodic"}, what);
    AxisDomain a{required<double>(j, "min", what), required<double>(j, "max", what),
                 optional_value<bool>(j, "periodic", false, what)};
    if (!(a.max > a.min)) throw ParameterError(what + ": max must exceed min");
    return a;
}

inline json parse_json_text(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParameterError(what + ": invalid JSON: " + e.what());
    }
}

}  // namespace detail

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Chart description:
///
///   {"name": "...", "x": "...", "y": "...", "z": "...",
///    "u1": {"min": 0, "max": 1, "periodic": false}, "u2": {...},
///    "params": {"R": 1}, "axisymmetric": false}
///
/// or {"builtin": "torus", "params": {...}}.
inline SurfaceChart chart_from_json(const json& j)
{
    const std::string what = "chart";
    if (j.is_object() && j.contains("builtin")) {
        detail::reject_unknown_keys(j, {"builtin", "params"}, what);
        const ParamMap p = j.contains("params") ? detail::read_params(j["params"], what) : ParamMap{};
        return builtin_chart(detail::required<std::string>(j, "builtin", what), p);
    }
    detail::reject_unknown_keys(j, {"name", "x", "y", "z", "u1", "u2", "params", "axisymmetric"}, what);
    const ParamMap p = j.contains("params") ? detail::read_params(j["params"], what) : ParamMap{};
    if (!j.contains("u1") || !j.contains("u2")) throw ParameterError("chart: missing axis 'u1' or 'u2'");
    auto c = make_chart(detail::optional_value<std::string>(j, "name", "custom", what),
                        detail::required<std::string>(j, "x", what), detail::required<std::string>(j, "y", what),
                        detail::required<std::string>(j, "z", what), detail::read_axis(j["u1"], "chart.u1"),
                        detail::read_axis(j["u2"], "chart.u2"), p);
    c.axisymmetric = detail::optional_value<bool>(j, "axisymmetric", false, what);
    return c;
}

inline SurfaceChart load_chart(const std::string& path)
{
    return chart_from_json(detail::parse_json_text(read_text_file(path), path));
}

/// Field description: {"A": ["Ax", "Ay", "Az"], "charge": 1, "scalar_potential": "...", "params": {...}}.
inline VectorPotentialField field_from_json(const json& j)
{
    const std::string what = "field";
    detail::reject_unknown_keys(j, {"A", "charge", "scalar_potential", "params"}, what);
    const auto A = detail::required<std::vector<std::string>>(j, "A", what);
    if (A.size() != 3) throw ParameterError("field: 'A' needs three components");
    const ParamMap p = j.contains("params") ? detail::read_params(j["params"], what) : ParamMap{};
    std::optional<std::string> scalar;
    if (j.contains("scalar_potential")) scalar = detail::required<std::string>(j, "scalar_potential", what);
    return make_field(A[0], A[1], A[2], detail::optional_value<double>(j, "charge", 1.0, what), p,
                      scalar ? std::optional<std::string_view>(*scalar) : std::nullopt);
}

inline VectorPotentialField load_field(const std::string& path)
{
    return field_from_json(detail::parse_json_text(read_text_file(path), path));
}

// ---------------------------------------------------------------------------------------------
// Reports

inline json to_json(const Eigen::Matrix2d& m) { return json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}); }

inline json to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

inline json to_json(const ParamMap& p)
{
    json j = json::object();
    for (const auto& [k, v] : p) j[k] = v;
    return j;
}

inline json to_json(const SurfacePoint& p, double hbar = 1.0, double mass = 1.0)
{
    return json{{"u1", p.u1},
                {"u2", p.u2},
                {"position", to_json(p.position)},
                {"normal", to_json(p.normal)},
                {"metric", to_json(p.metric)},
                {"metric_inverse", to_json(p.metric_inv)},
                {"sqrt_g", p.sqrt_g},
                {"curvature", to_json(p.curvature)},
                {"shape_operator", to_json(p.shape_operator())},
                {"M", p.mean_curvature},
                {"K", p.gaussian_curvature},
                {"V_geo", geometric_potential(p, hbar, mass)}};
}

inline json to_json(const LayerPoint& l)
{
    return json{{"u3", l.u3},         {"metric", to_json(l.metric)}, {"sqrt_G", l.sqrt_G},
                {"gamma", l.gamma},   {"F", l.F},                     {"dF", l.dF}};
}

inline json to_json(const std::vector<Cluster>& clusters)
{
    json a = json::array();
    for (const auto& c : clusters) a.push_back({{"value", c.value}, {"multiplicity", c.multiplicity}});
    return a;
}

inline json to_json(const std::map<std::string, std::string>& m)
{
    json j = json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

inline json to_json(const SpectrumReport& r)
{
    return json{{"label", r.label},
                {"metadata", to_json(r.metadata)},
                {"solver", r.solver},
                {"dimension", r.dimension},
                {"eigenvalues", r.eigenvalues},
                {"clusters", to_json(r.clusters)},
                {"residuals", r.residuals},
                {"max_residual", r.max_residual},
                {"iterations", r.iterations},
                {"warnings", r.warnings}};
}

inline json to_json(const ConvergenceReport& r)
{
    return json{{"d", r.d},
                {"transverse_energy", r.transverse_energy},
                {"levels", r.levels},
                {"extrapolated", r.extrapolated},
                {"slope", r.slope},
                {"surface_with_potential", r.surface_with_potential},
                {"surface_without_potential", r.surface_without_potential},
                {"relative_error_with", r.error_with},
                {"relative_error_without", r.error_without},
                {"linear_fit_residual", r.linear_fit_residual},
                {"max_solver_residual", r.max_solver_residual},
                {"tolerance", r.tolerance},
                {"matches_with_potential", r.matches_with_potential},
                {"distinguishes_potential", r.distinguishes_potential},
                {"potential_vanishes", r.potential_vanishes},
                {"passed", r.passed}};
}

inline json to_json(const CrossTermReport& r)
{
    return json{{"evaluations", r.evaluations},
                {"max_relative_residual", r.max_relative_residual},
                {"max_absolute_residual", r.max_absolute_residual},
                {"max_rhs", r.max_rhs}};
}

inline json to_json(const PSquaredReport& r)
{
    auto level = [](const PSquaredLevel& l) {
        return json{{"n1", l.n1}, {"n2", l.n2}, {"residual", l.residual},
                    {"constant_mode_residual", l.constant_mode_residual}};
    };
    return json{{"coarse", level(r.coarse)}, {"fine", level(r.fine)}, {"ratio", r.ratio}};
}

inline json to_json(const TlqReport& r)
{
    return json{{"surface_before", r.surface_before}, {"normal_before", r.normal_before},
                {"surface_after", r.surface_after},   {"normal_after", r.normal_after},
                {"sum_residual", r.sum_residual}};
}

}  // namespace surfq
