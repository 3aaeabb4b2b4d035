#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <string_view>

#include "surfq/errors.hpp"
#include "surfq/expr.hpp"
#include "surfq/jet.hpp"

namespace surfq {

using ParamMap = std::map<std::string, double, std::less<>>;

struct AxisDomain {
    double min = 0.0;
    double max = 1.0;
    bool periodic = false;

    double length() const { return max - min; }
};

/// Parametrized surface r(u1, u2) = (x, y, z).
struct SurfaceChart {
    std::string name;
    Expr x = Expr::number(0.0);
    Expr y = Expr::number(0.0);
    Expr z = Expr::number(0.0);
    std::array<AxisDomain, 2> axes;
    ParamMap params;
    /// Set for charts whose metric does not depend on u2 and whose u2 axis is a full rotation angle.
    bool axisymmetric = false;
};

/// Jets of x, y, z about (u1, u2).
inline std::array<Jet, 3> position_jets(const SurfaceChart& chart, double u1, double u2)
{
    return {evaluate_jet(chart.x, u1, u2, chart.params), evaluate_jet(chart.y, u1, u2, chart.params),
            evaluate_jet(chart.z, u1, u2, chart.params)};
}

inline std::array<double, 3> position(const SurfaceChart& chart, double u1, double u2)
{
    Bindings<double> b;
    b.variables = {{"u1", u1}, {"u2", u2}, {"u3", 0.0}};
    b.parameters = chart.params;
    return {evaluate(chart.x, b), evaluate(chart.y, b), evaluate(chart.z, b)};
}

inline std::set<std::string, std::less<>> param_names(const ParamMap& params)
{
    std::set<std::string, std::less<>> names;
    for (const auto& [k, v] : params) names.insert(k);
    return names;
}

/// Builds a chart from expression text; parameters in `params` are the only free names allowed.
inline SurfaceChart make_chart(std::string name, std::string_view x, std::string_view y, std::string_view z,
                               AxisDomain u1, AxisDomain u2, ParamMap params)
{
    const SymbolTable symbols = SymbolTable::surface(param_names(params));
    SurfaceChart c;
    c.name = std::move(name);
    c.x = parse_expression(x, symbols);
    c.y = parse_expression(y, symbols);
    c.z = parse_expression(z, symbols);
    if (!(u1.max > u1.min) || !(u2.max > u2.min)) throw ParameterError("chart domain must have max > min");
    c.axes = {u1, u2};
    c.params = std::move(params);
    return c;
}

namespace detail {

inline double require_param(const ParamMap& p, const char* key, double fallback = std::nan(""))
{
    const auto it = p.find(key);
    if (it == p.end()) {
        if (std::isnan(fallback)) throw ParameterError(std::string("missing parameter '") + key + "'");
        return fallback;
    }
    return it->second;
}

inline void reject_unknown(const ParamMap& p, std::initializer_list<const char*> allowed, const std::string& chart)
{
    for (const auto& [k, v] : p) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ParameterError("unknown parameter '" + k + "' for chart '" + chart + "'");
    }
}

}  // namespace detail

inline constexpr std::array<const char*, 5> kBuiltinCharts = {"plane", "sphere", "cylinder", "torus", "catenoid"};

/// Standard parametrizations.
///
///   plane     x = u1, y = u2, z = 0; both axes periodic, lengths L1, L2 (default 2 pi)
///   sphere    u1 = polar angle in (0, pi) (hard wall, poles excluded), u2 = azimuth (periodic); R
///   cylinder  u1 = z in [-L/2, L/2] (hard wall), u2 = azimuth (periodic); R, L (default 2 pi)
///   torus     u1 = poloidal angle, u2 = toroidal angle, both periodic; R > r > 0
///   catenoid  waist radius R, u1 = height in [-H, H] (hard wall), u2 = azimuth; H default 1
inline SurfaceChart builtin_chart(std::string_view name, const ParamMap& params)
{
    using detail::require_param;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const std::string n(name);
    if (n == "plane") {
        detail::reject_unknown(params, {"L1", "L2"}, n);
        const double l1 = require_param(params, "L1", two_pi), l2 = require_param(params, "L2", two_pi);
        if (!(l1 > 0.0) || !(l2 > 0.0)) throw ParameterError("plane: L1, L2 must be positive");
        return make_chart(n, "u1", "u2", "0", {0.0, l1, true}, {0.0, l2, true}, params);
    }
    if (n == "sphere") {
        detail::reject_unknown(params, {"R"}, n);
        if (!(require_param(params, "R") > 0.0)) throw ParameterError("sphere: R must be positive");
        auto c = make_chart(n, "R*sin(u1)*cos(u2)", "R*sin(u1)*sin(u2)", "R*cos(u1)", {0.0, std::numbers::pi, false},
                            {0.0, two_pi, true}, params);
        c.axisymmetric = true;
        return c;
    }
    if (n == "cylinder") {
        detail::reject_unknown(params, {"R", "L"}, n);
        const double len = require_param(params, "L", two_pi);
        if (!(require_param(params, "R") > 0.0)) throw ParameterError("cylinder: R must be positive");
        if (!(len > 0.0)) throw ParameterError("cylinder: L must be positive");
        auto c = make_chart(n, "R*cos(u2)", "R*sin(u2)", "u1", {-len / 2, len / 2, false}, {0.0, two_pi, true}, params);
        c.axisymmetric = true;
        return c;
    }
    if (n == "torus") {
        detail::reject_unknown(params, {"R", "r"}, n);
        const double big = require_param(params, "R"), small = require_param(params, "r");
        if (!(small > 0.0) || !(big > small)) throw ParameterError("torus: requires R > r > 0");
        auto c = make_chart(n, "(R + r*cos(u1))*cos(u2)", "(R + r*cos(u1))*sin(u2)", "r*sin(u1)", {0.0, two_pi, true},
                            {0.0, two_pi, true}, params);
        c.axisymmetric = true;
        return c;
    }
    if (n == "catenoid") {
        detail::reject_unknown(params, {"R", "H"}, n);
        const double h = require_param(params, "H", 1.0);
        if (!(require_param(params, "R") > 0.0) || !(h > 0.0)) throw ParameterError("catenoid: R, H must be positive");
        auto c = make_chart(n, "R*cosh(u1/R)*cos(u2)", "R*cosh(u1/R)*sin(u2)", "u1", {-h, h, false},
                            {0.0, two_pi, true}, params);
        c.axisymmetric = true;
        return c;
    }
    throw ParameterError("unknown built-in chart '" + n + "'");
}

/// Largest mismatch of x, y, z and their first/second derivatives across each periodic seam,
/// sampled at `samples` points along the other axis. A constant offset of the position across the
/// seam (a translation identification, as for the flat periodic plane) is not counted.
inline double seam_mismatch(const SurfaceChart& chart, int samples = 7)
{
    double worst = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
        if (!chart.axes[static_cast<std::size_t>(axis)].periodic) continue;
        const auto& here = chart.axes[static_cast<std::size_t>(axis)];
        const auto& other = chart.axes[static_cast<std::size_t>(1 - axis)];
        std::array<double, 3> offset{};
        for (int s = 0; s < samples; ++s) {
            const double t = other.min + (s + 0.5) * other.length() / samples;
            const auto lo = axis == 0 ? position_jets(chart, here.min, t) : position_jets(chart, t, here.min);
            const auto hi = axis == 0 ? position_jets(chart, here.max, t) : position_jets(chart, t, here.max);
            for (std::size_t k = 0; k < 3; ++k) {
                const double jump = hi[k].value() - lo[k].value();
                if (s == 0) offset[k] = jump;
                worst = std::max(worst, std::abs(jump - offset[k]));
                for (int n = 1; n <= 2; ++n)
                    for (int j = 0; j <= n; ++j)
                        worst = std::max(worst, std::abs(lo[k].derivative(n - j, j) - hi[k].derivative(n - j, j)));
            }
        }
    }
    return worst;
}

}  // namespace surfq
