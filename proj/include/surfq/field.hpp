#pragma once

#include <optional>
#include <string_view>

#include "surfq/chart.hpp"
#include "surfq/expr.hpp"
#include "surfq/geometry.hpp"

namespace surfq {

/// Cartesian vector potential A(x, y, z), charge q and optional scalar potential V(x, y, z).
/// Only the tangential projections A_a = A . a_a on the surface are used.
struct VectorPotentialField {
    std::array<Expr, 3> A = {Expr::number(0.0), Expr::number(0.0), Expr::number(0.0)};
    double charge = 1.0;
    std::optional<Expr> scalar_potential;
    ParamMap params;

    Vec3 vector_potential(const Vec3& x) const
    {
        const auto b = bindings(x);
        return {evaluate(A[0], b), evaluate(A[1], b), evaluate(A[2], b)};
    }

    double potential(const Vec3& x) const { return scalar_potential ? evaluate(*scalar_potential, bindings(x)) : 0.0; }

private:
    Bindings<double> bindings(const Vec3& x) const
    {
        Bindings<double> b;
        b.variables = {{"x", x[0]}, {"y", x[1]}, {"z", x[2]}};
        b.parameters = params;
        return b;
    }
};

/// Parses the components as expressions in x, y, z with the given named parameters.
inline VectorPotentialField make_field(std::string_view ax, std::string_view ay, std::string_view az, double charge,
                                       ParamMap params = {}, std::optional<std::string_view> scalar = std::nullopt)
{
    const auto symbols = SymbolTable::cartesian(param_names(params));
    VectorPotentialField f;
    f.A = {parse_expression(ax, symbols), parse_expression(ay, symbols), parse_expression(az, symbols)};
    f.charge = charge;
    if (scalar) f.scalar_potential = parse_expression(*scalar, symbols);
    f.params = std::move(params);
    return f;
}

/// Uniform field B along z threading the z axis: A = (Phi / 2 pi rho^2)(-y, x, 0), total flux Phi
/// through any loop around the axis.
inline VectorPotentialField axial_flux_field(double flux, double charge = 1.0)
{
    return make_field("-Phi*y/(2*pi*(x^2 + y^2))", "Phi*x/(2*pi*(x^2 + y^2))", "0", charge, {{"Phi", flux}});
}

/// Tangential projection A_a = A . a_a of the field at (u1, u2) on the surface.
inline std::array<double, 2> projected_potential(const SurfaceChart& chart, const VectorPotentialField& field, double u1,
                                                 double u2)
{
    const SurfacePoint p = fundamental_forms(chart, u1, u2);
    const Vec3 A = field.vector_potential(p.position);
    return {A.dot(p.tangent[0]), A.dot(p.tangent[1])};
}

/// Scalar function chi(x, y, z) defining a lattice gauge transformation: link phases change by
/// (q / hbar)(chi_j - chi_i) and wavefunctions by exp(i q chi / hbar).
struct LatticeGauge {
    Expr chi = Expr::number(0.0);
    ParamMap params;

    double operator()(const Vec3& x) const
    {
        Bindings<double> b;
        b.variables = {{"x", x[0]}, {"y", x[1]}, {"z", x[2]}};
        b.parameters = params;
        return evaluate(chi, b);
    }
};

inline LatticeGauge make_gauge(std::string_view chi, ParamMap params = {})
{
    return {parse_expression(chi, SymbolTable::cartesian(param_names(params))), std::move(params)};
}

}  // namespace surfq
