#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "surfq/chart.hpp"
#include "surfq/expr.hpp"
#include "surfq/geometry.hpp"
#include "surfq/operators.hpp"
#include "surfq/spectra.hpp"

namespace surfq {

// ---------------------------------------------------------------------------------------------
// Cross term of the layer momenta

/// psi(u1, u2, u3) = f(u1, u2) h(u3).
struct TestFunction {
    std::string surface_text;
    std::string transverse_text;
    Expr surface = Expr::number(1.0);
    Expr transverse = Expr::number(1.0);
};

inline TestFunction make_test_function(std::string surface, std::string transverse, const ParamMap& params = {})
{
    TestFunction t;
    t.surface = parse_expression(surface, SymbolTable{{"u1", "u2"}, param_names(params)});
    t.transverse = parse_expression(transverse, SymbolTable{{"u3"}, param_names(params)});
    t.surface_text = std::move(surface);
    t.transverse_text = std::move(transverse);
    return t;
}

/// The fixed bank used by verify and the acceptance suite. Changing it changes reported residuals.
inline std::vector<TestFunction> default_test_bank()
{
    return {
        make_test_function("cos(u1)*sin(u2)", "u3"),
        make_test_function("1 + u1^2*u2", "cos(3*u3)"),
        make_test_function("sin(u1 + 2*u2)", "1 + u3 + u3^2"),
        make_test_function("exp(cos(u1))*cos(u2)", "exp(u3)"),
        make_test_function("u1*u2 - 2", "sin(u3) + 2"),
    };
}

struct LayerSample {
    double u1 = 0.0, u2 = 0.0, u3 = 0.0;
};

/// Seeded points with |u3| <= u3_max, kept 5% away from hard walls. Points inside the caustic
/// bound are rejected with CausticError.
inline std::vector<LayerSample> sample_layer_points(const SurfaceChart& chart, int count, double u3_max,
                                                    std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto axis = [&](const AxisDomain& a) {
        const double margin = a.periodic ? 0.0 : 0.05 * a.length();
        return std::uniform_real_distribution<double>(a.min + margin, a.max - margin)(rng);
    };
    std::vector<LayerSample> out;
    for (int k = 0; k < count; ++k) {
        LayerSample s;
        s.u1 = axis(chart.axes[0]);
        s.u2 = axis(chart.axes[1]);
        s.u3 = std::uniform_real_distribution<double>(-u3_max, u3_max)(rng);
        layer_point(fundamental_forms(chart, s.u1, s.u2), s.u3);
        out.push_back(s);
    }
    return out;
}

struct CrossTermReport {
    int evaluations = 0;
    double max_relative_residual = 0.0;
    double max_absolute_residual = 0.0;
    /// Largest |hbar^2 d3F psi| seen; zero on flat charts.
    double max_rhs = 0.0;
};

namespace detail {

struct TransverseValues {
    double h = 0.0, dh = 0.0;
};

inline TransverseValues transverse_values(const TestFunction& t, double u3)
{
    Bindings<Jet> b;
    b.variables.emplace("u3", Jet::variable(0, u3));
    const Jet j = evaluate(t.transverse, b);
    return {j.value(), j.derivative(1, 0)};
}

}  // namespace detail

struct CrossTermValue {
    double lhs = 0.0;
    double rhs = 0.0;
    /// Size of the individual terms that cancel in lhs.
    double scale = 0.0;
};

/// Both sides of the identity at one point for every function of the bank.
inline std::vector<CrossTermValue> cross_term_values(const SurfaceChart& chart, const LayerSample& s,
                                                     const std::vector<TestFunction>& bank, double hbar = 1.0)
{
    using namespace detail;
    std::vector<CrossTermValue> out;
    const double hh = hbar * hbar;
    {
        const SurfacePoint p = fundamental_forms(chart, s.u1, s.u2);
        const LayerPoint lp = layer_point(p, s.u3);
        const auto& r = p.position_jets;
        const std::array<JetVec3, 2> a = {jet_diff(r, 0), jet_diff(r, 1)};
        const JetVec3 c = jet_cross(a[0], a[1]);
        const JetVec3 n = jet_scale(1.0 / sqrt(jet_dot(c, c)), c);
        const std::array<JetVec3, 2> dn = {jet_diff(n, 0), jet_diff(n, 1)};
        const Jet u3 = Jet::constant(s.u3);
        std::array<JetVec3, 2> Rb;
        for (int b = 0; b < 2; ++b) Rb[b] = jet_add(a[b], jet_scale(u3, dn[b]));
        // G_ab and its first two u3 derivatives
        Jet G[2][2], G1[2][2], G2[2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                G[i][j] = jet_dot(Rb[i], Rb[j]);
                G1[i][j] = jet_dot(dn[i], Rb[j]) + jet_dot(Rb[i], dn[j]);
                G2[i][j] = 2.0 * jet_dot(dn[i], dn[j]);
            }
        const Jet det = G[0][0] * G[1][1] - G[0][1] * G[1][0];
        const Jet det1 = G1[0][0] * G[1][1] + G[0][0] * G1[1][1] - 2.0 * G[0][1] * G1[0][1];
        const Jet det2 = G2[0][0] * G[1][1] + 2.0 * G1[0][0] * G1[1][1] + G[0][0] * G2[1][1] -
                         2.0 * (G1[0][1] * G1[0][1] + G[0][1] * G2[0][1]);
        const Jet F = -1.0 * det1 / (4.0 * det);
        const double dF = -(det2.value() * det.value() - det1.value() * det1.value()) /
                          (4.0 * det.value() * det.value());
        // R^a = G^ab R_b as jets, and its u3 derivative as values
        const Jet inv = 1.0 / det;
        const Jet Gi[2][2] = {{G[1][1] * inv, -1.0 * G[0][1] * inv}, {-1.0 * G[1][0] * inv, G[0][0] * inv}};
        std::array<JetVec3, 2> Ra;
        for (int i = 0; i < 2; ++i) Ra[i] = jet_add(jet_scale(Gi[i][0], Rb[0]), jet_scale(Gi[i][1], Rb[1]));
        Eigen::Matrix2d Gv, G1v;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                Gv(i, j) = G[i][j].value();
                G1v(i, j) = G1[i][j].value();
            }
        const Eigen::Matrix2d Ginv = Gv.inverse();
        const Eigen::Matrix2d dGinv = -Ginv * G1v * Ginv;
        std::array<Vec3, 2> dRa;
        for (int i = 0; i < 2; ++i) {
            dRa[i] = Vec3::Zero();
            for (int j = 0; j < 2; ++j) dRa[i] += dGinv(i, j) * jet_value(Rb[j]) + Ginv(i, j) * jet_value(dn[j]);
        }
        const Vec3 nv = jet_value(n);
        const double Fv = F.value();

        for (const auto& t : bank) {
            const Jet f = evaluate_jet(t.surface, s.u1, s.u2, chart.params);
            const TransverseValues h = transverse_values(t, s.u3);
            const double df[2] = {f.derivative(1, 0), f.derivative(0, 1)};
            // p_3H psi / (-i hbar) = n Phi, Phi = f h' - F f h
            const Jet Phi = f * h.dh - F * f * h.h;
            const JetVec3 V = jet_scale(Phi, n);
            // p'_H . (n Phi) / (-i hbar)^2
            double first = 0.0;
            for (int i = 0; i < 2; ++i) first += jet_value(Ra[i]).dot(jet_value(jet_diff(V, i)));
            first += Fv * nv.dot(jet_value(V));
            // p'_H psi / (-i hbar) = U = R^a d_a psi + n F psi; then n . (d3 U - F U)
            Vec3 U = Fv * f.value() * h.h * nv, dU = (dF * f.value() * h.h + Fv * f.value() * h.dh) * nv;
            for (int i = 0; i < 2; ++i) {
                U += jet_value(Ra[i]) * df[i] * h.h;
                dU += dRa[i] * df[i] * h.h + jet_value(Ra[i]) * df[i] * h.dh;
            }
            const double second = nv.dot(dU - Fv * U);
            const double lhs = -hh * (first + second);
            const double rhs = -hh * lp.dF * f.value() * h.h;
            if (!std::isfinite(lhs) || !std::isfinite(rhs)) throw DomainError("cross-term check: non-finite value");
            const double scale = hh * (std::abs(Fv * f.value() * h.dh) + Fv * Fv * std::abs(f.value() * h.h) +
                                       std::abs(dF * f.value() * h.h));
            out.push_back({lhs, rhs, scale});
        }
    }
    return out;
}

/// Applies p'_H . p_3H + p_3H . p'_H to psi and compares with -hbar^2 (d3 F) psi, where
///
///   p'_H = -i hbar (R^a d_a + n F),   p_3H = -i hbar n (d3 - F),   R^a = G^ab d_b(r + u3 n).
///
/// Every (u1, u2) dependence goes through order-3 jets of the chart; u3 derivatives are closed
/// forms in the frame R_b = a_b + u3 d_b n. The right-hand side uses the determinant polynomial of
/// the layer point, an independent route to d3 F.
inline CrossTermReport cross_term_identity_check(const SurfaceChart& chart, const std::vector<LayerSample>& points,
                                                 const std::vector<TestFunction>& bank, double hbar = 1.0)
{
    CrossTermReport rep;
    for (const auto& s : points) {
        for (const auto& v : cross_term_values(chart, s, bank, hbar)) {
            const double diff = std::abs(v.lhs - v.rhs);
            const double denom = std::max(std::abs(v.rhs), v.scale);
            rep.max_absolute_residual = std::max(rep.max_absolute_residual, diff);
            if (denom > 0.0) rep.max_relative_residual = std::max(rep.max_relative_residual, diff / denom);
            rep.max_rhs = std::max(rep.max_rhs, std::abs(v.rhs));
            ++rep.evaluations;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Sum of squared geometric momenta

struct PSquaredLevel {
    int n1 = 0, n2 = 0;
    /// max |(sum_x P_x^2 / hbar^2 + L - M^2) f| / max |L f| over the bank, interior band only.
    double residual = 0.0;
    /// max |sum_x P_x^2 1 / hbar^2 - M^2| on the band.
    double constant_mode_residual = 0.0;
};

struct PSquaredReport {
    PSquaredLevel coarse, fine;
    /// coarse.residual / fine.residual; about 4 for second order, undefined (0) when both vanish.
    double ratio = 0.0;
};

namespace detail {

// Nodes whose hard-wall coordinates keep a fixed physical distance (15% of the axis) from the
// walls. Centered products reach two nodes, and near a chart singularity the truncation constant
// grows, so the band does not move with the resolution.
inline std::vector<int> interior_band(const Grid2& g)
{
    std::vector<int> out;
    auto inside = [&](int axis, int i) {
        const GridAxis& ax = g.axes[static_cast<std::size_t>(axis)];
        if (ax.periodic) return true;
        const double u = ax.coord(i), margin = 0.15 * (ax.max - ax.min);
        return i >= 2 && i <= ax.n - 3 && u >= ax.min + margin && u <= ax.max - margin;
    };
    for (int i = 0; i < g.n1(); ++i)
        for (int j = 0; j < g.n2(); ++j)
            if (inside(0, i) && inside(1, j)) out.push_back(g.index(i, j));
    return out;
}

inline PSquaredLevel psquared_level(const SurfaceChart& chart, int n1, int n2, double hbar)
{
    const Grid2 g = build_grid(chart, n1, n2);
    const auto band = interior_band(g);
    if (band.empty()) throw ParameterError("psquared check: grid too coarse for an interior band");
    const int n = g.size();
    Eigen::SparseMatrix<cplx> P2(n, n);
    for (int x = 0; x < 3; ++x) {
        const auto P = geometric_momentum(g, x, hbar).matrix;
        P2 += Eigen::SparseMatrix<cplx>(P * P);
    }
    P2 /= hbar * hbar;
    const Eigen::SparseMatrix<double> L = laplace_beltrami_wide(g).matrix;
    Eigen::VectorXd M2(n);
    for (int i = 0; i < n; ++i) M2(i) = std::pow(g.points[static_cast<std::size_t>(i)].mean_curvature, 2);
    // smooth bank in normalized chart coordinates s = 2 pi (u - min) / length
    auto s = [&](int axis, double u) {
        const auto& d = chart.axes[static_cast<std::size_t>(axis)];
        return 2.0 * std::numbers::pi * (u - d.min) / d.length();
    };
    const std::array<double (*)(double, double), 4> bank = {
        [](double a, double b) { return std::cos(a) + std::sin(b); },
        [](double a, double b) { return std::sin(a) * std::cos(2.0 * b); },
        [](double a, double b) { return std::exp(std::cos(a)) * std::sin(b); },
        [](double, double) { return 1.0; },
    };
    PSquaredLevel lvl{n1, n2, 0.0, 0.0};
    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < bank.size(); ++k) {
        Eigen::VectorXd f(n);
        for (int i = 0; i < n; ++i) {
            const auto& p = g.points[static_cast<std::size_t>(i)];
            f(i) = bank[k](s(0, p.u1), s(1, p.u2));
        }
        const Eigen::VectorXcd lhs = P2 * f.cast<cplx>();
        const Eigen::VectorXd Lf = L * f;
        for (int i : band) {
            const double d = std::abs(lhs(i) + Lf(i) - M2(i) * f(i));
            if (k + 1 == bank.size()) {
                lvl.constant_mode_residual = std::max(lvl.constant_mode_residual, std::abs(lhs(i) - M2(i)));
            } else {
                diff = std::max(diff, d);
                scale = std::max(scale, std::abs(Lf(i)));
            }
        }
    }
    lvl.residual = scale > 0.0 ? diff / scale : diff;
    return lvl;
}

}  // namespace detail

/// Matrix-level check that sum_x P_x^2 / 2m equals -(hbar^2 / 2m)(L - M^2) up to O(h^2), with L
/// the centered-difference Laplace-Beltrami operator. Evaluated at (n1, n2) and (2 n1, 2 n2).
inline PSquaredReport psquared_expansion_check(const SurfaceChart& chart, int n1, int n2, double hbar = 1.0)
{
    PSquaredReport rep;
    rep.coarse = detail::psquared_level(chart, n1, n2, hbar);
    rep.fine = detail::psquared_level(chart, 2 * n1, 2 * n2, hbar);
    if (rep.fine.residual > 0.0) rep.ratio = rep.coarse.residual / rep.fine.residual;
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Layer transformation chi = gamma^1/2 psi

struct TlqReport {
    /// Weighted-Hermiticity residuals with the surface measure sqrt(g) h1 h2 h3.
    double surface_before = 0.0;
    double normal_before = 0.0;
    double surface_after = 0.0;
    double normal_after = 0.0;
    /// The whole layer operator against its own measure sqrt(G) h1 h2 h3.
    double sum_residual = 0.0;
};

/// Splits the layer operator into its surface (u1, u2) and normal (u3) parts. Acting on psi with
/// the surface measure, neither part is symmetric; after psi = gamma^-1/2 chi each is.
inline TlqReport tlq_transform_check(const SurfaceChart& chart, int n1, int n2, int n3, double d,
                                     std::optional<int> sector = std::nullopt, double hbar = 1.0, double mass = 1.0)
{
    const LayerGrid L = build_layer_grid(chart, n1, n2, n3, d, sector);
    const int n = L.size();
    const double cell = L.surface.axes[0].h * L.surface.axes[1].h * L.normal.h;
    Eigen::VectorXd surface_weight(n), root_gamma(n);
    for (int i = 0; i < n; ++i) {
        const auto& lp = L.points[static_cast<std::size_t>(i)];
        surface_weight(i) = lp.surface.sqrt_g * cell;
        root_gamma(i) = std::sqrt(lp.gamma);
    }
    TlqReport rep;
    rep.sum_residual = hermiticity_residual(layer_hamiltonian(L, hbar, mass, LayerBlock::Full));
    for (LayerBlock b : {LayerBlock::Surface, LayerBlock::Normal}) {
        const auto H = layer_hamiltonian(L, hbar, mass, b).matrix;
        const Eigen::SparseMatrix<double> T = root_gamma.asDiagonal() * H * root_gamma.cwiseInverse().asDiagonal();
        const double before = hermiticity_residual(H, surface_weight);
        const double after = hermiticity_residual(T, surface_weight);
        if (b == LayerBlock::Surface) {
            rep.surface_before = before;
            rep.surface_after = after;
        } else {
            rep.normal_before = before;
            rep.normal_after = after;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Thin-layer convergence

struct ThinLayerOptions {
    int count = 5;
    int n3 = 16;
    int n1 = 128;
    int n2 = 1;  // ignored for sector grids
    double hbar = 1.0;
    double mass = 1.0;
    double tolerance = 0.02;
    /// Worker threads for independent d-solves; 0 reads SURFQ_THREADS (0 or unset = hardware).
    int threads = 0;
};

struct ConvergenceReport {
    std::vector<double> d;
    /// levels[k][j]: level j at d[k] minus the transverse ground energy.
    std::vector<std::vector<double>> levels;
    std::vector<double> transverse_energy;
    std::vector<double> extrapolated;
    std::vector<double> slope;
    std::vector<double> surface_with_potential;
    std::vector<double> surface_without_potential;
    std::vector<double> error_with;
    std::vector<double> error_without;
    /// max over levels of the linear-fit residual divided by the level's variation across d.
    double linear_fit_residual = 0.0;
    double max_solver_residual = 0.0;
    double tolerance = 0.02;
    bool matches_with_potential = false;
    bool distinguishes_potential = false;
    bool potential_vanishes = false;
    bool passed = false;
};

inline int worker_count(int requested, int tasks)
{
    int n = requested;
    if (n <= 0) {
        const char* env = std::getenv("SURFQ_THREADS");
        n = env ? std::atoi(env) : 0;
    }
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return std::max(1, std::min(n, tasks));
}

/// Lowest level of the hard-wall well discretized like the layer: n cell-centred nodes across d.
inline double discrete_transverse_energy(int n, double d, double hbar = 1.0, double mass = 1.0)
{
    const double h = d / n;
    const double s = std::sin(std::numbers::pi * h / (2.0 * d));
    return hbar * hbar / (2.0 * mass) * 4.0 / (h * h) * s * s;
}

namespace detail {

inline double relative_error(double value, double ref, double scale)
{
    return std::abs(value - ref) / std::max(std::abs(ref), 1e-6 * std::max(1.0, scale));
}

}  // namespace detail

/// Solves the layer problem for each d, removes the transverse ground energy, extrapolates each
/// level linearly to d = 0 and compares with the surface Hamiltonian with and without V_geo.
inline ConvergenceReport thin_layer_convergence(const SurfaceChart& chart, std::optional<int> sector,
                                                std::vector<double> d_list, const ThinLayerOptions& opt = {})
{
    if (d_list.size() < 3) throw ParameterError("thin-layer: need at least three thickness values");
    for (std::size_t k = 0; k + 1 < d_list.size(); ++k)
        if (!(d_list[k] > d_list[k + 1])) throw ParameterError("thin-layer: thickness values must strictly decrease");
    if (!(d_list.back() > 0.0)) throw ParameterError("thin-layer: thickness values must be positive");
    if (opt.count < 1) throw ParameterError("thin-layer: count must be positive");

    ConvergenceReport rep;
    rep.d = d_list;
    rep.tolerance = opt.tolerance;
    const std::size_t nd = d_list.size();
    // grids first, so caustics surface before any solve
    std::vector<LayerGrid> grids;
    for (double d : d_list) grids.push_back(build_layer_grid(chart, opt.n1, opt.n2, opt.n3, d, sector));

    std::vector<SpectrumReport> solved(nd);
    std::vector<std::exception_ptr> failures(nd);
    const int workers = worker_count(opt.threads, static_cast<int>(nd));
    auto job = [&](std::size_t k) {
        try {
            SolveOptions so;
            so.vectors = false;
            solved[k] = solve_spectrum(layer_hamiltonian(grids[k], opt.hbar, opt.mass), opt.count, so);
        } catch (...) {
            failures[k] = std::current_exception();
        }
    };
    if (workers == 1) {
        for (std::size_t k = 0; k < nd; ++k) job(k);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t k = static_cast<std::size_t>(w); k < nd; k += static_cast<std::size_t>(workers)) job(k);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    const int count = static_cast<int>(solved.front().eigenvalues.size());
    for (std::size_t k = 0; k < nd; ++k) {
        const double e = discrete_transverse_energy(opt.n3, d_list[k], opt.hbar, opt.mass);
        rep.transverse_energy.push_back(e);
        std::vector<double> row;
        for (double v : solved[k].eigenvalues) row.push_back(v - e);
        rep.levels.push_back(row);
        rep.max_solver_residual = std::max(rep.max_solver_residual, solved[k].max_residual);
    }

    // least squares level = a + b d
    const Grid2 surface = build_grid(chart, opt.n1, opt.n2, sector);
    SolveOptions so;
    so.vectors = false;
    rep.surface_with_potential = solve_spectrum(surface_hamiltonian(surface, opt.hbar, opt.mass, true), count, so).eigenvalues;
    rep.surface_without_potential =
        solve_spectrum(surface_hamiltonian(surface, opt.hbar, opt.mass, false), count, so).eigenvalues;
    double scale = 0.0;
    for (double v : rep.surface_with_potential) scale = std::max(scale, std::abs(v));
    double potential_gap = 0.0;
    for (int j = 0; j < count; ++j) {
        Eigen::MatrixXd A(static_cast<int>(nd), 2);
        Eigen::VectorXd y(static_cast<int>(nd));
        for (std::size_t k = 0; k < nd; ++k) {
            A(static_cast<int>(k), 0) = 1.0;
            A(static_cast<int>(k), 1) = d_list[k];
            y(static_cast<int>(k)) = rep.levels[k][static_cast<std::size_t>(j)];
        }
        const Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
        rep.extrapolated.push_back(c(0));
        rep.slope.push_back(c(1));
        const double variation = y.maxCoeff() - y.minCoeff();
        const double fit = (A * c - y).cwiseAbs().maxCoeff();
        if (variation > 1e-12 * std::max(1.0, scale)) rep.linear_fit_residual = std::max(rep.linear_fit_residual, fit / variation);
        const double with = rep.surface_with_potential[static_cast<std::size_t>(j)];
        const double without = rep.surface_without_potential[static_cast<std::size_t>(j)];
        rep.error_with.push_back(detail::relative_error(c(0), with, scale));
        rep.error_without.push_back(detail::relative_error(c(0), without, scale));
        potential_gap = std::max(potential_gap, std::abs(with - without));
    }
    rep.potential_vanishes = potential_gap <= 1e-10 * std::max(1.0, scale);
    rep.matches_with_potential =
        std::all_of(rep.error_with.begin(), rep.error_with.end(), [&](double e) { return e <= opt.tolerance; });
    rep.distinguishes_potential =
        std::any_of(rep.error_without.begin(), rep.error_without.end(), [&](double e) { return e > opt.tolerance; });
    rep.passed = rep.matches_with_potential && (rep.distinguishes_potential || rep.potential_vanishes);
    return rep;
}

}  // namespace surfq
