#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "surfq/discrete_operator.hpp"
#include "surfq/field.hpp"
#include "surfq/geometry.hpp"
#include "surfq/grid.hpp"

namespace surfq {

namespace detail {

// Link between neighbouring nodes along one axis, oriented from -> to in the +u direction.
struct Link {
    int from = 0, to = 0;
    double mid1 = 0.0, mid2 = 0.0;  // link midpoint in chart coordinates
    double du = 0.0;                // coordinate length, always +h
};

// A node next to a hard wall and the chart coordinates of the wall face.
struct Wall {
    int node = 0;
    double u1 = 0.0, u2 = 0.0;
};

inline std::vector<Link> grid_links(const Grid2& g, int axis)
{
    std::vector<Link> links;
    const GridAxis& ax = g.axes[static_cast<std::size_t>(axis)];
    if (ax.n < 2) return links;
    const int last = ax.periodic ? ax.n : ax.n - 1;
    for (int a = 0; a < last; ++a) {
        const int b = (a + 1) % ax.n;
        const int other_n = axis == 0 ? g.n2() : g.n1();
        for (int o = 0; o < other_n; ++o) {
            Link l;
            l.from = axis == 0 ? g.index(a, o) : g.index(o, a);
            l.to = axis == 0 ? g.index(b, o) : g.index(o, b);
            const double mid = ax.coord(a) + 0.5 * ax.h;
            const double across = axis == 0 ? g.at(a, o).u2 : g.at(o, a).u1;
            l.mid1 = axis == 0 ? mid : across;
            l.mid2 = axis == 0 ? across : mid;
            l.du = ax.h;
            links.push_back(l);
        }
    }
    return links;
}

inline std::vector<Wall> grid_walls(const Grid2& g, int axis)
{
    std::vector<Wall> walls;
    const GridAxis& ax = g.axes[static_cast<std::size_t>(axis)];
    if (ax.periodic || ax.n < 2) return walls;
    const int other_n = axis == 0 ? g.n2() : g.n1();
    for (int side = 0; side < 2; ++side) {
        const int a = side == 0 ? 0 : ax.n - 1;
        const double u = side == 0 ? ax.min : ax.max;
        for (int o = 0; o < other_n; ++o) {
            const SurfacePoint& p = axis == 0 ? g.at(a, o) : g.at(o, a);
            walls.push_back({axis == 0 ? g.index(a, o) : g.index(o, a), axis == 0 ? u : p.u1, axis == 0 ? p.u2 : u});
        }
    }
    return walls;
}

// sqrt(g) g^aa at a wall face; zero where the chart degenerates (a pole), which makes the face
// flux vanish as it does in the continuum.
inline double wall_coefficient(const SurfaceChart& chart, const Wall& w, int axis)
{
    try {
        const SurfacePoint p = fundamental_forms(chart, w.u1, w.u2);
        return p.sqrt_g * p.metric_inv(axis, axis);
    } catch (const DegenerateMetricError&) {
        return 0.0;
    }
}

inline double coefficient(const SurfacePoint& p, int a, int b) { return p.sqrt_g * p.metric_inv(a, b); }

template <typename Scalar>
Scalar link_factor(double theta)
{
    if constexpr (std::is_same_v<Scalar, double>) {
        return 1.0;
    } else {
        return std::polar(1.0, -theta);
    }
}

template <typename Scalar>
Scalar conj_of(Scalar v)
{
    if constexpr (std::is_same_v<Scalar, double>) {
        return v;
    } else {
        return std::conj(v);
    }
}

// Centered first-difference matrix along `axis` with Dirichlet-by-omission at walls and link
// phases; anti-Hermitian when all phases vanish.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> centered_difference(const Grid2& g, int axis, const std::vector<double>* theta)
{
    const auto links = grid_links(g, axis);
    const double h = g.axes[static_cast<std::size_t>(axis)].h;
    std::vector<Eigen::Triplet<Scalar>> t;
    for (std::size_t k = 0; k < links.size(); ++k) {
        const double th = theta ? (*theta)[k] : 0.0;
        const Scalar u = link_factor<Scalar>(th);
        // row `from` sees its forward neighbour, row `to` its backward one
        t.emplace_back(links[k].from, links[k].to, u / (2.0 * h));
        t.emplace_back(links[k].to, links[k].from, -conj_of(u) / (2.0 * h));
    }
    Eigen::SparseMatrix<Scalar> D(g.size(), g.size());
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

inline bool has_mixed_terms(const Grid2& g)
{
    if (g.sector) return false;
    for (const auto& p : g.points) {
        const double c11 = coefficient(p, 0, 0), c22 = coefficient(p, 1, 1), c12 = coefficient(p, 0, 1);
        if (std::abs(c12) > 1e-13 * std::max(c11, c22)) return true;
    }
    return false;
}

// Per-link Peierls phases (q / hbar) * integral of A along the link, per axis.
struct LinkPhases {
    std::array<std::vector<double>, 2> theta;
    std::vector<double> sector_wavenumber;  // m - (q / hbar) A_2 per node (sector grids only)
};

// Weighted flux-form Laplace-Beltrami stiffness K = W L.
//
//   (W L psi)_i = sum_links c_face (h1 h2 / h_a^2) (U_ij psi_j - psi_i)
//                 - 2 c_wall (h1 h2 / h_a^2) psi_i                     (mirror ghost at hard walls)
//                 - h1 h2 (D1^+ C12 D2 + D2^+ C12 D1) psi               (off-diagonal metric)
//                 - h1 h2 c22 k^2 psi                                  (sector grids, d_2 -> i k)
template <typename Scalar>
Eigen::SparseMatrix<Scalar> weighted_laplacian(const Grid2& g, const LinkPhases* phases)
{
    const int n = g.size();
    const double cell = g.axes[0].h * g.axes[1].h;
    std::vector<Eigen::Triplet<Scalar>> t;
    for (int axis = 0; axis < 2; ++axis) {
        const double h = g.axes[static_cast<std::size_t>(axis)].h;
        const double scale = cell / (h * h);
        const auto links = grid_links(g, axis);
        for (std::size_t k = 0; k < links.size(); ++k) {
            const auto& l = links[k];
            const double c = 0.5 *
                             (coefficient(g.points[static_cast<std::size_t>(l.from)], axis, axis) +
                              coefficient(g.points[static_cast<std::size_t>(l.to)], axis, axis)) *
                             scale;
            const Scalar u = link_factor<Scalar>(phases ? phases->theta[static_cast<std::size_t>(axis)][k] : 0.0);
            t.emplace_back(l.from, l.to, c * u);
            t.emplace_back(l.to, l.from, c * conj_of(u));
            t.emplace_back(l.from, l.from, -c);
            t.emplace_back(l.to, l.to, -c);
        }
        for (const auto& w : grid_walls(g, axis))
            t.emplace_back(w.node, w.node, -2.0 * wall_coefficient(g.chart, w, axis) * scale);
    }
    if (g.sector) {
        for (int i = 0; i < n; ++i) {
            const double k = phases ? phases->sector_wavenumber[static_cast<std::size_t>(i)] : *g.sector;
            t.emplace_back(i, i, -coefficient(g.points[static_cast<std::size_t>(i)], 1, 1) * k * k * cell);
        }
    }
    Eigen::SparseMatrix<Scalar> K(n, n);
    K.setFromTriplets(t.begin(), t.end());
    if (has_mixed_terms(g)) {
        Eigen::VectorXd c12(n);
        for (int i = 0; i < n; ++i) c12(i) = coefficient(g.points[static_cast<std::size_t>(i)], 0, 1) * cell;
        const auto D1 = centered_difference<Scalar>(g, 0, phases ? &phases->theta[0] : nullptr);
        const auto D2 = centered_difference<Scalar>(g, 1, phases ? &phases->theta[1] : nullptr);
        const Eigen::SparseMatrix<Scalar> C = c12.cast<Scalar>().asDiagonal() * D2;
        const Eigen::SparseMatrix<Scalar> C1 = c12.cast<Scalar>().asDiagonal() * D1;
        const Eigen::SparseMatrix<Scalar> a = D1.adjoint() * C;
        const Eigen::SparseMatrix<Scalar> b = D2.adjoint() * C1;
        K = K - a - b;
    }
    K.makeCompressed();
    return K;
}

inline Eigen::VectorXd geometric_potential_vector(const Grid2& g, double hbar, double mass)
{
    Eigen::VectorXd v(g.size());
    for (int i = 0; i < g.size(); ++i) v(i) = geometric_potential(g.points[static_cast<std::size_t>(i)], hbar, mass);
    return v;
}

inline void describe(std::map<std::string, std::string>& meta, const Grid2& g)
{
    meta["chart"] = g.chart.name;
    meta["grid"] = std::to_string(g.n1()) + "x" + std::to_string(g.n2());
    if (g.sector) meta["sector"] = std::to_string(*g.sector);
}

}  // namespace detail

/// Flux-form Laplace-Beltrami operator (1 / sqrt g) d_a (sqrt g g^ab d_b) on the compact stencil.
inline DiscreteOperator<double> laplace_beltrami(const Grid2& g)
{
    auto op = from_weighted<double>(detail::weighted_laplacian<double>(g, nullptr), g.weights, "laplace_beltrami", true);
    detail::describe(op.metadata, g);
    return op;
}

/// Laplace-Beltrami built from centered first differences, -W^-1 sum_ab D_a^T (h1 h2 sqrt g g^ab) D_b.
/// Its stencil is twice as wide; it is the form that products of centered momentum matrices produce.
inline DiscreteOperator<double> laplace_beltrami_wide(const Grid2& g)
{
    const int n = g.size();
    const double cell = g.axes[0].h * g.axes[1].h;
    Eigen::SparseMatrix<double> K(n, n);
    const int axes = g.sector ? 1 : 2;
    std::array<Eigen::SparseMatrix<double>, 2> D;
    for (int a = 0; a < axes; ++a) D[static_cast<std::size_t>(a)] = detail::centered_difference<double>(g, a, nullptr);
    for (int a = 0; a < axes; ++a) {
        for (int b = 0; b < axes; ++b) {
            Eigen::VectorXd c(n);
            for (int i = 0; i < n; ++i) c(i) = detail::coefficient(g.points[static_cast<std::size_t>(i)], a, b) * cell;
            const Eigen::SparseMatrix<double> cd = c.asDiagonal() * D[static_cast<std::size_t>(b)];
            K -= Eigen::SparseMatrix<double>(D[static_cast<std::size_t>(a)].transpose() * cd);
        }
    }
    if (g.sector) {
        const double m = *g.sector;
        Eigen::VectorXd diag(n);
        for (int i = 0; i < n; ++i) diag(i) = detail::coefficient(g.points[static_cast<std::size_t>(i)], 1, 1) * m * m * cell;
        for (int i = 0; i < n; ++i) K.coeffRef(i, i) -= diag(i);
    }
    K.makeCompressed();
    auto op = from_weighted<double>(K, g.weights, "laplace_beltrami_wide", true);
    detail::describe(op.metadata, g);
    return op;
}

/// H = -(hbar^2 / 2m) L + V_geo. With `geometric_potential` false the curvature term is left out
/// (used as the comparison baseline in thin-layer experiments).
inline DiscreteOperator<double> surface_hamiltonian(const Grid2& g, double hbar = 1.0, double mass = 1.0,
                                                    bool with_geometric_potential = true)
{
    Eigen::SparseMatrix<double> K = detail::weighted_laplacian<double>(g, nullptr) * (-(hbar * hbar) / (2.0 * mass));
    if (with_geometric_potential) {
        const Eigen::VectorXd v = detail::geometric_potential_vector(g, hbar, mass);
        for (int i = 0; i < g.size(); ++i) K.coeffRef(i, i) += v(i) * g.weights(i);
    }
    K.makeCompressed();
    auto op = from_weighted<double>(K, g.weights, with_geometric_potential ? "surface_hamiltonian" : "surface_kinetic", true);
    detail::describe(op.metadata, g);
    return op;
}

/// Peierls phases for every link of the grid; midpoint rule on the projected potential, plus the
/// exact node difference of an optional lattice gauge function.
inline detail::LinkPhases link_phases(const Grid2& g, const VectorPotentialField& field, double hbar,
                                      const LatticeGauge* gauge = nullptr)
{
    detail::LinkPhases ph;
    const double qh = field.charge / hbar;
    for (int axis = 0; axis < 2; ++axis) {
        for (const auto& l : detail::grid_links(g, axis)) {
            const auto A = projected_potential(g.chart, field, l.mid1, l.mid2);
            double theta = qh * A[static_cast<std::size_t>(axis)] * l.du;
            if (gauge) {
                theta += qh * ((*gauge)(g.points[static_cast<std::size_t>(l.to)].position) -
                               (*gauge)(g.points[static_cast<std::size_t>(l.from)].position));
            }
            ph.theta[static_cast<std::size_t>(axis)].push_back(theta);
        }
    }
    if (g.sector) {
        if (gauge) throw ParameterError("lattice gauge transformations are not supported on sector grids");
        for (const auto& p : g.points) {
            const Vec3 A = field.vector_potential(p.position);
            ph.sector_wavenumber.push_back(*g.sector - qh * A.dot(p.tangent[1]));
        }
    }
    return ph;
}

/// -(hbar^2 / 2m) D'.D' + V_geo + q V with Peierls link phases exp(-(i q / hbar) int A . dl).
/// On sector grids the field must be axisymmetric; d_2 -> i (m - q A_2 / hbar).
inline DiscreteOperator<cplx> em_surface_hamiltonian(const Grid2& g, const VectorPotentialField& field, double hbar = 1.0,
                                                     double mass = 1.0, const LatticeGauge* gauge = nullptr)
{
    const auto phases = link_phases(g, field, hbar, gauge);
    Eigen::SparseMatrix<cplx> K = detail::weighted_laplacian<cplx>(g, &phases) * cplx(-(hbar * hbar) / (2.0 * mass));
    const Eigen::VectorXd v = detail::geometric_potential_vector(g, hbar, mass);
    for (int i = 0; i < g.size(); ++i) {
        const double qv = field.charge * field.potential(g.points[static_cast<std::size_t>(i)].position);
        K.coeffRef(i, i) += (v(i) + qv) * g.weights(i);
    }
    K.makeCompressed();
    auto op = from_weighted<cplx>(K, g.weights, "em_surface_hamiltonian", true);
    detail::describe(op.metadata, g);
    op.metadata["charge"] = detail::mm_number(field.charge);
    return op;
}

/// Cartesian component (0 = x, 1 = y, 2 = z) of the geometric momentum
/// (-i hbar / 2 sqrt g) {sqrt g u^a, d_a}_+ on centered differences.
inline DiscreteOperator<cplx> geometric_momentum(const Grid2& g, int cartesian_axis, double hbar = 1.0)
{
    if (cartesian_axis < 0 || cartesian_axis > 2) throw ParameterError("geometric_momentum: axis must be 0, 1 or 2");
    const int n = g.size();
    const double cell = g.axes[0].h * g.axes[1].h;
    Eigen::SparseMatrix<cplx> K(n, n);
    const cplx pref(0.0, -hbar / 2.0);
    for (int a = 0; a < (g.sector ? 1 : 2); ++a) {
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i) {
            const auto& p = g.points[static_cast<std::size_t>(i)];
            s(i) = p.sqrt_g * p.dual_tangent(a)[cartesian_axis] * cell;
        }
        const auto D = detail::centered_difference<cplx>(g, a, nullptr);
        const Eigen::SparseMatrix<cplx> S = Eigen::SparseMatrix<cplx>(s.cast<cplx>().asDiagonal() * D);
        const Eigen::SparseMatrix<cplx> T = Eigen::SparseMatrix<cplx>(D * s.cast<cplx>().asDiagonal());
        K += pref * (S + T);
    }
    if (g.sector) {
        // {s, i m}_+ = 2 i m s
        for (int i = 0; i < n; ++i) {
            const auto& p = g.points[static_cast<std::size_t>(i)];
            K.coeffRef(i, i) += pref * cplx(0.0, 2.0 * *g.sector) * (p.sqrt_g * p.dual_tangent(1)[cartesian_axis] * cell);
        }
    }
    K.makeCompressed();
    static constexpr const char* names[] = {"x", "y", "z"};
    auto op = from_weighted<cplx>(K, g.weights, std::string("geometric_momentum_") + names[cartesian_axis], true,
                                  kMomentumHermitianTolerance);
    detail::describe(op.metadata, g);
    return op;
}

/// Counterexample: the non-divergence form g^aa d_a^2 + (1 / sqrt g) d_a(sqrt g g^aa) d_a with a
/// forward difference for the first-order term. Not weighted-Hermitian; kept for tests.
inline DiscreteOperator<double> one_sided_laplacian(const Grid2& g)
{
    if (g.sector) throw ParameterError("one_sided_laplacian: full grids only");
    const int n = g.size();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < g.n1(); ++i) {
        for (int j = 0; j < g.n2(); ++j) {
            const int row = g.index(i, j);
            const auto& p = g.at(i, j);
            for (int a = 0; a < 2; ++a) {
                const GridAxis& ax = g.axes[static_cast<std::size_t>(a)];
                const int pos = a == 0 ? i : j;
                auto neighbour = [&](int step) -> int {
                    int q = pos + step;
                    if (ax.periodic) q = (q + ax.n) % ax.n;
                    if (q < 0 || q >= ax.n) return -1;
                    return a == 0 ? g.index(q, j) : g.index(i, q);
                };
                const int fwd = neighbour(1), bwd = neighbour(-1);
                const double h = ax.h;
                // second derivative
                const double gaa = p.metric_inv(a, a);
                t.emplace_back(row, row, -2.0 * gaa / (h * h));
                if (fwd >= 0) t.emplace_back(row, fwd, gaa / (h * h));
                if (bwd >= 0) t.emplace_back(row, bwd, gaa / (h * h));
                // drift (1 / sqrt g) d_a(sqrt g g^aa) from a centred coefficient difference,
                // applied to a forward difference of psi
                if (fwd >= 0 && bwd >= 0) {
                    const auto& q = g.points[static_cast<std::size_t>(fwd)];
                    const auto& r = g.points[static_cast<std::size_t>(bwd)];
                    const double drift =
                        (detail::coefficient(q, a, a) - detail::coefficient(r, a, a)) / (2.0 * h * p.sqrt_g);
                    t.emplace_back(row, fwd, drift / h);
                    t.emplace_back(row, row, -drift / h);
                }
            }
        }
    }
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(t.begin(), t.end());
    DiscreteOperator<double> op;
    op.matrix = L;
    op.weights = g.weights;
    op.label = "one_sided_laplacian";
    op.hermitian = false;
    detail::describe(op.metadata, g);
    return op;
}

// ---------------------------------------------------------------------------------------------
// Layer around the surface: u3 in (-d/2, d/2) with hard walls.

struct LayerGrid {
    Grid2 surface;
    GridAxis normal;
    double thickness = 0.0;
    bool zero_curvature = false;
    std::vector<LayerPoint> points;
    Eigen::VectorXd weights;  // sqrt(G) h1 h2 h3

    int n3() const { return normal.n; }
    int size() const { return surface.size() * n3(); }
    int index(int surface_node, int k) const { return surface_node * n3() + k; }
};

/// Layer grid of thickness d. `zero_curvature` replaces K_ab by zero (a test hook: the operator
/// then separates into surface and transverse parts).
inline LayerGrid build_layer_grid(const SurfaceChart& chart, int n1, int n2, int n3, double d,
                                  std::optional<int> sector = std::nullopt, bool zero_curvature = false)
{
    if (n3 < 4) throw ParameterError("layer: need at least 4 transverse nodes, got " + std::to_string(n3));
    if (!(d > 0.0)) throw ParameterError("layer: thickness must be positive");
    LayerGrid L;
    L.surface = build_grid(chart, n1, n2, sector);
    L.normal = make_axis(AxisDomain{-d / 2, d / 2, false}, n3);
    L.thickness = d;
    L.zero_curvature = zero_curvature;
    L.points.reserve(static_cast<std::size_t>(L.size()));
    L.weights.resize(L.size());
    const double cell = L.surface.axes[0].h * L.surface.axes[1].h * L.normal.h;
    for (const auto& p : L.surface.points) {
        // walls first: a caustic anywhere in the closed layer is rejected
        layer_point(p, -d / 2, zero_curvature);
        layer_point(p, d / 2, zero_curvature);
        for (int k = 0; k < n3; ++k) {
            L.points.push_back(layer_point(p, L.normal.coord(k), zero_curvature));
            L.weights(static_cast<int>(L.points.size()) - 1) = L.points.back().sqrt_G * cell;
        }
    }
    return L;
}

enum class LayerBlock { Full, Surface, Normal };

inline const char* block_name(LayerBlock b)
{
    switch (b) {
    case LayerBlock::Full: return "layer_hamiltonian";
    case LayerBlock::Surface: return "layer_surface_block";
    case LayerBlock::Normal: return "layer_normal_block";
    }
    return "layer";
}

namespace detail {

inline double layer_coefficient(const LayerPoint& l, int a, int b) { return l.sqrt_G * l.metric_inv(a, b); }

// Surface matrix acting independently on every transverse level: (node, k) x (node', k).
inline Eigen::SparseMatrix<double> lift_to_layer(const Eigen::SparseMatrix<double>& S, int n3)
{
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < S.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(S, c); it; ++it)
            for (int k = 0; k < n3; ++k)
                t.emplace_back(static_cast<int>(it.row()) * n3 + k, static_cast<int>(it.col()) * n3 + k, it.value());
    Eigen::SparseMatrix<double> out(S.rows() * n3, S.cols() * n3);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

inline double layer_wall_coefficient(const LayerGrid& L, const Wall& w, int axis, double u3)
{
    try {
        const SurfacePoint p = fundamental_forms(L.surface.chart, w.u1, w.u2);
        return layer_coefficient(layer_point(p, u3, L.zero_curvature), axis, axis);
    } catch (const DegenerateMetricError&) {
        return 0.0;
    }
}

}  // namespace detail

/// -(hbar^2 / 2m)(1 / sqrt G)[d_a sqrt G G^ab d_b + d_3 sqrt G d_3] in flux form, or one of its
/// two blocks. Each block is assembled against the sqrt(G) measure.
inline DiscreteOperator<double> layer_hamiltonian(const LayerGrid& L, double hbar = 1.0, double mass = 1.0,
                                                  LayerBlock block = LayerBlock::Full)
{
    const Grid2& g = L.surface;
    const int n3 = L.n3();
    const double h3 = L.normal.h;
    const double cell = g.axes[0].h * g.axes[1].h * h3;
    std::vector<Eigen::Triplet<double>> t;
    const bool surface = block != LayerBlock::Normal, normal = block != LayerBlock::Surface;
    auto lp = [&](int node, int k) -> const LayerPoint& { return L.points[static_cast<std::size_t>(L.index(node, k))]; };
    auto edge = [&](int a, int b, double c) {
        t.emplace_back(a, b, c);
        t.emplace_back(b, a, c);
        t.emplace_back(a, a, -c);
        t.emplace_back(b, b, -c);
    };
    if (surface) {
        for (int axis = 0; axis < 2; ++axis) {
            const double h = g.axes[static_cast<std::size_t>(axis)].h;
            const double scale = cell / (h * h);
            for (const auto& l : detail::grid_links(g, axis)) {
                for (int k = 0; k < n3; ++k) {
                    const double c = 0.5 *
                                     (detail::layer_coefficient(lp(l.from, k), axis, axis) +
                                      detail::layer_coefficient(lp(l.to, k), axis, axis)) *
                                     scale;
                    edge(L.index(l.from, k), L.index(l.to, k), c);
                }
            }
            for (const auto& w : detail::grid_walls(g, axis)) {
                for (int k = 0; k < n3; ++k) {
                    const double c = detail::layer_wall_coefficient(L, w, axis, L.normal.coord(k)) * scale;
                    t.emplace_back(L.index(w.node, k), L.index(w.node, k), -2.0 * c);
                }
            }
        }
        if (g.sector) {
            const double m = *g.sector;
            for (int node = 0; node < g.size(); ++node)
                for (int k = 0; k < n3; ++k)
                    t.emplace_back(L.index(node, k), L.index(node, k),
                                   -detail::layer_coefficient(lp(node, k), 1, 1) * m * m * cell);
        }
    }
    if (normal) {
        const double scale = cell / (h3 * h3);
        for (int node = 0; node < g.size(); ++node) {
            const SurfacePoint& p = g.points[static_cast<std::size_t>(node)];
            for (int k = 0; k + 1 < n3; ++k) {
                const double face = L.normal.coord(k) + 0.5 * h3;
                edge(L.index(node, k), L.index(node, k + 1), layer_point(p, face, L.zero_curvature).sqrt_G * scale);
            }
            const double lo = layer_point(p, -L.thickness / 2, L.zero_curvature).sqrt_G * scale;
            const double hi = layer_point(p, L.thickness / 2, L.zero_curvature).sqrt_G * scale;
            t.emplace_back(L.index(node, 0), L.index(node, 0), -2.0 * lo);
            t.emplace_back(L.index(node, n3 - 1), L.index(node, n3 - 1), -2.0 * hi);
        }
    }
    Eigen::SparseMatrix<double> K(L.size(), L.size());
    K.setFromTriplets(t.begin(), t.end());
    if (surface && !g.sector) {
        Eigen::VectorXd c12(L.size());
        double worst = 0.0;
        for (int i = 0; i < L.size(); ++i) {
            const auto& l = L.points[static_cast<std::size_t>(i)];
            c12(i) = detail::layer_coefficient(l, 0, 1) * cell;
            const double diag = std::max(detail::layer_coefficient(l, 0, 0), detail::layer_coefficient(l, 1, 1));
            worst = std::max(worst, std::abs(detail::layer_coefficient(l, 0, 1)) / diag);
        }
        if (worst > 1e-13) {
            // off-diagonal G^12 on centered differences, layer by layer
            const auto E1 = detail::lift_to_layer(detail::centered_difference<double>(g, 0, nullptr), n3);
            const auto E2 = detail::lift_to_layer(detail::centered_difference<double>(g, 1, nullptr), n3);
            const Eigen::SparseMatrix<double> a = E1.transpose() * Eigen::SparseMatrix<double>(c12.asDiagonal() * E2);
            const Eigen::SparseMatrix<double> b = E2.transpose() * Eigen::SparseMatrix<double>(c12.asDiagonal() * E1);
            K = K - a - b;
        }
    }
    K *= -(hbar * hbar) / (2.0 * mass);
    K.makeCompressed();
    auto op = from_weighted<double>(K, L.weights, block_name(block), true);
    detail::describe(op.metadata, g);
    op.metadata["n3"] = std::to_string(n3);
    op.metadata["d"] = detail::mm_number(L.thickness);
    return op;
}

inline DiscreteOperator<double> layer_hamiltonian(const SurfaceChart& chart, int n1, int n2, int n3, double d,
                                                  double hbar = 1.0, double mass = 1.0,
                                                  std::optional<int> sector = std::nullopt)
{
    return layer_hamiltonian(build_layer_grid(chart, n1, n2, n3, d, sector), hbar, mass);
}

}  // namespace surfq
