#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "surfq/chart.hpp"
#include "surfq/errors.hpp"
#include "surfq/geometry.hpp"

namespace surfq {

/// One coordinate axis of a structured grid.
///
/// Periodic axes are node-centered on [min, max). Hard-wall axes are cell-centered, so the first
/// and last nodes sit half a spacing inside the walls and no node lands on the boundary.
struct GridAxis {
    int n = 0;
    double h = 0.0;
    double min = 0.0, max = 0.0;
    bool periodic = false;

    double offset() const { return periodic ? 0.0 : 0.5; }
    double coord(int i) const { return min + (i + offset()) * h; }
};

inline GridAxis make_axis(const AxisDomain& d, int n)
{
    GridAxis a;
    a.n = n;
    a.min = d.min;
    a.max = d.max;
    a.periodic = d.periodic;
    a.h = d.length() / n;
    return a;
}

/// Structured grid over a chart with the surface geometry cached at every node.
///
/// With `sector` set, the u2 axis is replaced by a fixed angular wavenumber m: the grid has a
/// single column and operators substitute d_2 -> i m. Only axisymmetric charts allow this.
struct Grid2 {
    SurfaceChart chart;
    std::array<GridAxis, 2> axes;
    std::optional<int> sector;
    std::vector<SurfacePoint> points;
    Eigen::VectorXd weights;  // sqrt(g) h1 h2

    int n1() const { return axes[0].n; }
    int n2() const { return axes[1].n; }
    int size() const { return n1() * n2(); }
    int index(int i, int j) const { return i * n2() + j; }
    const SurfacePoint& at(int i, int j) const { return points[static_cast<std::size_t>(index(i, j))]; }
};

inline Grid2 build_grid(const SurfaceChart& chart, int n1, int n2, std::optional<int> sector = std::nullopt)
{
    if (n1 < 4) throw ParameterError("grid: n1 must be >= 4, got " + std::to_string(n1));
    Grid2 grid;
    grid.chart = chart;
    grid.sector = sector;
    grid.axes[0] = make_axis(chart.axes[0], n1);
    if (sector) {
        if (!chart.axisymmetric || !chart.axes[1].periodic)
            throw ParameterError("grid: sector reduction needs an axisymmetric chart with periodic u2");
        grid.axes[1] = make_axis(chart.axes[1], 1);
    } else {
        if (n2 < 4) throw ParameterError("grid: n2 must be >= 4, got " + std::to_string(n2));
        grid.axes[1] = make_axis(chart.axes[1], n2);
    }
    const int m1 = grid.n1(), m2 = grid.n2();
    grid.points.reserve(static_cast<std::size_t>(m1 * m2));
    grid.weights.resize(m1 * m2);
    for (int i = 0; i < m1; ++i) {
        for (int j = 0; j < m2; ++j) {
            const double u1 = grid.axes[0].coord(i);
            const double u2 = sector ? chart.axes[1].min : grid.axes[1].coord(j);
            try {
                grid.points.push_back(fundamental_forms(chart, u1, u2));
            } catch (const DegenerateMetricError& e) {
                throw DegenerateMetricError("grid node (" + std::to_string(i) + ", " + std::to_string(j) +
                                            "): " + e.what());
            }
            grid.weights(grid.index(i, j)) = grid.points.back().sqrt_g * grid.axes[0].h * grid.axes[1].h;
        }
    }
    if (sector) {
        for (const auto& p : grid.points) {
            if (std::abs(p.metric(0, 1)) > 1e-12 * std::sqrt(p.metric(0, 0) * p.metric(1, 1)))
                throw ParameterError("grid: sector reduction requires an orthogonal chart (g12 = 0)");
        }
    }
    return grid;
}

}  // namespace surfq
