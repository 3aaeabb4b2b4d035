#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "surfq/chart.hpp"
#include "surfq/errors.hpp"
#include "surfq/jet.hpp"

namespace surfq {

/// Regularity threshold on sqrt(det g).
inline constexpr double kRegularityEpsilon = 1e-8;
/// Smallest admissible layer Jacobian factor gamma.
inline constexpr double kCausticGamma = 0.1;

using Vec3 = Eigen::Vector3d;
using JetVec3 = std::array<Jet, 3>;

namespace detail {

inline JetVec3 jet_cross(const JetVec3& a, const JetVec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Jet jet_dot(const JetVec3& a, const JetVec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline JetVec3 jet_scale(const Jet& s, const JetVec3& v) { return {s * v[0], s * v[1], s * v[2]}; }

inline JetVec3 jet_add(const JetVec3& a, const JetVec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

inline JetVec3 jet_diff(const JetVec3& v, int axis)
{
    return {v[0].differentiate(axis), v[1].differentiate(axis), v[2].differentiate(axis)};
}

inline Vec3 jet_value(const JetVec3& v) { return {v[0].value(), v[1].value(), v[2].value()}; }

}  // namespace detail

/// Pointwise surface geometry at (u1, u2).
struct SurfacePoint {
    double u1 = 0.0, u2 = 0.0;
    Vec3 position;
    std::array<Vec3, 2> tangent;   // a_a = d_a r
    Eigen::Matrix2d metric;        // g_ab
    Eigen::Matrix2d metric_inv;    // g^ab
    double sqrt_g = 0.0;
    Vec3 normal;                   // a_1 x a_2 normalized
    Eigen::Matrix2d curvature;     // K_ab = n . d_a d_b r
    double mean_curvature = 0.0;   // M = K^a_a / 2
    double gaussian_curvature = 0.0;
    JetVec3 position_jets;         // order-3 jets of x, y, z

    /// Mixed tensor K^a_b = g^ac K_cb.
    Eigen::Matrix2d shape_operator() const { return metric_inv * curvature; }
    /// Dual tangent vectors a^a = g^ab a_b.
    Vec3 dual_tangent(int a) const
    {
        return metric_inv(a, 0) * tangent[0] + metric_inv(a, 1) * tangent[1];
    }
};

/// Fundamental forms, normal and curvatures of `chart` at (u1, u2).
inline SurfacePoint fundamental_forms(const SurfaceChart& chart, double u1, double u2)
{
    SurfacePoint p;
    p.u1 = u1;
    p.u2 = u2;
    p.position_jets = position_jets(chart, u1, u2);
    const auto& r = p.position_jets;
    p.position = detail::jet_value(r);
    for (int a = 0; a < 2; ++a) {
        for (std::size_t k = 0; k < 3; ++k) p.tangent[a][k] = r[k].derivative(a == 0 ? 1 : 0, a == 0 ? 0 : 1);
    }
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) p.metric(a, b) = p.tangent[a].dot(p.tangent[b]);
    const double det = p.metric.determinant();
    if (!(det > 0.0) || std::sqrt(det) <= kRegularityEpsilon) {
        throw DegenerateMetricError("degenerate metric at (" + std::to_string(u1) + ", " + std::to_string(u2) +
                                    "): sqrt(g) = " + std::to_string(det > 0.0 ? std::sqrt(det) : 0.0));
    }
    p.sqrt_g = std::sqrt(det);
    p.metric_inv = p.metric.inverse();
    const Vec3 cross = p.tangent[0].cross(p.tangent[1]);
    p.normal = cross / cross.norm();
    Vec3 r11, r12, r22;
    for (std::size_t k = 0; k < 3; ++k) {
        r11[k] = r[k].derivative(2, 0);
        r12[k] = r[k].derivative(1, 1);
        r22[k] = r[k].derivative(0, 2);
    }
    p.curvature << p.normal.dot(r11), p.normal.dot(r12), p.normal.dot(r12), p.normal.dot(r22);
    const auto& g = p.metric;
    const auto& K = p.curvature;
    p.mean_curvature = (g(1, 1) * K(0, 0) + g(0, 0) * K(1, 1) - 2.0 * g(0, 1) * K(0, 1)) / (2.0 * det);
    p.gaussian_curvature = (K(0, 0) * K(1, 1) - K(0, 1) * K(0, 1)) / det;
    return p;
}

/// K_ab through the Weingarten relation d_a n = -K_a^b a_b, i.e. K_ab = -(d_a n) . a_b.
inline Eigen::Matrix2d curvature_by_weingarten(const SurfaceChart& chart, double u1, double u2)
{
    using namespace detail;
    const auto r = position_jets(chart, u1, u2);
    const JetVec3 a1 = jet_diff(r, 0), a2 = jet_diff(r, 1);
    const JetVec3 c = jet_cross(a1, a2);
    const Jet inv_norm = 1.0 / sqrt(jet_dot(c, c));
    const JetVec3 n = jet_scale(inv_norm, c);
    const std::array<Vec3, 2> dn = {jet_value(jet_diff(n, 0)), jet_value(jet_diff(n, 1))};
    const std::array<Vec3, 2> a = {jet_value(a1), jet_value(a2)};
    Eigen::Matrix2d K;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) K(i, j) = -dn[i].dot(a[j]);
    return K;
}

/// -(hbar^2 / 2m)(M^2 - K).
inline double geometric_potential(const SurfacePoint& p, double hbar = 1.0, double mass = 1.0)
{
    const double M = p.mean_curvature;
    const double spread = std::max(M * M - p.gaussian_curvature, 0.0);
    return -(hbar * hbar / (2.0 * mass)) * spread;
}

/// Quartic polynomial det G_ab(u3) = sum_k c[k] u3^k for G = g - 2 u3 K + u3^2 K g^-1 K.
inline std::array<double, 5> layer_determinant_polynomial(const Eigen::Matrix2d& g, const Eigen::Matrix2d& K)
{
    const Eigen::Matrix2d A = g, B = -2.0 * K, C = K * g.inverse() * K;
    // det(A + uB + u^2 C) for symmetric 2x2 entries
    auto mul = [](std::array<double, 3> p, std::array<double, 3> q) {
        std::array<double, 5> r{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) r[i + j] += p[i] * q[j];
        return r;
    };
    const auto d1 = mul({A(0, 0), B(0, 0), C(0, 0)}, {A(1, 1), B(1, 1), C(1, 1)});
    const auto d2 = mul({A(0, 1), B(0, 1), C(0, 1)}, {A(1, 0), B(1, 0), C(1, 0)});
    std::array<double, 5> out{};
    for (std::size_t k = 0; k < 5; ++k) out[k] = d1[k] - d2[k];
    return out;
}

inline double polyval(const std::array<double, 5>& c, double u, int deriv = 0)
{
    double s = 0.0;
    for (int k = 4; k >= deriv; --k) {
        double coef = c[static_cast<std::size_t>(k)];
        for (int j = 0; j < deriv; ++j) coef *= (k - j);
        s = s * u + coef;
    }
    return s;
}

/// Geometry of the layer at distance u3 along the normal.
struct LayerPoint {
    SurfacePoint surface;
    double u3 = 0.0;
    Eigen::Matrix2d metric;      // G_ab
    Eigen::Matrix2d metric_inv;  // G^ab
    double sqrt_G = 0.0;
    double gamma = 1.0;          // sqrt(det G / det g)
    double F = 0.0;              // -(1 / 2 sqrt G) d3 sqrt G
    double dF = 0.0;             // d3 F
    double d3_sqrt_G = 0.0;
    std::array<double, 5> det_polynomial{};
};

/// det(I - u3 K^a_b): the signed volume factor; equals gamma while the layer is caustic-free.
inline double signed_volume_factor(const SurfacePoint& p, double u3)
{
    return (Eigen::Matrix2d::Identity() - u3 * p.shape_operator()).determinant();
}

inline LayerPoint layer_point(const SurfacePoint& p, double u3, bool zero_curvature = false)
{
    LayerPoint l;
    l.surface = p;
    l.u3 = u3;
    const Eigen::Matrix2d K = zero_curvature ? Eigen::Matrix2d::Zero() : p.curvature;
    if (zero_curvature) {
        l.surface.curvature.setZero();
        l.surface.mean_curvature = 0.0;
        l.surface.gaussian_curvature = 0.0;
    }
    const double factor = signed_volume_factor(l.surface, u3);
    if (!(factor > kCausticGamma)) {
        throw CausticError("layer caustic at (" + std::to_string(p.u1) + ", " + std::to_string(p.u2) + ", " +
                           std::to_string(u3) + "): gamma = " + std::to_string(factor));
    }
    l.metric = p.metric - 2.0 * u3 * K + u3 * u3 * K * p.metric_inv * K;
    l.metric_inv = l.metric.inverse();
    l.det_polynomial = layer_determinant_polynomial(p.metric, K);
    const double detG = polyval(l.det_polynomial, u3);
    const double ddetG = polyval(l.det_polynomial, u3, 1);
    const double d2detG = polyval(l.det_polynomial, u3, 2);
    l.sqrt_G = std::sqrt(detG);
    l.gamma = std::sqrt(detG / p.metric.determinant());
    l.d3_sqrt_G = ddetG / (2.0 * l.sqrt_G);
    l.F = -ddetG / (4.0 * detG);
    l.dF = -(d2detG * detG - ddetG * ddetG) / (4.0 * detG * detG);
    return l;
}

/// Residuals of the exact determinant-based gamma against the two printed forms of its expansion.
struct GammaExpansionResidual {
    double u3 = 0.0;
    double gamma = 1.0;
    /// |gamma - (1 - 2 M u3 + K u3^2)|; identically zero up to roundoff.
    double polynomial = 0.0;
    /// |gamma - sqrt(1 - 4 M u3 + (4 M^2 + 2 K) u3^2)|; the determinant truncated at second order, O(u3^3).
    double truncated_root = 0.0;
};

inline GammaExpansionResidual gamma_expansion_residual(const SurfacePoint& p, double u3)
{
    const LayerPoint l = layer_point(p, u3);
    const double M = p.mean_curvature, K = p.gaussian_curvature;
    GammaExpansionResidual r;
    r.u3 = u3;
    r.gamma = l.gamma;
    r.polynomial = std::abs(l.gamma - (1.0 - 2.0 * M * u3 + K * u3 * u3));
    r.truncated_root = std::abs(l.gamma - std::sqrt(1.0 - 4.0 * M * u3 + (4.0 * M * M + 2.0 * K) * u3 * u3));
    return r;
}

/// (1 / sqrt G)[d3(sqrt G n) + d_a(sqrt G u^a)], evaluated with jets in (u1, u2) and closed forms in u3.
inline Vec3 divergence_identity_residual(const SurfaceChart& chart, double u1, double u2, double u3)
{
    using namespace detail;
    const SurfacePoint p = fundamental_forms(chart, u1, u2);
    const LayerPoint l = layer_point(p, u3);

    const auto& r = p.position_jets;
    const std::array<JetVec3, 2> a = {jet_diff(r, 0), jet_diff(r, 1)};
    const JetVec3 c = jet_cross(a[0], a[1]);
    const JetVec3 n = jet_scale(1.0 / sqrt(jet_dot(c, c)), c);
    // u_b = a_b + u3 d_b n
    std::array<JetVec3, 2> ub;
    for (int b = 0; b < 2; ++b) ub[b] = jet_add(a[b], jet_scale(Jet::constant(u3), jet_diff(n, b)));
    const Jet G11 = jet_dot(ub[0], ub[0]), G12 = jet_dot(ub[0], ub[1]), G22 = jet_dot(ub[1], ub[1]);
    const Jet detG = G11 * G22 - G12 * G12;
    const Jet rootG = sqrt(detG);
    // sqrt(G) G^ab = adj(G)_ab / sqrt(G)
    const Jet inv_root = 1.0 / rootG;
    const std::array<std::array<Jet, 2>, 2> weighted_inv = {{{G22 * inv_root, -1.0 * G12 * inv_root},
                                                             {-1.0 * G12 * inv_root, G11 * inv_root}}};
    Vec3 div = Vec3::Zero();
    for (int aa = 0; aa < 2; ++aa) {
        const JetVec3 flux = jet_add(jet_scale(weighted_inv[aa][0], ub[0]), jet_scale(weighted_inv[aa][1], ub[1]));
        div += jet_value(jet_diff(flux, aa));
    }
    const Vec3 normal_part = l.d3_sqrt_G * p.normal;
    return (normal_part + div) / l.sqrt_G;
}

/// Observed u3 -> 0 limits of F^2 and d3 F against M^2 and 2 M^2 - K.
struct LimitReport {
    std::array<double, 3> u3_samples{1e-2, 5e-3, 2.5e-3};
    std::array<double, 3> F_squared{};
    std::array<double, 3> dF{};
    double F_squared_limit = 0.0;
    double dF_limit = 0.0;
    double F_squared_expected = 0.0;
    double dF_expected = 0.0;
    double F_squared_residual = 0.0;
    double dF_residual = 0.0;
    /// log2 of the ratio of successive differences; ~1 for the raw samples.
    double F_squared_order = 0.0;
    double dF_order = 0.0;
};

namespace detail {

// Two-level Richardson on samples at u, u/2, u/4 assuming an expansion in integer powers of u.
inline double richardson_three(const std::array<double, 3>& v)
{
    const double a1 = 2.0 * v[1] - v[0];
    const double a2 = 2.0 * v[2] - v[1];
    return (4.0 * a2 - a1) / 3.0;
}

inline double observed_order(const std::array<double, 3>& v)
{
    const double d1 = v[0] - v[1], d2 = v[1] - v[2];
    if (d1 == 0.0 || d2 == 0.0) return 0.0;
    return std::log2(std::abs(d1 / d2));
}

}  // namespace detail

inline LimitReport limit_checks(const SurfacePoint& p)
{
    LimitReport rep;
    for (std::size_t k = 0; k < 3; ++k) {
        const LayerPoint l = layer_point(p, rep.u3_samples[k]);
        rep.F_squared[k] = l.F * l.F;
        rep.dF[k] = l.dF;
    }
    const double M = p.mean_curvature, K = p.gaussian_curvature;
    rep.F_squared_limit = detail::richardson_three(rep.F_squared);
    rep.dF_limit = detail::richardson_three(rep.dF);
    rep.F_squared_expected = M * M;
    rep.dF_expected = 2.0 * M * M - K;
    rep.F_squared_residual = std::abs(rep.F_squared_limit - rep.F_squared_expected);
    rep.dF_residual = std::abs(rep.dF_limit - rep.dF_expected);
    rep.F_squared_order = detail::observed_order(rep.F_squared);
    rep.dF_order = detail::observed_order(rep.dF);
    return rep;
}

}  // namespace surfq
