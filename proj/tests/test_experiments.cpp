#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "surfq/experiments.hpp"
#include "test_support.hpp"

namespace surfq {
namespace {

using Field = std::function<double(const Vec3&)>;
using VecField = std::function<Vec3(const Vec3&)>;

constexpr double kStep = 1e-4;

Vec3 gradient(const Field& f, const Vec3& x)
{
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        Vec3 e = Vec3::Zero();
        e(i) = kStep;
        g(i) = (f(x + e) - f(x - e)) / (2 * kStep);
    }
    return g;
}

// Jacobian J(i, j) = d_j V_i.
Eigen::Matrix3d jacobian(const VecField& v, const Vec3& x)
{
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
        Vec3 e = Vec3::Zero();
        e(j) = kStep;
        J.col(j) = (v(x + e) - v(x - e)) / (2 * kStep);
    }
    return J;
}

TEST(CrossTerm, PlaneVanishes)
{
    const auto chart = builtin_chart("plane", {});
    const auto rep = cross_term_identity_check(chart, sample_layer_points(chart, 10, 0.1, 3), default_test_bank());
    EXPECT_EQ(rep.evaluations, 50);
    EXPECT_LE(rep.max_absolute_residual, 1e-14);
    EXPECT_EQ(rep.max_rhs, 0.0);
}

// Cylinder R = 1 with psi = cos(u2) u3: both sides from Cartesian finite differences of the 3D
// operators p'_H = -i(grad_par + n F), p_3H = -i n (n . grad - F), with u3 = R - rho inward.
TEST(CrossTerm, CylinderAgainstCartesianDifferences)
{
    const double R = 1.0;
    const auto chart = builtin_chart("cylinder", {{"R", R}});
    const std::vector<TestFunction> bank = {make_test_function("cos(u2)", "u3")};
    const Field rho = [](const Vec3& x) { return std::hypot(x(0), x(1)); };
    const VecField n = [&](const Vec3& x) -> Vec3 { return -Vec3(x(0), x(1), 0.0) / rho(x); };
    const Field F = [&](const Vec3& x) { return 1.0 / (2.0 * rho(x)); };
    const Field psi = [&](const Vec3& x) { return x(0) / rho(x) * (R - rho(x)); };
    const VecField p3 = [&](const Vec3& x) -> Vec3 { return n(x) * (n(x).dot(gradient(psi, x)) - F(x) * psi(x)); };
    const VecField pt = [&](const Vec3& x) -> Vec3 {
        const Vec3 g = gradient(psi, x), nn = n(x);
        return g - nn * nn.dot(g) + nn * F(x) * psi(x);
    };
    for (double u2 : {0.3, 1.7, 4.0}) {
        for (double u3 : {-0.15, 0.05, 0.2}) {
            const Vec3 x((R - u3) * std::cos(u2), (R - u3) * std::sin(u2), 0.4);
            const Vec3 nn = n(x);
            // p'_H . (p_3H psi): tangential divergence plus F n . V
            const Eigen::Matrix3d J1 = jacobian(p3, x);
            const double first = J1.trace() - nn.dot(J1 * nn) + F(x) * nn.dot(p3(x));
            // p_3H . (p'_H psi): n . ((n . grad) U - F U)
            const Eigen::Matrix3d J2 = jacobian(pt, x);
            const double second = nn.dot(J2 * nn) - F(x) * nn.dot(pt(x));
            const double lhs_fd = -(first + second);
            const double rhs = -std::cos(u2) * u3 / (2.0 * (R - u3) * (R - u3));
            const auto v = cross_term_values(chart, {0.4, u2, u3}, bank).front();
            EXPECT_NEAR(v.rhs, rhs, 1e-8 * std::abs(rhs));
            EXPECT_NEAR(v.lhs, rhs, 1e-8 * std::abs(rhs));
            EXPECT_NEAR(lhs_fd, rhs, 1e-5 * std::max(std::abs(rhs), 1.0));
        }
    }
}

TEST(CrossTerm, TorusBank)
{
    const auto chart = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    const auto rep = cross_term_identity_check(chart, sample_layer_points(chart, 20, 0.1, 0x5eed), default_test_bank());
    EXPECT_EQ(rep.evaluations, 100);
    EXPECT_LE(rep.max_relative_residual, 1e-6);
    EXPECT_GT(rep.max_rhs, 0.0);
}

TEST(CrossTerm, Preconditions)
{
    const auto cyl = builtin_chart("cylinder", {{"R", 1.0}});
    EXPECT_THROW(sample_layer_points(cyl, 50, 1.5, 1), CausticError);
    const std::vector<TestFunction> bad = {make_test_function("1", "sqrt(u3 - 5)")};
    EXPECT_THROW(cross_term_values(cyl, {0.0, 1.0, 0.1}, bad), DomainError);
    EXPECT_THROW(make_test_function("u3", "1"), UnknownIdentifierError);
    EXPECT_THROW(make_test_function("1", "u1"), UnknownIdentifierError);
}

TEST(CrossTerm, SamplingIsDeterministic)
{
    const auto chart = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    const auto a = sample_layer_points(chart, 5, 0.1, 42), b = sample_layer_points(chart, 5, 0.1, 42);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].u1, b[k].u1);
        EXPECT_EQ(a[k].u3, b[k].u3);
        EXPECT_LE(std::abs(a[k].u3), 0.1);
    }
}

TEST(PSquared, PlaneExact)
{
    const auto rep = psquared_expansion_check(builtin_chart("plane", {}), 12, 16);
    EXPECT_LE(rep.coarse.residual, 1e-10);
    EXPECT_LE(rep.fine.residual, 1e-10);
}

TEST(PSquared, SphereSecondOrder)
{
    const auto rep = psquared_expansion_check(builtin_chart("sphere", {{"R", 1.0}}), 16, 32);
    EXPECT_GT(rep.ratio, 3.5);
    EXPECT_LT(rep.ratio, 5.0);
    EXPECT_LT(rep.fine.residual, rep.coarse.residual);
}

TEST(PSquared, CylinderConstantModeGivesMSquared)
{
    // sum_x P_x^2 1 = hbar^2 M^2 = 1/4 up to O(h^2)
    const auto rep = psquared_expansion_check(builtin_chart("cylinder", {{"R", 1.0}}), 16, 32);
    EXPECT_LT(rep.fine.constant_mode_residual, 2e-3);
    const double ratio = rep.coarse.constant_mode_residual / rep.fine.constant_mode_residual;
    EXPECT_NEAR(ratio, 4.0, 0.3);
}

TEST(Tlq, PlaneTrivial)
{
    const auto r = tlq_transform_check(builtin_chart("plane", {}), 8, 8, 6, 0.2);
    EXPECT_LE(r.surface_before, 1e-12);
    EXPECT_LE(r.normal_before, 1e-12);
    EXPECT_LE(r.surface_after, 1e-12);
    EXPECT_LE(r.normal_after, 1e-12);
}

TEST(Tlq, CylinderNormalBlock)
{
    const auto r = tlq_transform_check(builtin_chart("cylinder", {{"R", 1.0}}), 12, 16, 8, 0.2);
    EXPECT_GE(r.normal_before, 1e-3);
    EXPECT_LE(r.normal_after, 1e-10);
    EXPECT_LE(r.surface_after, 1e-10);
    EXPECT_LE(r.sum_residual, 1e-12);
}

TEST(Tlq, TorusSectorBothBlocks)
{
    const auto r = tlq_transform_check(builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}}), 32, 1, 8, 0.2, 0);
    EXPECT_GE(r.surface_before, 1e-3);
    EXPECT_GE(r.normal_before, 1e-3);
    EXPECT_LE(r.surface_after, 1e-10);
    EXPECT_LE(r.normal_after, 1e-10);
    EXPECT_LE(r.sum_residual, 1e-12);
}

TEST(ThinLayer, DiscreteTransverseEnergyMatchesTridiagonal)
{
    for (int n : {4, 9, 16}) {
        const double d = 0.3, h = d / n;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            T(i, i) = (i == 0 || i == n - 1) ? 3.0 : 2.0;
            if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = -1.0;
        }
        T *= 0.5 / (h * h);
        const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues()(0);
        EXPECT_NEAR(discrete_transverse_energy(n, d), lowest, 1e-10 * lowest);
    }
}

TEST(ThinLayer, PlaneControl)
{
    ThinLayerOptions o;
    o.n1 = 8;
    o.n2 = 8;
    o.n3 = 6;
    o.count = 4;
    const auto rep = thin_layer_convergence(builtin_chart("plane", {}), std::nullopt, {0.4, 0.2, 0.1}, o);
    EXPECT_TRUE(rep.potential_vanishes);
    EXPECT_TRUE(rep.passed);
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(rep.extrapolated[j], rep.surface_with_potential[j], 1e-9);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(rep.levels[k][j], rep.surface_with_potential[j], 1e-9);
    }
}

TEST(ThinLayer, TorusSectorSelectsGeometricPotential)
{
    ThinLayerOptions o;
    o.n1 = 64;
    o.n3 = 16;
    const auto rep = thin_layer_convergence(builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}}), 0, {0.2, 0.1, 0.05}, o);
    EXPECT_TRUE(rep.matches_with_potential);
    EXPECT_TRUE(rep.distinguishes_potential);
    EXPECT_TRUE(rep.passed);
    EXPECT_LE(rep.linear_fit_residual, 0.1);
    EXPECT_LT(rep.max_solver_residual, 1e-6);
    ASSERT_EQ(rep.levels.size(), 3u);
}

TEST(ThinLayer, ThreadCountDoesNotChangeResults)
{
    ThinLayerOptions a, b;
    a.n1 = b.n1 = 32;
    a.n3 = b.n3 = 8;
    a.threads = 1;
    b.threads = 3;
    const auto chart = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    const auto x = thin_layer_convergence(chart, 0, {0.2, 0.1, 0.05}, a);
    const auto y = thin_layer_convergence(chart, 0, {0.2, 0.1, 0.05}, b);
    EXPECT_EQ(x.extrapolated, y.extrapolated);
}

TEST(ThinLayer, Preconditions)
{
    const auto chart = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    EXPECT_THROW(thin_layer_convergence(chart, 0, {0.2, 0.1}), ParameterError);
    EXPECT_THROW(thin_layer_convergence(chart, 0, {0.1, 0.2, 0.05}), ParameterError);
    EXPECT_THROW(thin_layer_convergence(chart, 0, {2.5, 0.2, 0.1}), CausticError);
}

}  // namespace
}  // namespace surfq
