#pragma once

// Independent oracles and fixtures shared by the unit and acceptance tests.

#include "ftraffic/finsler_core.hpp"
#include "ftraffic/geodesic.hpp"
#include "ftraffic/ncp_solver.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>

namespace test_support {

using ftraffic::Matrix;
using ftraffic::Point;
using ftraffic::Vector;

inline std::string data_path(const std::string& name) { return std::string(FTRAFFIC_DATA_DIR) + "/" + name; }

/// Brute-force LCP oracle: x >= 0, Mx + q >= 0, x^T (Mx + q) = 0, by trying
/// every set S of free variables (x_S solves M_SS x_S = -q_S, x = 0 off S).
inline std::optional<Vector> lcp_by_enumeration(const Matrix& M, const Vector& q, double eps = 1e-10) {
    const int n = static_cast<int>(q.size());
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> free;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) free.push_back(i);
        }
        Vector x = Vector::Zero(n);
        if (!free.empty()) {
            const int m = static_cast<int>(free.size());
            Matrix A(m, m);
            Vector rhs(m);
            for (int i = 0; i < m; ++i) {
                rhs[i] = -q[free[i]];
                for (int j = 0; j < m; ++j) A(i, j) = M(free[i], free[j]);
            }
            Eigen::FullPivLU<Matrix> lu(A);
            if (!lu.isInvertible()) continue;
            const Vector xs = lu.solve(rhs);
            for (int i = 0; i < m; ++i) x[free[i]] = xs[i];
        }
        const Vector w = M * x + q;
        if ((x.array() >= -eps).all() && (w.array() >= -eps).all()) return x;
    }
    return std::nullopt;
}

/// M = A A^T + mu I with A entries uniform in [-1, 1].
inline Matrix random_spd(int n, double mu, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix A(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) A(i, j) = u(rng);
    }
    return A * A.transpose() + mu * Matrix::Identity(n, n);
}

inline ftraffic::NcpProblem affine_problem(const Matrix& M, const Vector& q) {
    ftraffic::NcpProblem p;
    p.n = static_cast<int>(q.size());
    p.F = [M, q](const Vector& x) -> Vector { return M * x + q; };
    p.jacobian = [M](const Vector&) -> Matrix { return M; };
    return p;
}

/// Central-difference gradient of a scalar function.
template <class Fn>
Vector fd_gradient(Fn&& f, const Vector& x, double rel = 1e-6) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel * std::max(1.0, std::abs(x[i]));
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Euclidean plane in polar coordinates (r, theta): g = diag(1, r^2), with
/// its analytic gradient. Geodesics are straight lines in Cartesian terms.
inline ftraffic::RiemannianField polar_euclidean() {
    return ftraffic::RiemannianField(
        2,
        [](const Point& x) -> Matrix {
            Matrix g = Matrix::Zero(2, 2);
            g(0, 0) = 1.0;
            g(1, 1) = x[0] * x[0];
            return g;
        },
        [](const Point& x) -> std::vector<Matrix> {
            Matrix dr = Matrix::Zero(2, 2);
            dr(1, 1) = 2.0 * x[0];
            return {dr, Matrix::Zero(2, 2)};
        },
        "polar");
}

/// Base metric that varies with position: A + diag(0.3 sin^2 x, 0.3 cos^2 y).
inline ftraffic::RiemannianField wavy_metric(const Matrix& A) {
    return ftraffic::RiemannianField(
        2,
        [A](const Point& x) -> Matrix {
            Matrix g = A;
            g(0, 0) += 0.3 * std::sin(x[0]) * std::sin(x[0]);
            g(1, 1) += 0.3 * std::cos(x[1]) * std::cos(x[1]);
            return g;
        },
        [](const Point& x) -> std::vector<Matrix> {
            Matrix d0 = Matrix::Zero(2, 2), d1 = Matrix::Zero(2, 2);
            d0(0, 0) = 0.3 * std::sin(2.0 * x[0]);
            d1(1, 1) = -0.3 * std::sin(2.0 * x[1]);
            return {d0, d1};
        },
        "wavy");
}

/// A random position-dependent Randers structure: wavy base metric over a
/// random SPD matrix, plus a vortex field of random centre and strength < 0.9.
struct RandomStructure {
    ftraffic::RandersStructure F;
    std::string label;
};

inline RandomStructure random_randers(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), s(0.05, 0.85);
    Matrix A = random_spd(2, 0.5, rng);
    const Point centre = Eigen::Vector2d(u(rng), u(rng));
    const double strength = s(rng);
    // The vortex peak is measured in the Euclidean norm; rescale so the
    // g-norm stays below the strength bound (g >= lambda_min(A) I).
    const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(A).eigenvalues().maxCoeff() + 0.3;
    const double scaled = strength / std::sqrt(lmax);
    auto F = ftraffic::build_randers(wavy_metric(A), ftraffic::CongestionField::vortex(centre, scaled));
    return {std::move(F), "vortex strength " + std::to_string(scaled)};
}

/// Smooth bump with value delta at t = 1/2 and zero at both ends: on each
/// half the natural cubic d (1.5 s - 0.5 s^3), s = 2 min(t, 1 - t).
/// Returns the perturbed curve with velocities adjusted exactly.
inline ftraffic::Curve bump(const ftraffic::Curve& c, const Vector& delta) {
    std::vector<double> t = c.params();
    std::vector<Point> x = c.points();
    std::vector<Vector> v = c.velocities();
    const double t0 = t.front(), span = t.back() - t.front();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double tau = (t[k] - t0) / span;
        const bool left = tau <= 0.5;
        const double s = 2.0 * (left ? tau : 1.0 - tau);
        const double shape = 1.5 * s - 0.5 * s * s * s;
        const double slope = (1.5 - 1.5 * s * s) * 2.0 * (left ? 1.0 : -1.0) / span;
        x[k] += shape * delta;
        v[k] += slope * delta;
    }
    return ftraffic::Curve(std::move(t), std::move(x), std::move(v));
}

}  // namespace test_support
