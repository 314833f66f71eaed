#pragma once

// Nonlinear complementarity problems
//   x >= 0,  F(x) >= 0,  x^T F(x) = 0
// solved through the Fischer-Burmeister reformulation Phi(x) = 0 and its
// merit function G(x) = 1/2 |Phi(x)|^2.

#include "ftraffic/common.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace ftraffic {

/// phi(a,b) = sqrt(a^2 + b^2) - (a + b).
[[nodiscard]] double fb_phi(double a, double b) noexcept;

/// An element (d phi/da, d phi/db) of the Clarke generalized gradient.
/// At the origin the element (1/sqrt2 - 1, 1/sqrt2 - 1) is returned.
[[nodiscard]] std::pair<double, double> fb_subgradient(double a, double b) noexcept;

struct NcpProblem {
    using MapFn = std::function<Vector(const Vector&)>;
    using JacobianFn = std::function<Matrix(const Vector&)>;

    int n = 0;
    MapFn F;
    /// Central differences (relative step 1e-7) are used when absent.
    JacobianFn jacobian;
};

/// Evaluates F(x) and checks it is finite with the right size.
[[nodiscard]] Vector evaluate_map(const NcpProblem& problem, const Vector& x);
/// Jacobian of F, analytic or by central differences.
[[nodiscard]] Matrix evaluate_jacobian(const NcpProblem& problem, const Vector& x);

/// Component i is phi(x_i, F_i(x)).
[[nodiscard]] Vector fb_system(const Vector& x, const NcpProblem& problem);
/// G(x) = 1/2 |Phi(x)|^2.
[[nodiscard]] double merit(const Vector& x, const NcpProblem& problem);
/// grad G = H^T Phi with H = D_a + D_b J_F.
[[nodiscard]] Vector merit_gradient(const Vector& x, const NcpProblem& problem);

struct SolverConfig {
    double tol_merit = 1e-12;
    double tol_residual = 1e-8;
    int max_iter = 200;
    double armijo_sigma = 1e-4;
    double armijo_beta = 0.5;
    double descent_rho = 1e-10;
    double descent_p = 2.1;
    double min_step = 1e-16;

    /// Throws DomainError if any setting is out of range.
    void validate() const;
};

enum class SolveStatus { converged, max_iter, line_search_failure };

[[nodiscard]] const char* to_string(SolveStatus s) noexcept;

struct SolveReport {
    Vector x_star;
    double merit = 0.0;
    /// max_i |phi(x_i, F_i(x))|
    double residual = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::max_iter;
    /// Merit value after each accepted iteration, starting with the initial point.
    std::vector<double> merit_history;
    int gradient_steps = 0;

    [[nodiscard]] bool converged() const noexcept { return status == SolveStatus::converged; }
};

/// Damped semismooth Newton on Phi(x) = 0 with Armijo backtracking on G.
/// Falls back to steepest descent on G when the Newton system is singular or
/// its direction fails d^T grad G <= -rho |d|^p. Default start: all ones.
[[nodiscard]] SolveReport solve_ncp(const NcpProblem& problem, const SolverConfig& config = {},
                                    std::optional<Vector> x0 = std::nullopt);

}  // namespace ftraffic
