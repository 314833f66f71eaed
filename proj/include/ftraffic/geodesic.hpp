#pragma once

// Geodesics of Randers structures: the Euler-Lagrange system of L = F^2/2,
// curve length, initial-value integration and two-point shooting.

#include "ftraffic/finsler_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ftraffic {

/// Discretized parametrized path. If `velocities` is left empty, the
/// constructor fills it by second-order finite differences of `points`.
class Curve {
public:
    Curve() = default;
    Curve(std::vector<double> params, std::vector<Point> points,
          std::vector<Components> velocities = {});

    /// N nodes on [0,1] along the segment p -> q.
    static Curve straight(const Point& p, const Point& q, std::size_t nodes);

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    [[nodiscard]] int dim() const noexcept {
        return points_.empty() ? 0 : static_cast<int>(points_.front().size());
    }
    [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }
    [[nodiscard]] const std::vector<Point>& points() const noexcept { return points_; }
    [[nodiscard]] const std::vector<Components>& velocities() const noexcept { return velocities_; }
    [[nodiscard]] const Point& front() const { return points_.front(); }
    [[nodiscard]] const Point& back() const { return points_.back(); }

    /// Largest pointwise distance to `other`, which must share the grid size.
    [[nodiscard]] double sup_distance(const Curve& other) const;

private:
    std::vector<double> params_;
    std::vector<Point> points_;
    std::vector<Components> velocities_;
};

/// Derivatives of L = F^2/2 at a line element (x, y).
/// yx(i, j) = d^2 L / dy^i dx^j.
struct LagrangianTerms {
    double F = 0.0;
    Vector y;
    Matrix yy;
    Vector x;
    Matrix yx;
};

/// Throws DomainError for y = 0.
[[nodiscard]] LagrangianTerms lagrangian_terms(const RandersStructure& F, const Point& x,
                                               const Components& y);

/// Composite trapezoid quadrature of F(x_k, v_k) over the curve's grid.
/// Throws DomainError if every velocity vanishes.
[[nodiscard]] double curve_length(const RandersStructure& F, const Curve& c);

/// Euler-Lagrange residual L_yy x'' + L_yx x' - L_x at each interior node
/// (x'' from second differences of the points). Requires at least 3 nodes.
[[nodiscard]] std::vector<Vector> el_residual(const RandersStructure& F, const Curve& c);

/// Max over nodes of the Euclidean norm of el_residual.
[[nodiscard]] double max_el_residual(const RandersStructure& F, const Curve& c);

struct GeodesicIvp {
    Point x0;
    Components y0;
    double horizon = 1.0;
    std::size_t steps = 199;
};

/// Classical RK4 on x'' = L_yy^{-1} (L_x - L_yx x'). Returns steps + 1 nodes
/// on [0, horizon] with exact (integrated) velocities. Throws DomainError on
/// validity violations or non-finite states.
[[nodiscard]] Curve geodesic_ivp(const RandersStructure& F, const GeodesicIvp& ivp);

struct BvpConfig {
    std::size_t nodes = 200;
    double tolerance = 1e-6;
    int max_newton = 40;
    /// Perturbed restarts tried after the primary shooting run stagnates.
    int max_restarts = 8;
    /// Restart guesses add normal noise of this size, relative to |q - p|.
    double restart_spread = 0.5;
    /// Run every restart even after a success, to look for shorter geodesics.
    bool explore_restarts = false;
    std::uint64_t seed = 20240611;
};

struct BvpResult {
    Curve curve;
    double endpoint_error = 0.0;
    bool converged = false;
    int iterations = 0;
    int restarts = 0;
    /// Number of distinct converged geodesics encountered.
    int multiplicity = 0;
};

/// Single shooting on the initial velocity so that x(1) = q, starting from
/// y0 = q - p. Never throws for non-convergence; returns the best attempt.
[[nodiscard]] BvpResult geodesic_bvp(const RandersStructure& F, const Point& p, const Point& q,
                                     const BvpConfig& config = {});

/// `t,x,y` rows at 17 significant digits. Planar curves only.
void write_curve_csv(std::ostream& out, const Curve& c);
/// Reads back the `t,x,y` format; velocities are re-derived by differences.
[[nodiscard]] Curve read_curve_csv(std::istream& in);
/// Minimal SVG polyline with a viewBox fitted to the points.
void write_curve_svg(std::ostream& out, const Curve& c);

}  // namespace ftraffic
