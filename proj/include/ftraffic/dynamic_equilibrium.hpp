#pragma once

// Time-dependent gap functional
//   G = integral over [t_0, t_N] of psi(h(t), c(t) - pi) h'(t) dt
// evaluated on sampled trajectories, and a projected-gradient minimizer.

#include "ftraffic/common.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ftraffic {

enum class IntegrandVariant {
    half_phi,          ///< psi = phi / 2
    half_phi_squared,  ///< psi = phi^2 / 2
};

[[nodiscard]] const char* to_string(IntegrandVariant v) noexcept;
[[nodiscard]] IntegrandVariant parse_integrand_variant(std::string_view s);

/// Travel time as a function of flow and time: `zero`, `identity` (c = h)
/// or `affine(a,b)` (c = a h + b).
struct CostModel {
    enum class Kind { zero, identity, affine };
    Kind kind = Kind::zero;
    double a = 0.0;
    double b = 0.0;

    [[nodiscard]] double operator()(double h, double t) const noexcept;
    [[nodiscard]] std::string describe() const;
    static CostModel parse(std::string_view spec);
};

/// Sampled flow trajectory. `c` is either empty or holds one travel time
/// per node.
struct Trajectory {
    std::vector<double> t;
    std::vector<double> h;
    std::vector<double> c;

    /// Throws DomainError: fewer than 3 nodes, non-increasing grid, size
    /// mismatch or non-finite values.
    void validate() const;
    [[nodiscard]] bool has_costs() const noexcept { return !c.empty(); }
    /// True if h is non-decreasing or non-increasing over the whole grid.
    [[nodiscard]] bool monotone() const noexcept;
};

/// Uniform grid of `nodes` points on [start, end].
[[nodiscard]] std::vector<double> uniform_grid(double start, double end, std::size_t nodes);

/// Fills c from a cost model.
[[nodiscard]] Trajectory with_costs(Trajectory traj, const CostModel& model);

struct DynamicConfig {
    IntegrandVariant variant = IntegrandVariant::half_phi_squared;
    /// Constant minimal route time subtracted from c.
    double pi_offset = 0.0;

    // Projected gradient settings.
    double step = 1.0;
    int max_iter = 5000;
    /// Stop when the projected-gradient step is below this in max norm.
    double tol = 1e-10;
    bool fix_start = false;
    bool fix_end = false;
};

/// psi(a, b) for the chosen variant.
[[nodiscard]] double dynamic_integrand(double h, double c, IntegrandVariant variant) noexcept;

/// Trapezoid quadrature of psi(h, c - pi) h'. h' uses central differences at
/// interior nodes and second-order one-sided differences at the ends.
/// Requires sampled costs.
[[nodiscard]] double dynamic_gap(const Trajectory& traj, const DynamicConfig& cfg = {});

/// converged: projected-gradient stationarity below tol.
/// stalled: no trial step decreased the objective.
/// diverged: the objective kept decreasing while h grew past 1e100, so the
///           functional is unbounded below on this problem.
enum class DynamicStatus { converged, max_iter, stalled, diverged };
[[nodiscard]] const char* to_string(DynamicStatus s) noexcept;

struct DynamicResult {
    Trajectory trajectory;
    double objective = 0.0;
    int iterations = 0;
    DynamicStatus status = DynamicStatus::max_iter;
    /// Objective after each accepted iteration, starting with the initial value.
    std::vector<double> history;
    bool monotone = true;
};

/// Projected gradient descent over the node values of h (projection h >= 0),
/// with the gradient taken by central differences of dynamic_gap. The
/// objective never increases between accepted iterates.
[[nodiscard]] DynamicResult minimize_dynamic(const CostModel& model, const std::vector<double>& grid,
                                             const DynamicConfig& cfg, const std::vector<double>& h0);

/// `t,h` or `t,h,c` CSV, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
[[nodiscard]] Trajectory read_trajectory_csv(std::istream& in);

}  // namespace ftraffic
