#pragma once

// Riemannian base metrics, congestion vector fields and the Randers
// structures F(x,y) = sqrt(a_ij y^i y^j) + b_i y^i built from them.

#include "ftraffic/common.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ftraffic {

/// Central-difference step used wherever a coefficient field has no
/// analytic derivative. Relative to max(1, |x|).
inline constexpr double kCoefficientFdStep = 1e-5;

// -----------------------------------------------------------------------------
// RiemannianField
// -----------------------------------------------------------------------------

/// Symmetric positive-definite matrix field g_ij(x).
///
/// The optional gradient returns dg/dx^k for k = 0..n-1. Fields without one
/// fall back to central differences.
class RiemannianField {
public:
    using MetricFn = std::function<Matrix(const Point&)>;
    using GradientFn = std::function<std::vector<Matrix>(const Point&)>;

    RiemannianField(int dim, MetricFn metric, GradientFn gradient = {},
                    std::string name = "custom");

    static RiemannianField euclidean(int dim = 2);
    /// Position-independent metric; throws DomainError unless symmetric PD.
    static RiemannianField constant(Matrix g);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool has_analytic_gradient() const noexcept {
        return static_cast<bool>(gradient_);
    }

    /// Evaluates g(x). Throws DomainError on non-finite or non-symmetric output.
    [[nodiscard]] Matrix operator()(const Point& x) const;
    [[nodiscard]] std::vector<Matrix> gradient(const Point& x) const;

private:
    int dim_;
    MetricFn metric_;
    GradientFn gradient_;
    std::string name_;
};

/// sqrt(g_ij(x) y^i y^j).
[[nodiscard]] double norm_g(const RiemannianField& g, const Point& x, const Components& y);

// -----------------------------------------------------------------------------
// CongestionField
// -----------------------------------------------------------------------------

/// Samples of a planar vector field on a rectangular grid.
/// Values are stored with x as the slow index: w[ix * ys.size() + iy].
struct GridSamples {
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<Eigen::Vector2d> w;
};

/// Parses the `x,y,wx,wy` CSV format. Rows must be sorted by x, then by y,
/// and cover a full rectangle. Throws std::runtime_error with a line number.
[[nodiscard]] GridSamples parse_grid_csv(std::istream& in);
[[nodiscard]] GridSamples load_grid_csv(const std::string& path);
void write_grid_csv(std::ostream& out, const GridSamples& grid);

/// The exogenous congestion vector field w(x).
class CongestionField {
public:
    using FieldFn = std::function<Vector(const Point&)>;
    /// J(i,k) = dw^i/dx^k.
    using JacobianFn = std::function<Matrix(const Point&)>;

    CongestionField(int dim, FieldFn field, JacobianFn jacobian = {},
                    std::vector<Point> probes = {}, std::string description = "custom");

    static CongestionField none(int dim = 2);
    static CongestionField uniform(Vector w);
    /// Rotational field around `center`:
    ///   w(x) = strength * 2 (-(x2-c2), x1-c1) / (1 + r^2),
    /// whose magnitude peaks at `strength` on the unit circle around the center.
    static CongestionField vortex(Point center, double strength);
    /// Bilinear interpolation of grid samples. Evaluation outside the grid
    /// rectangle throws DomainError; nothing is clamped.
    static CongestionField grid(GridSamples samples);

    /// Parses `none`, `uniform(wx,wy)` or `vortex(cx,cy,strength)`.
    static CongestionField parse(std::string_view spec);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const std::string& description() const noexcept { return description_; }
    [[nodiscard]] bool has_analytic_jacobian() const noexcept {
        return static_cast<bool>(jacobian_);
    }
    /// Points where the field attains its largest magnitudes (grid nodes,
    /// the peak ring of a vortex, ...). Used by build_randers as a
    /// construction-time validity gate.
    [[nodiscard]] const std::vector<Point>& probe_points() const noexcept { return probes_; }

    /// Lower and upper corners of the domain for grid fields; nullopt for
    /// fields defined on all of R^n.
    [[nodiscard]] const std::optional<std::pair<Point, Point>>& bounds() const noexcept {
        return bounds_;
    }

    [[nodiscard]] Vector operator()(const Point& x) const;
    [[nodiscard]] Matrix jacobian(const Point& x) const;

private:
    int dim_;
    FieldFn field_;
    JacobianFn jacobian_;
    std::vector<Point> probes_;
    std::string description_;
    std::optional<std::pair<Point, Point>> bounds_;
};

// -----------------------------------------------------------------------------
// RandersStructure
// -----------------------------------------------------------------------------

struct RandersCoefficients {
    Matrix a;
    Vector b;
};

/// da[k] = da/dx^k, db[k] = db/dx^k.
struct RandersDerivatives {
    std::vector<Matrix> da;
    std::vector<Vector> db;
};

/// ||b||_alpha = sqrt(b^T a^{-1} b), the dual norm of the one-form.
[[nodiscard]] double beta_norm(const RandersCoefficients& c);

/// F(x,y) = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i.
///
/// Construction through the general constructor does not validate; every
/// coefficient evaluation does, so an invalid structure surfaces as a
/// DomainError at the first point it is used.
class RandersStructure {
public:
    using CoefficientFn = std::function<RandersCoefficients(const Point&)>;
    using DerivativeFn = std::function<RandersDerivatives(const Point&)>;

    RandersStructure(int dim, CoefficientFn coefficients, DerivativeFn derivatives = {});

    static RandersStructure euclidean(int dim = 2);
    /// Translation-invariant structure. Throws DomainError if ||b||_a >= 1.
    static RandersStructure constant(Matrix a, Vector b);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] bool has_analytic_derivatives() const noexcept {
        return static_cast<bool>(derivatives_);
    }

    /// Throws DomainError if a(x) is not positive-definite or ||b||_a >= 1.
    [[nodiscard]] RandersCoefficients coefficients(const Point& x) const;
    /// Analytic when available, central differences of coefficients() otherwise.
    [[nodiscard]] RandersDerivatives derivatives(const Point& x) const;

    [[nodiscard]] double operator()(const Point& x, const Components& y) const;

private:
    int dim_;
    CoefficientFn coefficients_;
    DerivativeFn derivatives_;
};

[[nodiscard]] double randers_eval(const RandersStructure& F, const Point& x, const Components& y);

struct BuildOptions {
    /// Reject points where ||w||_g >= 1 - saturation_margin.
    double saturation_margin = 1e-3;
    /// Extra points checked at construction, on top of the field's probes.
    std::vector<Point> check_points;
};

/// Randers structure measuring travel time through congestion w over base
/// metric g:  a = g / lambda^2,  b = g w / lambda,  lambda = 1 - ||w||_g^2.
///
/// Throws CongestionSaturation at construction if any probe or check point
/// is saturated, and from later evaluations at any saturated point.
[[nodiscard]] RandersStructure build_randers(const RiemannianField& g, const CongestionField& w,
                                             const BuildOptions& options = {});

/// ||w(x)||_g, without any saturation check.
[[nodiscard]] double congestion_norm(const RiemannianField& g, const CongestionField& w,
                                     const Point& x);

// -----------------------------------------------------------------------------
// Fundamental tensor and validation
// -----------------------------------------------------------------------------

enum class TensorMode { analytic, finite_difference };

/// g_ij(x,y) = 1/2 d^2(F^2)/dy^i dy^j. The finite-difference mode uses
/// central differences of F^2 with step `relative_step * |y|`.
/// Throws DomainError for y = 0.
[[nodiscard]] Matrix fundamental_tensor(const RandersStructure& F, const Point& x,
                                        const Components& y,
                                        TensorMode mode = TensorMode::analytic,
                                        double relative_step = 1e-4);

struct SampleCheck {
    Point x;
    Components y;
    bool valid = false;              ///< coefficients evaluable, ||b||_a < 1
    bool positive = false;           ///< F(x,y) > 0
    bool homogeneous = false;        ///< |F(x,ly) - lF(x,y)| <= 1e-10 lF for l in {0.5,2,10}
    bool nondegenerate = false;      ///< det g_ij(x,y) != 0
    bool positive_definite = false;  ///< min eigenvalue of g_ij(x,y) > 0
    double value = 0.0;
    double homogeneity_error = 0.0;  ///< worst relative error over the scale factors
    double determinant = 0.0;
    double min_eigenvalue = 0.0;
    std::string message;

    [[nodiscard]] bool passed() const noexcept {
        return valid && positive && homogeneous && nondegenerate && positive_definite;
    }
};

struct StructureReport {
    std::vector<SampleCheck> samples;

    [[nodiscard]] std::size_t failures() const noexcept;
    [[nodiscard]] bool all_passed() const noexcept { return failures() == 0; }
};

/// Runs the Finsler-structure checks at each (x, y) sample. Never throws for
/// invalid structures; failures are recorded per sample.
[[nodiscard]] StructureReport validate_structure(
    const RandersStructure& F, std::span<const std::pair<Point, Components>> samples);

}  // namespace ftraffic
