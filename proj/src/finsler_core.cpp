#include "ftraffic/finsler_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ftraffic {

CongestionSaturation::CongestionSaturation(Point where, double norm, double margin)
    : DomainError([&] {
          std::ostringstream os;
          os << "congestion saturation at " << format_point(where) << ": ||w||_g = "
             << std::setprecision(17) << norm << " reaches 1 - " << margin;
          return os.str();
      }()),
      where_(std::move(where)),
      norm_(norm) {}

std::string format_point(const Point& x) {
    std::ostringstream os;
    os << std::setprecision(17) << '(';
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (i > 0) os << ", ";
        os << x[i];
    }
    os << ')';
    return os.str();
}

namespace {

double fd_step(const Point& x) {
    return kCoefficientFdStep * std::max(1.0, x.norm());
}

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) throw DomainError(std::string("non-finite ") + what);
}

void require_dim(const Point& x, int dim, const char* what) {
    if (x.size() != dim) {
        throw DomainError(std::string(what) + ": expected dimension " + std::to_string(dim) +
                          ", got " + std::to_string(x.size()));
    }
}

}  // namespace

// -----------------------------------------------------------------------------
// RiemannianField
// -----------------------------------------------------------------------------

RiemannianField::RiemannianField(int dim, MetricFn metric, GradientFn gradient, std::string name)
    : dim_(dim), metric_(std::move(metric)), gradient_(std::move(gradient)), name_(std::move(name)) {
    if (dim_ < 1) throw DomainError("RiemannianField: dimension must be positive");
    if (!metric_) throw DomainError("RiemannianField: empty metric function");
}

RiemannianField RiemannianField::euclidean(int dim) {
    return RiemannianField(
        dim, [dim](const Point&) { return Matrix::Identity(dim, dim); },
        [dim](const Point&) { return std::vector<Matrix>(dim, Matrix::Zero(dim, dim)); },
        "euclidean");
}

RiemannianField RiemannianField::constant(Matrix g) {
    if (g.rows() != g.cols() || g.rows() == 0) throw DomainError("metric matrix must be square");
    require_finite(g, "metric matrix");
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("metric matrix is not symmetric");
    }
    if (Eigen::LLT<Matrix>(g).info() != Eigen::Success) {
        throw DomainError("metric matrix is not positive-definite");
    }
    const int n = static_cast<int>(g.rows());
    return RiemannianField(
        n, [g](const Point&) { return g; },
        [n](const Point&) { return std::vector<Matrix>(n, Matrix::Zero(n, n)); }, "constant");
}

Matrix RiemannianField::operator()(const Point& x) const {
    require_dim(x, dim_, "RiemannianField");
    Matrix g = metric_(x);
    if (g.rows() != dim_ || g.cols() != dim_) throw DomainError("metric has wrong shape");
    require_finite(g, "metric value");
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("metric not symmetric at " + format_point(x));
    }
    return g;
}

std::vector<Matrix> RiemannianField::gradient(const Point& x) const {
    require_dim(x, dim_, "RiemannianField");
    if (gradient_) return gradient_(x);
    const double h = fd_step(x);
    std::vector<Matrix> out;
    out.reserve(dim_);
    for (int k = 0; k < dim_; ++k) {
        Point xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        out.push_back(((*this)(xp) - (*this)(xm)) / (2.0 * h));
    }
    return out;
}

double norm_g(const RiemannianField& g, const Point& x, const Components& y) {
    require_finite(y, "tangent components");
    require_dim(y, g.dim(), "norm_g");
    const double q = y.dot(g(x) * y);
    return std::sqrt(std::max(0.0, q));
}

// -----------------------------------------------------------------------------
// Grid CSV
// -----------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": invalid number '" + s + "'");
    }
    return v;
}

}  // namespace

GridSamples parse_grid_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw std::runtime_error("line 1: empty grid file");
    ++line_no;
    const auto header = split_csv(trim(line));
    if (header != std::vector<std::string>{"x", "y", "wx", "wy"}) {
        throw std::runtime_error("line 1: expected header 'x,y,wx,wy'");
    }

    struct Row {
        double x, y, wx, wy;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(trim(line));
        if (cells.size() != 4) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 4 columns");
        }
        rows.push_back({parse_double(cells[0], line_no), parse_double(cells[1], line_no),
                        parse_double(cells[2], line_no), parse_double(cells[3], line_no), line_no});
    }
    if (rows.empty()) throw std::runtime_error("grid file has no samples");

    GridSamples grid;
    for (const auto& r : rows) {
        if (r.x != rows.front().x) break;
        grid.ys.push_back(r.y);
    }
    const std::size_t ny = grid.ys.size();
    if (rows.size() % ny != 0) {
        throw std::runtime_error("grid is not rectangular: " + std::to_string(rows.size()) +
                                 " rows with " + std::to_string(ny) + " y values");
    }
    const std::size_t nx = rows.size() / ny;
    if (nx < 2 || ny < 2) throw std::runtime_error("grid needs at least 2 x 2 samples");

    for (std::size_t ix = 0; ix < nx; ++ix) {
        const Row& first = rows[ix * ny];
        if (ix > 0 && !(first.x > grid.xs.back())) {
            throw std::runtime_error("line " + std::to_string(first.line) +
                                     ": x values must be strictly increasing");
        }
        grid.xs.push_back(first.x);
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const Row& r = rows[ix * ny + iy];
            if (r.x != first.x) {
                throw std::runtime_error("line " + std::to_string(r.line) +
                                         ": expected x = " + std::to_string(first.x));
            }
            if (r.y != grid.ys[iy]) {
                throw std::runtime_error("line " + std::to_string(r.line) +
                                         ": y values do not repeat the first column");
            }
            if (iy > 0 && !(grid.ys[iy] > grid.ys[iy - 1])) {
                throw std::runtime_error("line " + std::to_string(r.line) +
                                         ": y values must be strictly increasing");
            }
            grid.w.emplace_back(r.wx, r.wy);
        }
    }
    return grid;
}

GridSamples load_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file '" + path + "'");
    return parse_grid_csv(in);
}

void write_grid_csv(std::ostream& out, const GridSamples& grid) {
    out << "x,y,wx,wy\n" << std::setprecision(17);
    for (std::size_t ix = 0; ix < grid.xs.size(); ++ix) {
        for (std::size_t iy = 0; iy < grid.ys.size(); ++iy) {
            const auto& w = grid.w[ix * grid.ys.size() + iy];
            out << grid.xs[ix] << ',' << grid.ys[iy] << ',' << w.x() << ',' << w.y() << '\n';
        }
    }
}

// -----------------------------------------------------------------------------
// CongestionField
// -----------------------------------------------------------------------------

CongestionField::CongestionField(int dim, FieldFn field, JacobianFn jacobian,
                                 std::vector<Point> probes, std::string description)
    : dim_(dim),
      field_(std::move(field)),
      jacobian_(std::move(jacobian)),
      probes_(std::move(probes)),
      description_(std::move(description)) {
    if (dim_ < 1) throw DomainError("CongestionField: dimension must be positive");
    if (!field_) throw DomainError("CongestionField: empty field function");
}

CongestionField CongestionField::none(int dim) {
    return CongestionField(
        dim, [dim](const Point&) { return Vector::Zero(dim); },
        [dim](const Point&) { return Matrix::Zero(dim, dim); }, {Point::Zero(dim)}, "none");
}

CongestionField CongestionField::uniform(Vector w) {
    require_finite(w, "uniform congestion");
    const int n = static_cast<int>(w.size());
    std::ostringstream desc;
    desc << std::setprecision(17) << "uniform(";
    for (int i = 0; i < n; ++i) desc << (i ? "," : "") << w[i];
    desc << ')';
    return CongestionField(
        n, [w](const Point&) { return w; }, [n](const Point&) { return Matrix::Zero(n, n); },
        {Point::Zero(n)}, desc.str());
}

CongestionField CongestionField::vortex(Point center, double strength) {
    if (center.size() != 2) throw DomainError("vortex field is planar");
    require_finite(center, "vortex center");
    if (!std::isfinite(strength)) throw DomainError("non-finite vortex strength");
    const double cx = center[0], cy = center[1];

    auto field = [cx, cy, strength](const Point& x) {
        const double dx = x[0] - cx, dy = x[1] - cy;
        const double u = 2.0 * strength / (1.0 + dx * dx + dy * dy);
        Vector w(2);
        w << -u * dy, u * dx;
        return w;
    };
    auto jac = [cx, cy, strength](const Point& x) {
        const double dx = x[0] - cx, dy = x[1] - cy;
        const double s = 1.0 + dx * dx + dy * dy;
        const double u = 2.0 * strength / s;
        const double c = 4.0 * strength / (s * s);  // -du/dx_k = c d_k
        Matrix j(2, 2);
        j << c * dx * dy, -u + c * dy * dy,
             u - c * dx * dx, -c * dx * dy;
        return j;
    };

    std::vector<Point> probes{center};
    constexpr int kRing = 32;
    for (int i = 0; i < kRing; ++i) {
        const double th = 2.0 * std::numbers::pi * i / kRing;
        Point p(2);
        p << cx + std::cos(th), cy + std::sin(th);
        probes.push_back(p);
    }
    std::ostringstream desc;
    desc << std::setprecision(17) << "vortex(" << cx << ',' << cy << ',' << strength << ')';
    return CongestionField(2, field, jac, std::move(probes), desc.str());
}

CongestionField CongestionField::grid(GridSamples samples) {
    const std::size_t nx = samples.xs.size(), ny = samples.ys.size();
    if (nx < 2 || ny < 2 || samples.w.size() != nx * ny) {
        throw DomainError("grid field needs a full rectangle of at least 2 x 2 samples");
    }
    if (!std::is_sorted(samples.xs.begin(), samples.xs.end(), std::less_equal<>()) ||
        !std::is_sorted(samples.ys.begin(), samples.ys.end(), std::less_equal<>())) {
        throw DomainError("grid coordinates must be strictly increasing");
    }
    for (const auto& w : samples.w) {
        if (!w.allFinite()) throw DomainError("non-finite grid sample");
    }

    std::vector<Point> probes;
    probes.reserve(nx * ny);
    for (double x : samples.xs) {
        for (double y : samples.ys) probes.push_back(Eigen::Vector2d(x, y));
    }

    auto data = std::make_shared<const GridSamples>(std::move(samples));
    auto field = [data](const Point& p) -> Vector {
        const auto& xs = data->xs;
        const auto& ys = data->ys;
        const double x = p[0], y = p[1];
        if (!(x >= xs.front() && x <= xs.back() && y >= ys.front() && y <= ys.back())) {
            throw DomainError("point " + format_point(p) + " lies outside the congestion grid");
        }
        auto cell = [](const std::vector<double>& v, double t) {
            auto it = std::upper_bound(v.begin(), v.end(), t);
            auto i = static_cast<std::size_t>(std::distance(v.begin(), it));
            return std::clamp<std::size_t>(i, 1, v.size() - 1) - 1;
        };
        const std::size_t ix = cell(xs, x), iy = cell(ys, y);
        const std::size_t ny_ = ys.size();
        const double tx = (x - xs[ix]) / (xs[ix + 1] - xs[ix]);
        const double ty = (y - ys[iy]) / (ys[iy + 1] - ys[iy]);
        const auto& w00 = data->w[ix * ny_ + iy];
        const auto& w01 = data->w[ix * ny_ + iy + 1];
        const auto& w10 = data->w[(ix + 1) * ny_ + iy];
        const auto& w11 = data->w[(ix + 1) * ny_ + iy + 1];
        const Eigen::Vector2d w = (1 - tx) * (1 - ty) * w00 + (1 - tx) * ty * w01 +
                                  tx * (1 - ty) * w10 + tx * ty * w11;
        return w;
    };

    CongestionField f(2, field, {}, std::move(probes), "grid");
    f.bounds_ = std::pair<Point, Point>(Eigen::Vector2d(data->xs.front(), data->ys.front()),
                                        Eigen::Vector2d(data->xs.back(), data->ys.back()));
    return f;
}

namespace {

std::vector<double> parse_args(std::string_view body, std::string_view spec) {
    std::vector<double> out;
    std::string cell;
    std::istringstream is{std::string(body)};
    while (std::getline(is, cell, ',')) {
        const std::string t = trim(cell);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
            throw DomainError("invalid argument '" + t + "' in field spec '" + std::string(spec) + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

CongestionField CongestionField::parse(std::string_view spec) {
    const std::string s = trim(spec);
    if (s == "none") return none(2);
    const auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')') {
        throw DomainError("unknown congestion field spec '" + s + "'");
    }
    const std::string name = trim(std::string_view(s).substr(0, open));
    const auto args = parse_args(std::string_view(s).substr(open + 1, s.size() - open - 2), s);
    if (name == "uniform") {
        if (args.size() != 2) throw DomainError("uniform(wx,wy) takes 2 arguments");
        return uniform(Eigen::Vector2d(args[0], args[1]));
    }
    if (name == "vortex") {
        if (args.size() != 3) throw DomainError("vortex(cx,cy,strength) takes 3 arguments");
        return vortex(Eigen::Vector2d(args[0], args[1]), args[2]);
    }
    throw DomainError("unknown congestion field '" + name + "'");
}

Vector CongestionField::operator()(const Point& x) const {
    require_dim(x, dim_, "CongestionField");
    Vector w = field_(x);
    if (w.size() != dim_) throw DomainError("congestion field has wrong dimension");
    require_finite(w, "congestion value");
    return w;
}

Matrix CongestionField::jacobian(const Point& x) const {
    require_dim(x, dim_, "CongestionField");
    if (jacobian_) return jacobian_(x);
    const double h = fd_step(x);
    Matrix j(dim_, dim_);
    for (int k = 0; k < dim_; ++k) {
        Point xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        j.col(k) = ((*this)(xp) - (*this)(xm)) / (2.0 * h);
    }
    return j;
}

// -----------------------------------------------------------------------------
// RandersStructure
// -----------------------------------------------------------------------------

double beta_norm(const RandersCoefficients& c) {
    Eigen::LLT<Matrix> llt(c.a);
    if (llt.info() != Eigen::Success) throw DomainError("alpha metric is not positive-definite");
    return std::sqrt(std::max(0.0, c.b.dot(llt.solve(c.b))));
}

RandersStructure::RandersStructure(int dim, CoefficientFn coefficients, DerivativeFn derivatives)
    : dim_(dim), coefficients_(std::move(coefficients)), derivatives_(std::move(derivatives)) {
    if (dim_ < 1) throw DomainError("RandersStructure: dimension must be positive");
    if (!coefficients_) throw DomainError("RandersStructure: empty coefficient function");
}

RandersStructure RandersStructure::euclidean(int dim) {
    return constant(Matrix::Identity(dim, dim), Vector::Zero(dim));
}

RandersStructure RandersStructure::constant(Matrix a, Vector b) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n || b.size() != n || n == 0) throw DomainError("coefficient shape mismatch");
    RandersCoefficients c{a, b};
    require_finite(a, "alpha coefficients");
    require_finite(b, "beta coefficients");
    const double nb = beta_norm(c);
    if (!(nb < 1.0)) {
        std::ostringstream os;
        os << "Randers validity violated: ||b||_alpha = " << std::setprecision(17) << nb << " >= 1";
        throw DomainError(os.str());
    }
    return RandersStructure(
        n, [c](const Point&) { return c; },
        [n](const Point&) {
            return RandersDerivatives{std::vector<Matrix>(n, Matrix::Zero(n, n)),
                                      std::vector<Vector>(n, Vector::Zero(n))};
        });
}

RandersCoefficients RandersStructure::coefficients(const Point& x) const {
    require_dim(x, dim_, "RandersStructure");
    RandersCoefficients c = coefficients_(x);
    if (c.a.rows() != dim_ || c.a.cols() != dim_ || c.b.size() != dim_) {
        throw DomainError("Randers coefficients have wrong shape");
    }
    require_finite(c.a, "alpha coefficients");
    require_finite(c.b, "beta coefficients");
    if ((c.a - c.a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, c.a.norm())) {
        throw DomainError("alpha coefficients not symmetric at " + format_point(x));
    }
    const double nb = beta_norm(c);
    if (!(nb < 1.0)) {
        std::ostringstream os;
        os << "Randers validity violated at " << format_point(x)
           << ": ||b||_alpha = " << std::setprecision(17) << nb << " >= 1";
        throw DomainError(os.str());
    }
    return c;
}

RandersDerivatives RandersStructure::derivatives(const Point& x) const {
    require_dim(x, dim_, "RandersStructure");
    if (derivatives_) return derivatives_(x);
    const double h = fd_step(x);
    RandersDerivatives d;
    for (int k = 0; k < dim_; ++k) {
        Point xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const auto cp = coefficients(xp);
        const auto cm = coefficients(xm);
        d.da.push_back((cp.a - cm.a) / (2.0 * h));
        d.db.push_back((cp.b - cm.b) / (2.0 * h));
    }
    return d;
}

double RandersStructure::operator()(const Point& x, const Components& y) const {
    require_dim(y, dim_, "tangent components");
    require_finite(y, "tangent components");
    const auto c = coefficients(x);
    return std::sqrt(std::max(0.0, y.dot(c.a * y))) + c.b.dot(y);
}

double randers_eval(const RandersStructure& F, const Point& x, const Components& y) {
    return F(x, y);
}

double congestion_norm(const RiemannianField& g, const CongestionField& w, const Point& x) {
    return norm_g(g, x, w(x));
}

RandersStructure build_randers(const RiemannianField& g, const CongestionField& w,
                               const BuildOptions& options) {
    if (g.dim() != w.dim()) throw DomainError("metric and congestion field dimensions differ");
    const double margin = options.saturation_margin;
    if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("saturation margin must lie in [0,1)");

    struct Local {
        Matrix g;
        Vector w;
        double lambda;
    };
    auto local = [g, w, margin](const Point& x) {
        Local l{g(x), w(x), 0.0};
        const double n2 = l.w.dot(l.g * l.w);
        const double n = std::sqrt(std::max(0.0, n2));
        if (!(n < 1.0 - margin)) throw CongestionSaturation(x, n, margin);
        l.lambda = 1.0 - n2;
        return l;
    };

    auto coefficients = [local](const Point& x) {
        const Local l = local(x);
        return RandersCoefficients{l.g / (l.lambda * l.lambda), l.g * l.w / l.lambda};
    };

    RandersStructure::DerivativeFn derivatives;
    if (g.has_analytic_gradient() && w.has_analytic_jacobian()) {
        derivatives = [local, g, w](const Point& x) {
            const Local l = local(x);
            const auto dg = g.gradient(x);
            const Matrix dw = w.jacobian(x);
            const double lam = l.lambda;
            const Vector gw = l.g * l.w;
            RandersDerivatives d;
            for (int k = 0; k < g.dim(); ++k) {
                const Vector dwk = dw.col(k);
                const double dlam = -(l.w.dot(dg[k] * l.w) + 2.0 * gw.dot(dwk));
                d.da.push_back(dg[k] / (lam * lam) - 2.0 * l.g * dlam / (lam * lam * lam));
                d.db.push_back((dg[k] * l.w + l.g * dwk) / lam - gw * dlam / (lam * lam));
            }
            return d;
        };
    }

    RandersStructure F(g.dim(), coefficients, derivatives);
    for (const auto& p : w.probe_points()) (void)local(p);
    for (const auto& p : options.check_points) (void)local(p);
    return F;
}

// -----------------------------------------------------------------------------
// Fundamental tensor / validation
// -----------------------------------------------------------------------------

Matrix fundamental_tensor(const RandersStructure& F, const Point& x, const Components& y,
                          TensorMode mode, double relative_step) {
    require_finite(y, "tangent components");
    const double ny = y.norm();
    if (!(ny > 0.0)) throw DomainError("fundamental tensor undefined at y = 0");
    const int n = F.dim();

    if (mode == TensorMode::analytic) {
        const auto c = F.coefficients(x);
        const Vector ay = c.a * y;
        const double alpha = std::sqrt(y.dot(ay));
        const double f = alpha + c.b.dot(y);
        const Vector fy = ay / alpha + c.b;
        const Matrix fyy = (c.a - ay * ay.transpose() / (alpha * alpha)) / alpha;
        Matrix g = fy * fy.transpose() + f * fyy;
        return 0.5 * (g + g.transpose());
    }

    const double h = relative_step * ny;
    auto L = [&](const Components& v) {
        const double f = F(x, v);
        return 0.5 * f * f;
    };
    const double l0 = L(y);
    Matrix g(n, n);
    for (int i = 0; i < n; ++i) {
        Components yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        g(i, i) = (L(yp) - 2.0 * l0 + L(ym)) / (h * h);
        for (int j = i + 1; j < n; ++j) {
            Components pp = y, pm = y, mp = y, mm = y;
            pp[i] += h; pp[j] += h;
            pm[i] += h; pm[j] -= h;
            mp[i] -= h; mp[j] += h;
            mm[i] -= h; mm[j] -= h;
            g(i, j) = g(j, i) = (L(pp) - L(pm) - L(mp) + L(mm)) / (4.0 * h * h);
        }
    }
    return g;
}

std::size_t StructureReport::failures() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const SampleCheck& s) { return !s.passed(); }));
}

StructureReport validate_structure(const RandersStructure& F,
                                   std::span<const std::pair<Point, Components>> samples) {
    StructureReport report;
    report.samples.reserve(samples.size());
    for (const auto& [x, y] : samples) {
        SampleCheck s;
        s.x = x;
        s.y = y;
        try {
            (void)F.coefficients(x);
            s.valid = true;
            if (!(y.norm() > 0.0)) throw DomainError("zero tangent sample");

            s.value = F(x, y);
            s.positive = s.value > 0.0;

            double worst = 0.0;
            for (double lam : {0.5, 2.0, 10.0}) {
                const double scaled = F(x, Components(lam * y));
                worst = std::max(worst, std::abs(scaled - lam * s.value) / (lam * std::abs(s.value)));
            }
            s.homogeneity_error = worst;
            s.homogeneous = worst <= 1e-10;

            const Matrix g = fundamental_tensor(F, x, y);
            s.determinant = g.determinant();
            s.nondegenerate = std::isfinite(s.determinant) && s.determinant != 0.0;
            Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
            s.min_eigenvalue = eig.eigenvalues().minCoeff();
            s.positive_definite = s.min_eigenvalue > 0.0;

            if (!s.positive) s.message = "F(x,y) is not positive";
            else if (!s.homogeneous) s.message = "F fails positive homogeneity";
            else if (!s.nondegenerate) s.message = "fundamental tensor is singular";
            else if (!s.positive_definite) s.message = "fundamental tensor is not positive-definite";
        } catch (const DomainError& e) {
            s.message = e.what();
        }
        report.samples.push_back(std::move(s));
    }
    return report;
}

}  // namespace ftraffic
