#include "ftraffic/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace ftraffic {

namespace {

std::vector<Components> difference_velocities(const std::vector<double>& t,
                                              const std::vector<Point>& x) {
    const std::size_t n = t.size();
    std::vector<Components> v(n);
    if (n == 2) {
        v[0] = v[1] = (x[1] - x[0]) / (t[1] - t[0]);
        return v;
    }
    {
        const double h1 = t[1] - t[0], h2 = t[2] - t[1];
        v[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * x[0] + (h1 + h2) / (h1 * h2) * x[1] -
               h1 / (h2 * (h1 + h2)) * x[2];
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
        v[k] = -h2 / (h1 * (h1 + h2)) * x[k - 1] + (h2 - h1) / (h1 * h2) * x[k] +
               h1 / (h2 * (h1 + h2)) * x[k + 1];
    }
    {
        const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
        v[n - 1] = h2 / (h1 * (h1 + h2)) * x[n - 3] - (h1 + h2) / (h1 * h2) * x[n - 2] +
                   (2 * h2 + h1) / (h2 * (h1 + h2)) * x[n - 1];
    }
    return v;
}

}  // namespace

Curve::Curve(std::vector<double> params, std::vector<Point> points,
             std::vector<Components> velocities)
    : params_(std::move(params)), points_(std::move(points)), velocities_(std::move(velocities)) {
    if (params_.size() < 2) throw DomainError("curve needs at least 2 nodes");
    if (points_.size() != params_.size()) throw DomainError("curve params/points size mismatch");
    for (std::size_t k = 0; k < params_.size(); ++k) {
        if (!std::isfinite(params_[k])) throw DomainError("non-finite curve parameter");
        if (k > 0 && !(params_[k] > params_[k - 1])) {
            throw DomainError("curve parameter grid must be strictly increasing");
        }
        if (points_[k].size() != points_.front().size() || !points_[k].allFinite()) {
            throw DomainError("curve point " + std::to_string(k) + " is invalid");
        }
    }
    if (velocities_.empty()) {
        velocities_ = difference_velocities(params_, points_);
    } else if (velocities_.size() != points_.size()) {
        throw DomainError("curve velocities/points size mismatch");
    }
}

Curve Curve::straight(const Point& p, const Point& q, std::size_t nodes) {
    if (nodes < 2) throw DomainError("curve needs at least 2 nodes");
    std::vector<double> t(nodes);
    std::vector<Point> x(nodes);
    std::vector<Components> v(nodes, q - p);
    for (std::size_t k = 0; k < nodes; ++k) {
        t[k] = static_cast<double>(k) / static_cast<double>(nodes - 1);
        x[k] = p + t[k] * (q - p);
    }
    return Curve(std::move(t), std::move(x), std::move(v));
}

double Curve::sup_distance(const Curve& other) const {
    if (other.size() != size()) throw DomainError("sup_distance: curves differ in node count");
    double d = 0.0;
    for (std::size_t k = 0; k < size(); ++k) d = std::max(d, (points_[k] - other.points_[k]).norm());
    return d;
}

LagrangianTerms lagrangian_terms(const RandersStructure& F, const Point& x, const Components& y) {
    if (!y.allFinite()) throw DomainError("non-finite velocity");
    if (!(y.norm() > 0.0)) throw DomainError("L_yy is singular at zero velocity");
    const int n = F.dim();
    const auto c = F.coefficients(x);
    const auto d = F.derivatives(x);

    const Vector ay = c.a * y;
    const double alpha = std::sqrt(y.dot(ay));
    const double f = alpha + c.b.dot(y);
    const Vector fy = ay / alpha + c.b;
    const Matrix fyy = (c.a - ay * ay.transpose() / (alpha * alpha)) / alpha;

    LagrangianTerms t;
    t.F = f;
    t.y = f * fy;
    t.yy = fy * fy.transpose() + f * fyy;
    t.x.resize(n);
    t.yx.resize(n, n);
    for (int k = 0; k < n; ++k) {
        const Vector day = d.da[k] * y;
        const double ydy = y.dot(day);
        const double fx = ydy / (2.0 * alpha) + d.db[k].dot(y);
        const Vector fyx = day / alpha - ay * ydy / (2.0 * alpha * alpha * alpha) + d.db[k];
        t.x[k] = f * fx;
        t.yx.col(k) = fx * fy + f * fyx;
    }
    return t;
}

double curve_length(const RandersStructure& F, const Curve& c) {
    const auto& t = c.params();
    const auto& x = c.points();
    const auto& v = c.velocities();
    bool moving = false;
    std::vector<double> f(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (v[k].norm() > 0.0) moving = true;
        f[k] = F(x[k], v[k]);
    }
    if (!moving) throw DomainError("degenerate curve: zero velocity everywhere");
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < c.size(); ++k) sum += 0.5 * (t[k + 1] - t[k]) * (f[k] + f[k + 1]);
    return sum;
}

std::vector<Vector> el_residual(const RandersStructure& F, const Curve& c) {
    if (c.size() < 3) throw DomainError("el_residual needs at least 3 nodes");
    const auto& t = c.params();
    const auto& x = c.points();
    const auto& v = c.velocities();
    std::vector<Vector> out;
    out.reserve(c.size() - 2);
    for (std::size_t k = 1; k + 1 < c.size(); ++k) {
        const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
        const Vector acc = 2.0 * (x[k - 1] / (h1 * (h1 + h2)) - x[k] / (h1 * h2) +
                                  x[k + 1] / (h2 * (h1 + h2)));
        const auto L = lagrangian_terms(F, x[k], v[k]);
        out.push_back(L.yy * acc + L.yx * v[k] - L.x);
    }
    return out;
}

double max_el_residual(const RandersStructure& F, const Curve& c) {
    double m = 0.0;
    for (const auto& r : el_residual(F, c)) m = std::max(m, r.norm());
    return m;
}

namespace {

Vector acceleration(const RandersStructure& F, const Point& x, const Components& v) {
    const auto L = lagrangian_terms(F, x, v);
    Eigen::LLT<Matrix> llt(L.yy);
    if (llt.info() != Eigen::Success) throw DomainError("L_yy is not positive-definite");
    return llt.solve(L.x - L.yx * v);
}

}  // namespace

Curve geodesic_ivp(const RandersStructure& F, const GeodesicIvp& ivp) {
    if (ivp.steps < 2) throw DomainError("geodesic_ivp needs at least 2 steps");
    if (!(ivp.horizon > 0.0)) throw DomainError("geodesic_ivp horizon must be positive");
    if (ivp.x0.size() != F.dim() || ivp.y0.size() != F.dim()) {
        throw DomainError("geodesic_ivp: initial data dimension mismatch");
    }
    if (!(ivp.y0.norm() > 0.0)) throw DomainError("geodesic_ivp: initial velocity is zero");

    const double dt = ivp.horizon / static_cast<double>(ivp.steps);
    std::vector<double> t(ivp.steps + 1);
    std::vector<Point> xs(ivp.steps + 1);
    std::vector<Components> vs(ivp.steps + 1);
    Point x = ivp.x0;
    Components v = ivp.y0;
    t[0] = 0.0;
    xs[0] = x;
    vs[0] = v;
    for (std::size_t k = 0; k < ivp.steps; ++k) {
        const Vector a1 = acceleration(F, x, v);
        const Point x2 = x + 0.5 * dt * v;
        const Components v2 = v + 0.5 * dt * a1;
        const Vector a2 = acceleration(F, x2, v2);
        const Point x3 = x + 0.5 * dt * v2;
        const Components v3 = v + 0.5 * dt * a2;
        const Vector a3 = acceleration(F, x3, v3);
        const Point x4 = x + dt * v3;
        const Components v4 = v + dt * a3;
        const Vector a4 = acceleration(F, x4, v4);
        x += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
        v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        if (!x.allFinite() || !v.allFinite()) {
            throw DomainError("geodesic_ivp: non-finite state at step " + std::to_string(k + 1));
        }
        t[k + 1] = (k + 1 == ivp.steps) ? ivp.horizon : static_cast<double>(k + 1) * dt;
        xs[k + 1] = x;
        vs[k + 1] = v;
    }
    return Curve(std::move(t), std::move(xs), std::move(vs));
}

namespace {

struct ShootingAttempt {
    Components velocity;
    std::optional<Curve> curve;
    double error = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

class Shooter {
public:
    Shooter(const RandersStructure& F, const Point& p, const Point& q, const BvpConfig& cfg)
        : F_(F), p_(p), q_(q), cfg_(cfg) {}

    std::optional<Curve> shoot(const Components& v) const {
        if (!v.allFinite() || !(v.norm() > 0.0)) return std::nullopt;
        try {
            return geodesic_ivp(F_, {p_, v, 1.0, cfg_.nodes - 1});
        } catch (const DomainError&) {
            return std::nullopt;
        }
    }

    ShootingAttempt newton(Components v) const { return newton_to(q_, std::move(v)); }

    /// Newton toward targets moving along the chord from p to q, each solve
    /// seeding the next. Scaling an initial velocity by s traces the same
    /// geodesic to parameter s, which gives the next guess.
    ShootingAttempt continuation() const {
        ShootingAttempt last;
        double s = 0.0, ds = 0.125;
        Components v = q_ - p_;
        int iterations = 0;
        while (s < 1.0 && ds >= 1.0 / 1024.0) {
            const double next = std::min(1.0, s + ds);
            const Components guess = s == 0.0 ? Components(next * (q_ - p_)) : Components(v * (next / s));
            ShootingAttempt a = newton_to(p_ + next * (q_ - p_), guess);
            iterations += a.iterations;
            if (a.converged) {
                s = next;
                v = a.velocity;
                last = std::move(a);
                ds = std::min(0.5, 2.0 * ds);
            } else {
                if (next == 1.0 && (!last.curve || a.error < last.error)) last = std::move(a);
                ds *= 0.5;
            }
        }
        if (s < 1.0) last.converged = false;
        if (s < 1.0 && last.curve) last.error = (last.curve->back() - q_).norm();
        last.iterations = iterations;
        return last;
    }

    ShootingAttempt newton_to(const Point& target, Components v) const {
        ShootingAttempt best;
        auto c = shoot(v);
        if (!c) return best;
        best.velocity = v;
        best.curve = std::move(c);
        best.error = (best.curve->back() - target).norm();
        const int n = F_.dim();
        for (int it = 0; it < cfg_.max_newton; ++it) {
            if (best.error <= cfg_.tolerance) break;
            ++best.iterations;
            const Vector r = best.curve->back() - target;

            Matrix J(n, n);
            bool ok = true;
            for (int j = 0; j < n && ok; ++j) {
                const double h = 1e-6 * std::max(1.0, v.norm());
                Components vp = v, vm = v;
                vp[j] += h;
                vm[j] -= h;
                const auto cp = shoot(vp);
                const auto cm = shoot(vm);
                if (cp && cm) {
                    J.col(j) = (cp->back() - cm->back()) / (2.0 * h);
                } else if (cp) {
                    J.col(j) = (cp->back() - best.curve->back()) / h;
                } else {
                    ok = false;
                }
            }
            if (!ok) break;
            const Vector step = J.partialPivLu().solve(-r);
            if (!step.allFinite()) break;

            bool accepted = false;
            for (double s = 1.0; s >= 1e-6; s *= 0.5) {
                const Components trial = v + s * step;
                auto ct = shoot(trial);
                if (!ct) continue;
                const double e = (ct->back() - target).norm();
                if (e < best.error) {
                    v = trial;
                    best.velocity = v;
                    best.curve = std::move(ct);
                    best.error = e;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }
        best.converged = best.error <= cfg_.tolerance;
        return best;
    }

private:
    const RandersStructure& F_;
    const Point& p_;
    const Point& q_;
    const BvpConfig& cfg_;
};

}  // namespace

BvpResult geodesic_bvp(const RandersStructure& F, const Point& p, const Point& q,
                       const BvpConfig& config) {
    if (p.size() != F.dim() || q.size() != F.dim()) throw DomainError("geodesic_bvp: dimension mismatch");
    const double chord = (q - p).norm();
    if (!(chord > 0.0)) throw DomainError("geodesic_bvp: origin and destination coincide");
    if (config.nodes < 3) throw DomainError("geodesic_bvp: need at least 3 nodes");

    const Shooter shooter(F, p, q, config);
    std::vector<ShootingAttempt> attempts;
    attempts.push_back(shooter.newton(q - p));
    int total_iterations = attempts.back().iterations;
    if (!attempts.back().converged) {
        attempts.push_back(shooter.continuation());
        total_iterations += attempts.back().iterations;
    }

    int restarts = 0;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    while (restarts < config.max_restarts) {
        const bool any_converged = std::any_of(attempts.begin(), attempts.end(),
                                               [](const ShootingAttempt& a) { return a.converged; });
        if (any_converged && !config.explore_restarts) break;
        Components guess = q - p;
        for (Eigen::Index i = 0; i < guess.size(); ++i) {
            guess[i] += config.restart_spread * chord * normal(rng);
        }
        ++restarts;
        attempts.push_back(shooter.newton(guess));
        total_iterations += attempts.back().iterations;
    }

    BvpResult result;
    result.restarts = restarts;
    result.iterations = total_iterations;

    std::vector<std::pair<const ShootingAttempt*, double>> converged;
    for (const auto& a : attempts) {
        if (a.converged && a.curve) converged.emplace_back(&a, curve_length(F, *a.curve));
    }
    if (!converged.empty()) {
        std::vector<const Curve*> distinct;
        for (const auto& [a, len] : converged) {
            const bool seen = std::any_of(distinct.begin(), distinct.end(), [&](const Curve* c) {
                return c->sup_distance(*a->curve) <= 1e-4 * chord;
            });
            if (!seen) distinct.push_back(&*a->curve);
        }
        const auto best = std::min_element(converged.begin(), converged.end(),
                                           [](const auto& l, const auto& r) { return l.second < r.second; });
        result.curve = *best->first->curve;
        result.endpoint_error = best->first->error;
        result.converged = true;
        result.multiplicity = static_cast<int>(distinct.size());
        return result;
    }

    const ShootingAttempt* best = nullptr;
    for (const auto& a : attempts) {
        if (a.curve && (!best || a.error < best->error)) best = &a;
    }
    if (best) {
        result.curve = *best->curve;
        result.endpoint_error = best->error;
    } else {
        result.curve = Curve::straight(p, q, config.nodes);
        result.endpoint_error = std::numeric_limits<double>::infinity();
    }
    result.converged = false;
    return result;
}

void write_curve_csv(std::ostream& out, const Curve& c) {
    if (c.dim() != 2) throw DomainError("curve CSV export supports planar curves only");
    out << "t,x,y\n" << std::setprecision(17);
    for (std::size_t k = 0; k < c.size(); ++k) {
        out << c.params()[k] << ',' << c.points()[k][0] << ',' << c.points()[k][1] << '\n';
    }
}

Curve read_curve_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty curve file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,x,y") throw std::runtime_error("line 1: expected header 't,x,y'");
    std::vector<double> t;
    std::vector<Point> x;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::istringstream is(line);
        double a = 0, b = 0, c = 0;
        char s1 = 0, s2 = 0;
        if (!(is >> a >> s1 >> b >> s2 >> c) || s1 != ',' || s2 != ',') {
            throw std::runtime_error("line " + std::to_string(line_no) + ": malformed curve row");
        }
        t.push_back(a);
        x.push_back(Eigen::Vector2d(b, c));
    }
    return Curve(std::move(t), std::move(x));
}

void write_curve_svg(std::ostream& out, const Curve& c) {
    if (c.dim() != 2) throw DomainError("SVG export supports planar curves only");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& p : c.points()) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    const double pad = 0.05 * std::max({xmax - xmin, ymax - ymin, 1e-9});
    out << std::setprecision(10);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << xmin - pad << ' ' << ymin - pad
        << ' ' << (xmax - xmin) + 2 * pad << ' ' << (ymax - ymin) + 2 * pad << "\">\n";
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"" << pad / 5 << "\" points=\"";
    for (std::size_t k = 0; k < c.size(); ++k) {
        out << (k ? " " : "") << c.points()[k][0] << ',' << c.points()[k][1];
    }
    out << "\"/>\n</svg>\n";
}

}  // namespace ftraffic
