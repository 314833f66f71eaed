#include "ftraffic/dynamic_equilibrium.hpp"

#include "ftraffic/ncp_solver.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace ftraffic {

const char* to_string(IntegrandVariant v) noexcept {
    return v == IntegrandVariant::half_phi ? "half_phi" : "half_phi_squared";
}

IntegrandVariant parse_integrand_variant(std::string_view s) {
    if (s == "half_phi") return IntegrandVariant::half_phi;
    if (s == "half_phi_squared") return IntegrandVariant::half_phi_squared;
    throw InputError("unknown integrand variant '" + std::string(s) + "'");
}

const char* to_string(DynamicStatus s) noexcept {
    switch (s) {
        case DynamicStatus::converged: return "converged";
        case DynamicStatus::max_iter: return "max_iter";
        case DynamicStatus::stalled: return "stalled";
        case DynamicStatus::diverged: return "diverged";
    }
    return "max_iter";
}

double CostModel::operator()(double h, double /*t*/) const noexcept {
    switch (kind) {
        case Kind::zero: return 0.0;
        case Kind::identity: return h;
        case Kind::affine: return a * h + b;
    }
    return 0.0;
}

std::string CostModel::describe() const {
    switch (kind) {
        case Kind::zero: return "zero";
        case Kind::identity: return "identity";
        case Kind::affine: {
            std::ostringstream os;
            os << std::setprecision(17) << "affine(" << a << ',' << b << ')';
            return os.str();
        }
    }
    return "zero";
}

CostModel CostModel::parse(std::string_view spec) {
    std::string s;
    for (char ch : spec) {
        if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
    }
    if (s == "zero") return {};
    if (s == "identity") return {Kind::identity, 1.0, 0.0};
    if (s.rfind("affine(", 0) == 0 && s.back() == ')') {
        const std::string body = s.substr(7, s.size() - 8);
        const auto comma = body.find(',');
        if (comma != std::string::npos) {
            double a = 0, b = 0;
            const auto ra = std::from_chars(body.data(), body.data() + comma, a);
            const auto rb = std::from_chars(body.data() + comma + 1, body.data() + body.size(), b);
            if (ra.ec == std::errc() && ra.ptr == body.data() + comma && rb.ec == std::errc() &&
                rb.ptr == body.data() + body.size()) {
                return {Kind::affine, a, b};
            }
        }
    }
    throw InputError("unknown cost model '" + std::string(spec) + "'");
}

void Trajectory::validate() const {
    if (t.size() < 3) throw DomainError("trajectory needs at least 3 nodes");
    if (h.size() != t.size()) throw DomainError("trajectory t/h size mismatch");
    if (!c.empty() && c.size() != t.size()) throw DomainError("trajectory t/c size mismatch");
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k]) || !std::isfinite(h[k]) || (!c.empty() && !std::isfinite(c[k]))) {
            throw DomainError("non-finite trajectory value at node " + std::to_string(k));
        }
        if (k > 0 && !(t[k] > t[k - 1])) throw DomainError("degenerate grid: times must strictly increase");
    }
}

bool Trajectory::monotone() const noexcept {
    bool up = true, down = true;
    for (std::size_t k = 1; k < h.size(); ++k) {
        up = up && h[k] >= h[k - 1];
        down = down && h[k] <= h[k - 1];
    }
    return up || down;
}

std::vector<double> uniform_grid(double start, double end, std::size_t nodes) {
    if (nodes < 2 || !(end > start)) throw DomainError("uniform_grid: need end > start and >= 2 nodes");
    std::vector<double> t(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        t[k] = start + (end - start) * static_cast<double>(k) / static_cast<double>(nodes - 1);
    }
    t.back() = end;
    return t;
}

Trajectory with_costs(Trajectory traj, const CostModel& model) {
    traj.c.resize(traj.t.size());
    for (std::size_t k = 0; k < traj.t.size(); ++k) traj.c[k] = model(traj.h[k], traj.t[k]);
    return traj;
}

double dynamic_integrand(double h, double c, IntegrandVariant variant) noexcept {
    const double phi = fb_phi(h, c);
    return variant == IntegrandVariant::half_phi ? 0.5 * phi : 0.5 * phi * phi;
}

namespace {

/// dh/dt at node k: three-point central difference inside, second-order
/// one-sided at both ends. Handles non-uniform grids.
double flow_rate(const std::vector<double>& t, const std::vector<double>& h, std::size_t k) {
    const std::size_t n = t.size();
    if (k == 0) {
        const double h1 = t[1] - t[0], h2 = t[2] - t[1];
        return -(2 * h1 + h2) / (h1 * (h1 + h2)) * h[0] + (h1 + h2) / (h1 * h2) * h[1] -
               h1 / (h2 * (h1 + h2)) * h[2];
    }
    if (k == n - 1) {
        const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
        return h2 / (h1 * (h1 + h2)) * h[n - 3] - (h1 + h2) / (h1 * h2) * h[n - 2] +
               (2 * h2 + h1) / (h2 * (h1 + h2)) * h[n - 1];
    }
    const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
    return -h2 / (h1 * (h1 + h2)) * h[k - 1] + (h2 - h1) / (h1 * h2) * h[k] +
           h1 / (h2 * (h1 + h2)) * h[k + 1];
}

double trapezoid_weight(const std::vector<double>& t, std::size_t k) {
    const std::size_t n = t.size();
    if (k == 0) return 0.5 * (t[1] - t[0]);
    if (k == n - 1) return 0.5 * (t[n - 1] - t[n - 2]);
    return 0.5 * (t[k + 1] - t[k - 1]);
}

double node_term(const std::vector<double>& t, const std::vector<double>& h,
                 const std::vector<double>& c, const DynamicConfig& cfg, std::size_t k) {
    return trapezoid_weight(t, k) * dynamic_integrand(h[k], c[k] - cfg.pi_offset, cfg.variant) *
           flow_rate(t, h, k);
}

/// Nodes whose term depends on h[k].
std::pair<std::size_t, std::size_t> influence(std::size_t k, std::size_t n) {
    std::size_t lo = k >= 1 ? k - 1 : 0;
    std::size_t hi = std::min(n - 1, k + 1);
    if (k <= 2) lo = 0;
    if (k + 3 >= n) hi = n - 1;
    return {lo, hi};
}

}  // namespace

double dynamic_gap(const Trajectory& traj, const DynamicConfig& cfg) {
    traj.validate();
    if (!traj.has_costs()) throw DomainError("dynamic_gap needs sampled travel times");
    double sum = 0.0;
    for (std::size_t k = 0; k < traj.t.size(); ++k) sum += node_term(traj.t, traj.h, traj.c, cfg, k);
    return sum;
}

DynamicResult minimize_dynamic(const CostModel& model, const std::vector<double>& grid,
                               const DynamicConfig& cfg, const std::vector<double>& h0) {
    if (!(cfg.step > 0.0 && cfg.max_iter > 0 && cfg.tol > 0.0)) {
        throw DomainError("dynamic optimizer settings must be positive");
    }
    Trajectory traj{grid, h0, {}};
    for (double& v : traj.h) v = std::max(0.0, v);
    traj = with_costs(std::move(traj), model);
    traj.validate();
    const std::size_t n = grid.size();

    DynamicResult result;
    double objective = dynamic_gap(traj, cfg);
    result.history.push_back(objective);

    // Central difference of the objective in h[k]; only nearby terms change.
    auto partial = [&](std::size_t k) {
        const auto [lo, hi] = influence(k, n);
        const double hk = traj.h[k];
        const double step = 1e-6 * std::max(1.0, std::abs(hk));
        auto local = [&](double value) {
            traj.h[k] = value;
            traj.c[k] = model(value, traj.t[k]);
            double s = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) s += node_term(traj.t, traj.h, traj.c, cfg, j);
            return s;
        };
        // Forward difference near the bound so only feasible values are sampled.
        const double d = hk >= step ? (local(hk + step) - local(hk - step)) / (2.0 * step)
                                    : (local(hk + step) - local(hk)) / step;
        traj.h[k] = hk;
        traj.c[k] = model(hk, traj.t[k]);
        return d;
    };

    double step = cfg.step;
    result.status = DynamicStatus::max_iter;
    for (int it = 0; it < cfg.max_iter; ++it) {
        std::vector<double> grad(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if ((k == 0 && cfg.fix_start) || (k == n - 1 && cfg.fix_end)) continue;
            grad[k] = partial(k);
        }
        // Projected-gradient stationarity measure at unit step.
        double stationarity = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            stationarity = std::max(stationarity, std::abs(traj.h[k] - std::max(0.0, traj.h[k] - grad[k])));
        }
        if (stationarity <= cfg.tol) {
            result.status = DynamicStatus::converged;
            break;
        }

        bool accepted = false;
        while (step >= 1e-14) {
            Trajectory trial = traj;
            for (std::size_t k = 0; k < n; ++k) {
                trial.h[k] = std::max(0.0, traj.h[k] - step * grad[k]);
                trial.c[k] = model(trial.h[k], trial.t[k]);
            }
            const bool finite = std::all_of(trial.h.begin(), trial.h.end(), [](double v) { return std::isfinite(v); }) &&
                                std::all_of(trial.c.begin(), trial.c.end(), [](double v) { return std::isfinite(v); });
            const double value = finite ? dynamic_gap(trial, cfg) : objective;
            if (std::isfinite(value) && value < objective) {
                traj = std::move(trial);
                objective = value;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            result.status = DynamicStatus::stalled;
            break;
        }
        ++result.iterations;
        result.history.push_back(objective);
        if (*std::max_element(traj.h.begin(), traj.h.end()) > 1e100) {
            result.status = DynamicStatus::diverged;
            break;
        }
    }

    result.monotone = traj.monotone();
    result.objective = objective;
    result.trajectory = std::move(traj);
    return result;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << (traj.has_costs() ? "t,h,c\n" : "t,h\n") << std::setprecision(17);
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        out << traj.t[k] << ',' << traj.h[k];
        if (traj.has_costs()) out << ',' << traj.c[k];
        out << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("line 1: empty trajectory file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool costs = false;
    if (line == "t,h,c") costs = true;
    else if (line != "t,h") throw InputError("line 1: expected header 't,h' or 't,h,c'");

    Trajectory traj;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            double v = 0.0;
            const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || r.ec != std::errc() || r.ptr != cell.data() + cell.size()) {
                throw InputError("line " + std::to_string(line_no) + ": invalid number '" + cell + "'");
            }
            cells.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != (costs ? 3u : 2u)) {
            throw InputError("line " + std::to_string(line_no) + ": wrong number of columns");
        }
        traj.t.push_back(cells[0]);
        traj.h.push_back(cells[1]);
        if (costs) traj.c.push_back(cells[2]);
    }
    return traj;
}

}  // namespace ftraffic
