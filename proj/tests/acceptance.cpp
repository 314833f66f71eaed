// Acceptance run: one PASS/FAIL line per criterion, each at its stated
// tolerance and runtime budget. Exits nonzero if any criterion fails.

#include "ftraffic/cli_io.hpp"
#include "ftraffic/congestion_routing.hpp"
#include "ftraffic/dynamic_equilibrium.hpp"
#include "ftraffic/traffic_equilibrium.hpp"
#include "support.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace ftraffic;
using Eigen::Vector2d;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

// ---------------------------------------------------------------------------

Outcome fb_equivalence() {
    Outcome out;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-10, 10);
    std::uniform_int_distribution<int> sign(0, 1);
    int mismatches = 0;
    const int samples = 100000;
    for (int k = 0; k < samples; ++k) {
        double a = u(rng), b = u(rng);
        // Thirds: uniform pairs, pairs on an axis, pairs a hair off an axis.
        if (k % 3 != 0) {
            const double off = k % 3 == 2 ? (sign(rng) ? 1e-13 : -1e-13) : 0.0;
            (sign(rng) ? a : b) = off;
        }
        const bool zero = std::abs(fb_phi(a, b)) <= 1e-12;
        const bool comp = a >= -1e-10 && b >= -1e-10 && std::abs(a * b) <= 1e-10;
        mismatches += zero != comp;
    }
    out.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    out.detail = out.pass ? "100000 pairs agree" : out.detail;
    return out;
}

Outcome ncp_oracle() {
    Outcome out;
    std::mt19937_64 rng(102);
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_real_distribution<double> u(-2, 2);
    int converged = 0;
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const int n = dim(rng);
        const Matrix M = test_support::random_spd(n, 0.05, rng);
        Vector q(n);
        for (int i = 0; i < n; ++i) q[i] = u(rng);
        const auto oracle = test_support::lcp_by_enumeration(M, q);
        if (!oracle) {
            out.require(false, "oracle found no solution");
            continue;
        }
        const auto r = solve_ncp(test_support::affine_problem(M, q));
        converged += r.converged();
        worst = std::max(worst, (r.x_star - *oracle).lpNorm<Eigen::Infinity>());
    }
    out.require(converged == 200, std::to_string(converged) + "/200 converged");
    out.require(worst <= 1e-6, "max |x - oracle| = " + fmt(worst));
    if (out.pass) out.detail = "200/200 converged, max |x - oracle| = " + fmt(worst);
    return out;
}

Outcome merit_gradient_check() {
    Outcome out;
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> u(-2, 2);
    int checked = 0;
    double worst = 0.0;
    while (checked < 100) {
        const int n = 1 + checked % 6;
        const Matrix M = test_support::random_spd(n, 0.1, rng);
        Vector q(n), x(n);
        for (int i = 0; i < n; ++i) {
            q[i] = u(rng);
            x[i] = u(rng);
        }
        NcpProblem P = test_support::affine_problem(M, q);
        P.F = [M, q](const Vector& z) -> Vector { return M * z + q + 0.1 * z.array().cube().matrix(); };
        P.jacobian = [M](const Vector& z) -> Matrix {
            return M + Matrix((0.3 * z.array().square()).matrix().asDiagonal());
        };
        const Vector Fx = evaluate_map(P, x);
        bool smooth = true;
        for (int i = 0; i < n; ++i) smooth = smooth && std::hypot(x[i], Fx[i]) > 0.1;
        if (!smooth) continue;
        const Vector g = merit_gradient(x, P);
        const Vector fd = test_support::fd_gradient([&](const Vector& z) { return merit(z, P); }, x);
        worst = std::max(worst, (g - fd).norm() / std::max(1e-12, fd.norm()));
        ++checked;
    }
    out.require(worst <= 1e-5, "max relative error " + fmt(worst));
    if (out.pass) out.detail = "100 points, max relative error " + fmt(worst);
    return out;
}

TrafficNetwork load_network(const std::string& name) {
    std::ifstream in(test_support::data_path(name));
    return network_from_json(nlohmann::json::parse(in));
}

Outcome wardrop_closed_forms() {
    Outcome out;
    const auto two = load_network("two_route.json");
    const auto s2 = solve_ue(two);
    out.require(s2.report.converged(), "two-route solve did not converge");
    out.require(std::abs(s2.h[0] - 2.0) <= 1e-6 && std::abs(s2.h[1] - 1.0) <= 1e-6, "two-route flows off");
    out.require(std::abs(s2.pi[0] - 3.0) <= 1e-6, "two-route pi off");
    Vector x2(3);
    x2 << s2.h, s2.pi;
    const double g2 = gap_value(two, x2);
    out.require(g2 <= 1e-10, "two-route gap " + fmt(g2));

    const auto el = load_network("elastic_single.json");
    const auto se = solve_ue(el);
    out.require(se.report.converged(), "elastic solve did not converge");
    out.require(std::abs(se.h[0] - 1.5) <= 1e-6, "elastic flow off");
    out.require(std::abs(se.pi[0] - 2.5) <= 1e-6, "elastic pi off");
    Vector xe(2);
    xe << se.h, se.pi;
    const double ge = gap_value(el, xe);
    out.require(ge <= 1e-10, "elastic gap " + fmt(ge));
    if (out.pass) out.detail = "h = (2, 1), pi = 3; h = 1.5, pi = 2.5; gaps " + fmt(g2) + ", " + fmt(ge);
    return out;
}

Outcome finsler_validity() {
    Outcome out;
    std::mt19937_64 rng(105);
    std::uniform_real_distribution<double> u(-2, 2), ang(0, 2 * M_PI), len(0.1, 10);
    double worst_hom = 0.0, worst_fd = 0.0;
    std::size_t failures = 0;
    for (int s = 0; s < 20; ++s) {
        const auto rs = test_support::random_randers(rng);
        std::vector<std::pair<Point, Components>> samples;
        for (int k = 0; k < 50; ++k) {
            const double t = ang(rng);
            samples.emplace_back(Vector2d(u(rng), u(rng)), len(rng) * Vector2d(std::cos(t), std::sin(t)));
        }
        const auto report = validate_structure(rs.F, samples);
        failures += report.failures();
        for (const auto& c : report.samples) worst_hom = std::max(worst_hom, c.homogeneity_error);
        for (const auto& [x, y] : samples) {
            const Matrix A = fundamental_tensor(rs.F, x, y, TensorMode::analytic);
            const Matrix D = fundamental_tensor(rs.F, x, y, TensorMode::finite_difference);
            worst_fd = std::max(worst_fd, (A - D).norm() / A.norm());
        }
    }
    out.require(failures == 0, std::to_string(failures) + " samples failed validity");
    out.require(worst_hom <= 1e-10, "homogeneity error " + fmt(worst_hom));
    out.require(worst_fd <= 1e-6, "tensor FD error " + fmt(worst_fd));
    if (out.pass) {
        out.detail = "1000 samples, homogeneity " + fmt(worst_hom) + ", tensor FD " + fmt(worst_fd);
    }
    return out;
}

Outcome geodesic_suite() {
    Outcome out;
    std::mt19937_64 rng(106);
    std::uniform_real_distribution<double> u(-2, 2);

    const auto E = RandersStructure::euclidean(2);
    double chord_err = 0.0;
    for (int k = 0; k < 10; ++k) {
        const Vector2d p(u(rng), u(rng)), q(u(rng), u(rng));
        const auto r = geodesic_bvp(E, p, q);
        out.require(r.converged, "Euclidean BVP did not converge");
        chord_err = std::max(chord_err, r.curve.sup_distance(Curve::straight(p, q, r.curve.size())));
    }
    out.require(chord_err <= 1e-6, "chord sup error " + fmt(chord_err));

    double speed = 0.0;
    for (int s = 0; s < 10; ++s) {
        const auto rs = test_support::random_randers(rng);
        for (int k = 0; k < 5; ++k) {
            const Curve c = geodesic_ivp(rs.F, {Vector2d(u(rng), u(rng)), Vector2d(u(rng), u(rng)), 1.0, 199});
            const double f0 = rs.F(c.points()[0], c.velocities()[0]);
            for (std::size_t i = 0; i < c.size(); ++i) {
                speed = std::max(speed, std::abs(rs.F(c.points()[i], c.velocities()[i]) - f0) / f0);
            }
        }
    }
    out.require(speed <= 1e-6, "speed variation " + fmt(speed));

    // Straight line x = 1 in polar coordinates; exact end r = sqrt 2, theta = pi/4.
    const auto polar = build_randers(test_support::polar_euclidean(), CongestionField::none(2));
    const Vector2d exact(std::sqrt(2.0), M_PI / 4);
    double min_order = 1e9, prev = 0.0;
    for (std::size_t steps : {10, 20, 40, 80}) {
        const double err = (geodesic_ivp(polar, {Vector2d(1, 0), Vector2d(0, 1), 1.0, steps}).back() - exact).norm();
        if (prev > 0.0) min_order = std::min(min_order, std::log2(prev / err));
        prev = err;
    }
    out.require(min_order >= 3.5, "IVP order " + fmt(min_order));

    std::uniform_real_distribution<double> turn(0, 2 * M_PI), mag(0.01, 0.1);
    int beaten = 0, total = 0;
    const std::vector<std::tuple<RandersStructure, Point, Point>> cases = {
        {build_randers(RiemannianField::euclidean(2), CongestionField::vortex(Vector2d(0, 0.3), 0.6)),
         Vector2d(-2, 0), Vector2d(2, 0)},
        {test_support::random_randers(rng).F, Vector2d(-1, -0.5), Vector2d(1, 0.7)},
        {test_support::random_randers(rng).F, Vector2d(0.5, -1), Vector2d(-0.5, 1.2)},
    };
    for (const auto& [F, p, q] : cases) {
        const auto r = geodesic_bvp(F, p, q);
        out.require(r.converged, "BVP did not converge");
        const double len = curve_length(F, r.curve);
        for (int k = 0; k < 50; ++k) {
            const double a = turn(rng);
            const Vector delta = mag(rng) * (q - p).norm() * Vector2d(std::cos(a), std::sin(a));
            beaten += curve_length(F, test_support::bump(r.curve, delta)) > len;
            ++total;
        }
    }
    out.require(beaten == total, std::to_string(total - beaten) + " perturbations were shorter");
    if (out.pass) {
        out.detail = "chord " + fmt(chord_err) + ", speed " + fmt(speed) + ", IVP order " + fmt(min_order) + ", " +
                     std::to_string(beaten) + "/" + std::to_string(total) + " perturbations longer";
    }
    return out;
}

Outcome congestion_routing() {
    Outcome out;
    RoutingScenario zero;
    zero.destination = Vector2d(1, 0);
    const auto z = route(zero);
    const double zerr = std::max(std::abs(z.travel_time - 1.0),
                                 z.curve.sup_distance(Curve::straight(Vector2d(0, 0), Vector2d(1, 0), z.curve.size())));
    out.require(z.converged && zerr <= 1e-6, "zero field error " + fmt(zerr));

    // Uniform w over the identity metric: chord time (|d| + w.d) / (1 - |w|^2).
    const Vector2d w(0.5, 0);
    double uerr = 0.0;
    for (const Vector2d& q : {Vector2d(1, 0), Vector2d(-1, 0)}) {
        RoutingScenario s;
        s.field = CongestionField::uniform(w);
        s.destination = q;
        const auto r = route(s);
        out.require(r.converged, "uniform route did not converge");
        const double analytic = (q.norm() + w.dot(q)) / (1.0 - w.squaredNorm());
        uerr = std::max(uerr, std::abs(r.travel_time - analytic));
    }
    out.require(uerr <= 1e-8, "uniform asymmetry error " + fmt(uerr));

    std::ifstream in(test_support::data_path("route_vortex.json"));
    const auto v = route(scenario_from_json(nlohmann::json::parse(in), FTRAFFIC_DATA_DIR));
    out.require(v.converged, "vortex route did not converge");
    out.require(v.travel_time <= v.chord_time, "vortex route slower than chord");
    if (out.pass) {
        out.detail = "zero " + fmt(zerr) + ", uniform " + fmt(uerr) + ", vortex " + fmt(v.travel_time) + " vs chord " +
                     fmt(v.chord_time);
    }
    return out;
}

Outcome dynamic_functional() {
    Outcome out;
    const double root = std::sqrt(2.0) - 2.0;
    auto sampled = [](std::size_t nodes, int power) {
        Trajectory t;
        t.t = uniform_grid(0, 1, nodes);
        for (double s : t.t) {
            t.h.push_back(std::pow(s, power));
            t.c.push_back(std::pow(s, power));
        }
        return t;
    };
    DynamicConfig half;
    half.variant = IntegrandVariant::half_phi;
    const auto lin = sampled(1000, 1);
    const double e1 = std::abs(dynamic_gap(lin, half) - root / 4.0);
    const double e2 = std::abs(dynamic_gap(lin) - root * root / 6.0);
    out.require(e1 <= 1e-5 && e2 <= 1e-5, "closed forms off by " + fmt(std::max(e1, e2)));

    double min_order = 1e9, prev = 0.0;
    for (std::size_t nodes : {26, 51, 101, 201, 401}) {
        const double err = std::abs(dynamic_gap(sampled(nodes, 2)) - root * root / 6.0);
        if (prev > 0.0) min_order = std::min(min_order, std::log2(prev / err));
        prev = err;
    }
    out.require(min_order >= 1.8, "quadrature order " + fmt(min_order));

    const auto r = minimize_dynamic(CostModel::parse("identity"), uniform_grid(0, 1, 50), {}, std::vector<double>(50, 1.0));
    const double max_h = *std::max_element(r.trajectory.h.begin(), r.trajectory.h.end());
    out.require(max_h <= 1e-3, "minimizer max h = " + fmt(max_h) + " (status " + to_string(r.status) +
                                   ", objective " + fmt(r.objective) + ")");
    if (out.pass) out.detail = "closed forms within 1e-5, order " + fmt(min_order) + ", max h " + fmt(max_h);
    return out;
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& out) {
    const std::string cmd = std::string("\"") + FTRAFFIC_CLI + "\" " + args + " --out \"" + out.string() +
                            "\" > \"" + (out / "stdout.txt").string() + "\" 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome cli_contract() {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / ("ftraffic_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    int run = 0;
    auto dir = [&] {
        const fs::path d = root / std::to_string(run++);
        fs::create_directories(d);
        return d;
    };
    auto data = [](const char* n) { return test_support::data_path(n); };

    const std::vector<std::pair<std::string, int>> matrix = {
        {"solve-ncp " + data("ncp_affine.json"), 0},
        {"solve-ncp " + data("ncp_no_solution.json"), 2},
        {"solve-ncp " + data("ncp_missing_q.json"), 1},
        {"solve-ue " + data("two_route.json"), 0},
        {"solve-ue " + data("two_route.json") + " --demand-block per_route", 0},
        {"solve-ue " + data("elastic_single.json"), 0},
        {"solve-ue " + data("repeated_node.json"), 1},
        {"route " + data("route_zero.json"), 0},
        {"route " + data("route_uniform_east.json") + " --svg", 0},
        {"route " + data("route_saturated.json"), 2},
        {"dynamic " + data("trajectory_linear.csv"), 0},
        {"dynamic " + data("trajectory_linear.csv") + " --variant nope", 1},
        {"validate " + data("two_route.json"), 0},
        {"validate " + data("repeated_node.json"), 1},
        {"validate " + data("field_saturated.json"), 1},
        {"--config " + data("run_two_route.json"), 0},
        {"bogus-command", 1},
    };
    int matched = 0;
    for (const auto& [args, expected] : matrix) {
        const int code = run_cli(args, dir());
        matched += code == expected;
        out.require(code == expected, "'" + args.substr(0, args.find(' ')) + "' exited " + std::to_string(code) +
                                          " not " + std::to_string(expected));
    }

    try {
        const fs::path ncp = dir();
        run_cli("solve-ncp " + data("ncp_affine.json"), ncp);
        const auto sol = load_json_file(ncp / "solution.json");
        out.require(std::abs(sol.at("x")[0].get<double>() - 2.0) <= 1e-8, "solution.json x");

        const fs::path ue = dir();
        run_cli("solve-ue " + data("two_route.json"), ue);
        std::ifstream flows(ue / "flows.csv"), times(ue / "times.csv");
        const auto h = read_csv_table(flows).numbers("flow");
        const auto pi = read_csv_table(times).numbers("time");
        out.require(std::abs(h[0] - 2.0) <= 1e-6 && std::abs(h[1] - 1.0) <= 1e-6 && std::abs(pi[0] - 3.0) <= 1e-6,
                    "flows/times csv");
        (void)load_json_file(ue / "residuals.json");

        const fs::path rt = dir();
        run_cli("route " + data("route_uniform_east.json"), rt);
        std::ifstream rc(rt / "route.csv");
        const Curve c = read_curve_csv(rc);
        const auto summary = load_json_file(rt / "route_summary.json");
        out.require((c.back() - Vector2d(1, 0)).norm() <= 1e-6, "route.csv endpoint");
        out.require(std::abs(summary.at("travel_time").get<double>() - 2.0) <= 1e-8, "route_summary travel_time");

        const fs::path dy = dir();
        run_cli("dynamic " + data("dynamic_minimize.json") + " --minimize", dy);
        std::ifstream tc(dy / "trajectory.csv");
        const Trajectory traj = read_trajectory_csv(tc);
        const auto dj = load_json_file(dy / "dynamic.json");
        out.require(dynamic_gap(traj) == dj.at("objective").get<double>() ||
                        std::abs(dynamic_gap(traj) / dj.at("objective").get<double>() - 1.0) <= 1e-12,
                    "trajectory.csv re-evaluation");

        const fs::path va = dir();
        run_cli("validate " + data("repeated_node.json"), va);
        out.require(!load_json_file(va / "validation.json").at("valid").get<bool>(), "validation.json");
    } catch (const std::exception& e) {
        out.require(false, std::string("round-trip threw: ") + e.what());
    }
    fs::remove_all(root);
    if (out.pass) out.detail = std::to_string(matched) + "/" + std::to_string(matrix.size()) +
                               " exit codes, all artifacts re-parse";
    return out;
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "FB equivalence suite", 1.0, fb_equivalence},
        {2, "NCP oracle suite", 10.0, ncp_oracle},
        {3, "merit gradient check", 5.0, merit_gradient_check},
        {4, "Wardrop closed forms", 1.0, wardrop_closed_forms},
        {5, "Finsler validity suite", 10.0, finsler_validity},
        {6, "geodesic suite", 60.0, geodesic_suite},
        {7, "congestion routing", 60.0, congestion_routing},
        {8, "dynamic functional", 30.0, dynamic_functional},
        {9, "CLI contract", 10.0, cli_contract},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("threw: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        o.require(secs < c.budget_s, "runtime " + fmt(secs) + " s over budget " + fmt(c.budget_s) + " s");
        failed += !o.pass;
        std::printf("criterion %d %-24s %s  %.2f s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
