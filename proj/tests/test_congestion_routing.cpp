#include "ftraffic/congestion_routing.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace ftraffic;
using Eigen::Vector2d;

namespace {

RoutingScenario scenario(CongestionField field, Point p, Point q) {
    RoutingScenario s;
    s.field = std::move(field);
    s.origin = std::move(p);
    s.destination = std::move(q);
    return s;
}

nlohmann::json load_doc(const std::string& name) {
    std::ifstream in(test_support::data_path(name));
    return nlohmann::json::parse(in);
}

/// Travel time of the straight chord p -> q through a uniform field over the
/// identity metric: |d| / lambda + w.d / lambda, lambda = 1 - |w|^2.
double uniform_chord_time(const Vector2d& w, const Vector2d& d) {
    const double lambda = 1.0 - w.squaredNorm();
    return d.norm() / lambda + w.dot(d) / lambda;
}

}  // namespace

TEST_CASE("validity box") {
    const auto [lo, hi] = validity_box(Vector2d(0, 0), Vector2d(2, 0));
    CHECK((lo - Vector2d(-1, -1)).norm() == 0.0);
    CHECK((hi - Vector2d(3, 1)).norm() == 0.0);
    const auto [lo2, hi2] = validity_box(Vector2d(1, 3), Vector2d(-2, -1));
    CHECK((lo2 - Vector2d(-4.5, -3.5)).norm() < 1e-15);
    CHECK((hi2 - Vector2d(3.5, 5.5)).norm() < 1e-15);
}

TEST_CASE("zero field reproduces the straight segment") {
    const auto r = route(scenario(CongestionField::none(2), Vector2d(0, 0), Vector2d(1, 0)));
    REQUIRE(r.converged);
    CHECK(std::abs(r.travel_time - 1.0) <= 1e-6);
    CHECK(r.curve.sup_distance(Curve::straight(Vector2d(0, 0), Vector2d(1, 0), r.curve.size())) <= 1e-6);
    CHECK(r.chord_time == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int k = 0; k < 5; ++k) {
        const Vector2d p(u(rng), u(rng)), q(u(rng), u(rng));
        const auto rr = route(scenario(CongestionField::none(2), p, q));
        REQUIRE(rr.converged);
        CHECK(std::abs(rr.travel_time - (q - p).norm()) <= 1e-6);
        CHECK(rr.curve.sup_distance(Curve::straight(p, q, rr.curve.size())) <= 1e-6);
    }
}

TEST_CASE("uniform field: the two directions match the analytic chord times") {
    const Vector2d w(0.5, 0);
    const auto east = route(scenario(CongestionField::uniform(w), Vector2d(0, 0), Vector2d(1, 0)));
    const auto west = route(scenario(CongestionField::uniform(w), Vector2d(0, 0), Vector2d(-1, 0)));
    REQUIRE(east.converged);
    REQUIRE(west.converged);
    CHECK(std::abs(east.travel_time - uniform_chord_time(w, Vector2d(1, 0))) <= 1e-8);
    CHECK(std::abs(west.travel_time - uniform_chord_time(w, Vector2d(-1, 0))) <= 1e-8);
    CHECK(east.travel_time == doctest::Approx(2.0));
    CHECK(west.travel_time == doctest::Approx(2.0 / 3.0));
    // Along w the drift term b.y is positive, against it negative.
    CHECK(east.travel_time > west.travel_time);

    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-1, 1), m(0.1, 0.8);
    for (int k = 0; k < 5; ++k) {
        const double ang = M_PI * u(rng);
        const Vector2d wk = m(rng) * Vector2d(std::cos(ang), std::sin(ang));
        const Vector2d q(2 * u(rng), 2 * u(rng));
        const auto r = route(scenario(CongestionField::uniform(wk), Vector2d(0, 0), q));
        REQUIRE(r.converged);
        CHECK(std::abs(r.travel_time - uniform_chord_time(wk, q)) <= 1e-8 * std::max(1.0, r.travel_time));
    }
}

TEST_CASE("vortex route beats the chord") {
    const auto s = scenario_from_json(load_doc("route_vortex.json"), FTRAFFIC_DATA_DIR);
    const auto r = route(s);
    REQUIRE(r.converged);
    CHECK(r.endpoint_error <= s.bvp.tolerance);
    CHECK(r.travel_time <= r.chord_time + 1e-8);
    CHECK(r.travel_time < r.chord_time);
    // The route leaves the chord to go around the core.
    double off = 0.0;
    for (const auto& x : r.curve.points()) off = std::max(off, std::abs(x[1]));
    CHECK(off > 0.1);
}

TEST_CASE("corpus scenarios satisfy dominance") {
    for (const char* name : {"route_zero.json", "route_uniform_east.json", "route_uniform_west.json",
                             "route_vortex.json", "route_grid.json"}) {
        INFO(name);
        const auto r = route(scenario_from_json(load_doc(name), FTRAFFIC_DATA_DIR));
        REQUIRE(r.converged);
        CHECK(r.travel_time <= r.chord_time + 1e-8);
    }
}

TEST_CASE("routing is deterministic") {
    const auto s = scenario_from_json(load_doc("route_vortex.json"), FTRAFFIC_DATA_DIR);
    const auto a = route(s);
    const auto b = route(s);
    std::ostringstream ca, cb;
    write_curve_csv(ca, a.curve);
    write_curve_csv(cb, b.curve);
    CHECK(ca.str() == cb.str());
    CHECK(route_summary_json(a) == route_summary_json(b));
}

TEST_CASE("route summary fields") {
    const auto r = route(scenario(CongestionField::none(2), Vector2d(0, 0), Vector2d(0, 2)));
    const auto j = route_summary_json(r);
    CHECK(j.at("converged").get<bool>());
    CHECK(j.at("travel_time").get<double>() == r.travel_time);
    CHECK(j.at("restarts").get<int>() == r.restarts);
    CHECK(j.contains("chord_time"));
    CHECK(j.contains("endpoint_error"));
}

TEST_CASE("scenario errors") {
    CHECK_THROWS_AS((void)route(scenario(CongestionField::none(2), Vector2d(1, 1), Vector2d(1, 1))), DomainError);
    CHECK_THROWS_AS((void)route(scenario(CongestionField::uniform(Vector2d(0.9995, 0)), Vector2d(0, 0),
                                         Vector2d(1, 0))),
                    CongestionSaturation);
    // Saturation away from the chord but inside the validity box is still caught.
    const CongestionField ridge(2, [](const Point& x) -> Vector { return Vector2d(0, x[1] > 0.4 ? 0.9999 : 0.0); });
    CHECK_THROWS_AS((void)route(scenario(ridge, Vector2d(0, 0), Vector2d(1, 0))), CongestionSaturation);

    // The bundled grid spans [-3, 3]^2; this pair's box reaches past it.
    auto grid_doc = load_doc("route_grid.json");
    grid_doc["q"] = {2.8, 0.5};
    const auto far = scenario_from_json(grid_doc, FTRAFFIC_DATA_DIR);
    CHECK_THROWS_AS((void)route(far), DomainError);

    auto doc = load_doc("route_vortex.json");
    auto extra = doc;
    extra["speed"] = 1;
    CHECK_THROWS_AS((void)scenario_from_json(extra), InputError);
    auto no_q = doc;
    no_q.erase("q");
    CHECK_THROWS_AS((void)scenario_from_json(no_q), InputError);
    auto bad_point = doc;
    bad_point["p"] = {1, 2, 3};
    CHECK_THROWS_AS((void)scenario_from_json(bad_point), InputError);
    auto bad_field = doc;
    bad_field["field"] = "tornado(1)";
    CHECK_THROWS_AS((void)scenario_from_json(bad_field), InputError);
    auto missing_grid = doc;
    missing_grid["field"] = {{"grid_csv", "no_such_file.csv"}};
    CHECK_THROWS_AS((void)scenario_from_json(missing_grid, FTRAFFIC_DATA_DIR), InputError);
    CHECK_THROWS_AS((void)base_metric_from_json(nlohmann::json{{"matrix", {{1, 2}, {3, 4}}}}), InputError);
    CHECK_THROWS_AS((void)base_metric_from_json("spherical"), InputError);
}

TEST_CASE("scenario json settings") {
    nlohmann::json doc = {{"base_metric", {{"matrix", {{2, 0}, {0, 1}}}}},
                          {"field", "none"},
                          {"p", {0, 0}},
                          {"q", {1, 0}},
                          {"tolerances", {{"bvp", 1e-9}, {"saturation_margin", 0.01}}},
                          {"nodes", 120},
                          {"max_restarts", 3},
                          {"seed", 5}};
    const auto s = scenario_from_json(doc);
    CHECK(s.bvp.tolerance == 1e-9);
    CHECK(s.saturation_margin == 0.01);
    CHECK(s.bvp.nodes == 120);
    CHECK(s.bvp.max_restarts == 3);
    CHECK(s.bvp.seed == 5);
    const auto r = route(s);
    REQUIRE(r.converged);
    CHECK(r.curve.size() == 120);
    // Constant metric diag(2, 1): the east chord has length sqrt 2.
    CHECK(r.travel_time == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}
