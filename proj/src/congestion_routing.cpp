#include "ftraffic/congestion_routing.hpp"

#include <algorithm>
#include <cmath>

namespace ftraffic {

using nlohmann::json;

std::pair<Point, Point> validity_box(const Point& p, const Point& q) {
    const double pad = 0.5 * (q - p).norm();
    Point lo = p.cwiseMin(q).array() - pad;
    Point hi = p.cwiseMax(q).array() + pad;
    return {lo, hi};
}

RouteResult route(const RoutingScenario& s) {
    if (s.origin.size() != 2 || s.destination.size() != 2) throw DomainError("routing is planar");
    if (!((s.destination - s.origin).norm() > 0.0)) {
        throw DomainError("origin and destination must differ");
    }
    if (s.validity_samples < 2) throw DomainError("validity_samples must be at least 2");

    const auto [lo, hi] = validity_box(s.origin, s.destination);
    if (const auto& b = s.field.bounds()) {
        if ((lo.array() < b->first.array()).any() || (hi.array() > b->second.array()).any()) {
            throw DomainError("congestion grid does not cover the box " + format_point(lo) + " - " +
                              format_point(hi));
        }
    }

    BuildOptions options;
    options.saturation_margin = s.saturation_margin;
    const int m = s.validity_samples;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const double u = static_cast<double>(i) / (m - 1), v = static_cast<double>(j) / (m - 1);
            options.check_points.push_back(
                Eigen::Vector2d(lo[0] + u * (hi[0] - lo[0]), lo[1] + v * (hi[1] - lo[1])));
        }
    }
    const RandersStructure F = build_randers(s.base, s.field, options);

    const BvpResult bvp = geodesic_bvp(F, s.origin, s.destination, s.bvp);
    RouteResult r;
    r.curve = bvp.curve;
    r.converged = bvp.converged;
    r.endpoint_error = bvp.endpoint_error;
    r.restarts = bvp.restarts;
    r.iterations = bvp.iterations;
    r.multiplicity = bvp.multiplicity;
    r.travel_time = curve_length(F, r.curve);
    r.chord_time = curve_length(F, Curve::straight(s.origin, s.destination, s.bvp.nodes));
    return r;
}

namespace {

Point point_of(const json& v, const char* what) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw InputError(std::string("scenario.") + what + ": expected [x, y]");
    }
    return Eigen::Vector2d(v[0].get<double>(), v[1].get<double>());
}

double positive_number(const json& v, const std::string& what) {
    if (!v.is_number() || !(v.get<double>() >= 0.0)) {
        throw InputError("scenario." + what + ": expected a non-negative number");
    }
    return v.get<double>();
}

}  // namespace

RiemannianField base_metric_from_json(const json& bm) {
    if (bm.is_string() && bm.get<std::string>() == "euclidean") return RiemannianField::euclidean(2);
    if (!(bm.is_object() && bm.size() == 1 && bm.contains("matrix"))) {
        throw InputError("base_metric: expected \"euclidean\" or {\"matrix\": [[..],[..]]}");
    }
    const json& m = bm["matrix"];
    Matrix g(2, 2);
    if (!m.is_array() || m.size() != 2) throw InputError("base_metric.matrix: expected 2x2");
    for (int i = 0; i < 2; ++i) {
        if (!m[i].is_array() || m[i].size() != 2) throw InputError("base_metric.matrix: expected 2x2");
        for (int j = 0; j < 2; ++j) {
            if (!m[i][j].is_number()) throw InputError("base_metric.matrix: expected numbers");
            g(i, j) = m[i][j].get<double>();
        }
    }
    try {
        return RiemannianField::constant(g);
    } catch (const DomainError& e) {
        throw InputError(std::string("base_metric: ") + e.what());
    }
}

CongestionField field_from_json(const json& f, const std::filesystem::path& base_dir) {
    if (f.is_string()) {
        try {
            return CongestionField::parse(f.get<std::string>());
        } catch (const DomainError& e) {
            throw InputError(std::string("field: ") + e.what());
        }
    }
    if (!(f.is_object() && f.size() == 1 && f.contains("grid_csv") && f["grid_csv"].is_string())) {
        throw InputError("field: expected a preset string or {\"grid_csv\": path}");
    }
    std::filesystem::path path = f["grid_csv"].get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    try {
        return CongestionField::grid(load_grid_csv(path.string()));
    } catch (const std::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

RoutingScenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw InputError("scenario: expected an object");
    static const char* known[] = {"base_metric", "field",          "p",                "q",
                                  "tolerances",  "nodes",          "max_restarts",     "explore_restarts",
                                  "seed",        "validity_samples"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw InputError("scenario: unknown field '" + key + "'");
        }
    }
    for (const char* k : {"field", "p", "q"}) {
        if (!doc.contains(k)) throw InputError(std::string("scenario: missing field '") + k + "'");
    }

    RoutingScenario s;
    if (doc.contains("base_metric")) s.base = base_metric_from_json(doc["base_metric"]);
    s.field = field_from_json(doc["field"], base_dir);

    s.origin = point_of(doc["p"], "p");
    s.destination = point_of(doc["q"], "q");

    if (doc.contains("tolerances")) {
        const json& t = doc["tolerances"];
        if (!t.is_object()) throw InputError("scenario.tolerances: expected an object");
        for (const auto& [key, value] : t.items()) {
            if (key == "bvp") s.bvp.tolerance = positive_number(value, "tolerances.bvp");
            else if (key == "saturation_margin") s.saturation_margin = positive_number(value, "tolerances.saturation_margin");
            else throw InputError("scenario.tolerances: unknown field '" + key + "'");
        }
    }
    if (doc.contains("nodes")) {
        if (!doc["nodes"].is_number_integer() || doc["nodes"].get<long long>() < 3) {
            throw InputError("scenario.nodes: expected an integer >= 3");
        }
        s.bvp.nodes = doc["nodes"].get<std::size_t>();
    }
    if (doc.contains("max_restarts")) {
        if (!doc["max_restarts"].is_number_integer() || doc["max_restarts"].get<long long>() < 0) {
            throw InputError("scenario.max_restarts: expected a non-negative integer");
        }
        s.bvp.max_restarts = doc["max_restarts"].get<int>();
    }
    if (doc.contains("explore_restarts")) {
        if (!doc["explore_restarts"].is_boolean()) throw InputError("scenario.explore_restarts: expected a boolean");
        s.bvp.explore_restarts = doc["explore_restarts"].get<bool>();
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() >= 0)) throw InputError("scenario.seed: expected an unsigned integer");
        s.bvp.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("validity_samples")) {
        if (!doc["validity_samples"].is_number_integer() || doc["validity_samples"].get<long long>() < 2) {
            throw InputError("scenario.validity_samples: expected an integer >= 2");
        }
        s.validity_samples = doc["validity_samples"].get<int>();
    }
    return s;
}

json route_summary_json(const RouteResult& r) {
    return {{"travel_time", r.travel_time},
            {"chord_time", r.chord_time},
            {"converged", r.converged},
            {"endpoint_error", r.endpoint_error},
            {"restarts", r.restarts},
            {"iterations", r.iterations},
            {"multiplicity", r.multiplicity}};
}

}  // namespace ftraffic
