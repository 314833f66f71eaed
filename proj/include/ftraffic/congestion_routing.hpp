#pragma once

// Shortest-travel-time routing through a congested planar region:
// congestion field -> Randers structure -> origin/destination geodesic.

#include "ftraffic/finsler_core.hpp"
#include "ftraffic/geodesic.hpp"

#include <json.hpp>

#include <filesystem>
#include <utility>

namespace ftraffic {

struct RoutingScenario {
    RiemannianField base = RiemannianField::euclidean(2);
    CongestionField field = CongestionField::none(2);
    Point origin = Point::Zero(2);
    Point destination = Point::Zero(2);
    double saturation_margin = 1e-3;
    /// Samples per axis used to check the field on the validity box.
    int validity_samples = 41;
    BvpConfig bvp;
};

struct RouteResult {
    Curve curve;
    double travel_time = 0.0;
    /// F-length of the straight chord from origin to destination.
    double chord_time = 0.0;
    bool converged = false;
    double endpoint_error = 0.0;
    int restarts = 0;
    int iterations = 0;
    int multiplicity = 0;
};

/// Bounding box of p and q grown by half the OD distance on every side.
[[nodiscard]] std::pair<Point, Point> validity_box(const Point& p, const Point& q);

/// Throws DomainError for p = q or a field that does not cover the validity
/// box, and CongestionSaturation if the field saturates anywhere on it.
/// Shooting failures are reported through RouteResult::converged.
[[nodiscard]] RouteResult route(const RoutingScenario& scenario);

/// Scenario document:
///   { "base_metric": "euclidean" | {"matrix": [[...]]},
///     "field": "none" | "uniform(wx,wy)" | "vortex(cx,cy,s)" | {"grid_csv": "path"},
///     "p": [x, y], "q": [x, y],
///     "tolerances": {"bvp": 1e-6, "saturation_margin": 1e-3},
///     "nodes": 200, "max_restarts": 8, "explore_restarts": false, "seed": 1 }
/// Grid paths are resolved against `base_dir`. Throws InputError.
[[nodiscard]] RoutingScenario scenario_from_json(const nlohmann::json& doc,
                                                 const std::filesystem::path& base_dir = {});

/// "euclidean" or {"matrix": [[...], [...]]}. Throws InputError.
[[nodiscard]] RiemannianField base_metric_from_json(const nlohmann::json& v);
/// Preset string or {"grid_csv": path}, paths resolved against `base_dir`.
/// Throws InputError.
[[nodiscard]] CongestionField field_from_json(const nlohmann::json& v,
                                              const std::filesystem::path& base_dir = {});

[[nodiscard]] nlohmann::json route_summary_json(const RouteResult& r);

}  // namespace ftraffic
