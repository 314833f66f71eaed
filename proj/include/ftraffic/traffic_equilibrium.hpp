#pragma once

// Route-based static Wardrop user equilibrium posed as an NCP in
// x = (route flows h, OD travel times pi).

#include "ftraffic/ncp_solver.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace ftraffic {

struct Link {
    std::string id;
    std::string from;
    std::string to;
    double t0 = 1.0;        ///< free-flow time
    double capacity = 1.0;  ///< flow units
    double bpr_b = 0.15;
    double bpr_p = 4.0;
};

/// BPR travel time t0 (1 + b (v/capacity)^p). Throws DomainError for v < 0.
[[nodiscard]] double link_time(const Link& link, double v);

struct Demand {
    enum class Kind { fixed, elastic };
    Kind kind = Kind::fixed;
    double d0 = 0.0;  ///< fixed demand, or intercept of the elastic form
    double k = 0.0;   ///< elastic slope: d(pi) = max(0, d0 - k pi)

    [[nodiscard]] double operator()(double pi) const noexcept;
    /// Derivative of d at pi (0 on the truncated branch).
    [[nodiscard]] double derivative(double pi) const noexcept;
};

struct OdPair {
    std::string id;
    std::string origin;
    std::string destination;
    Demand demand;
};

struct Route {
    std::string id;
    std::string od;
    std::vector<std::string> links;
};

/// Network invariant violations, one message per problem found.
class NetworkError : public std::runtime_error {
public:
    explicit NetworkError(std::vector<std::string> problems);
    [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Validated, immutable network with loop-free enumerated routes.
class TrafficNetwork {
public:
    /// Throws NetworkError listing every invariant violation.
    TrafficNetwork(std::vector<std::string> nodes, std::vector<Link> links,
                   std::vector<Route> routes, std::vector<OdPair> od_pairs);

    [[nodiscard]] const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<Link>& links() const noexcept { return links_; }
    [[nodiscard]] const std::vector<Route>& routes() const noexcept { return routes_; }
    [[nodiscard]] const std::vector<OdPair>& od_pairs() const noexcept { return od_pairs_; }

    [[nodiscard]] std::size_t route_count() const noexcept { return routes_.size(); }
    [[nodiscard]] std::size_t od_count() const noexcept { return od_pairs_.size(); }
    /// Link indices used by route r.
    [[nodiscard]] const std::vector<std::size_t>& route_links(std::size_t r) const {
        return route_links_[r];
    }
    /// OD index served by route r.
    [[nodiscard]] std::size_t route_od(std::size_t r) const { return route_od_[r]; }
    /// Route indices serving OD k.
    [[nodiscard]] const std::vector<std::size_t>& od_routes(std::size_t k) const {
        return od_routes_[k];
    }

private:
    std::vector<std::string> nodes_;
    std::vector<Link> links_;
    std::vector<Route> routes_;
    std::vector<OdPair> od_pairs_;
    std::vector<std::vector<std::size_t>> route_links_;
    std::vector<std::size_t> route_od_;
    std::vector<std::vector<std::size_t>> od_routes_;
};

/// Parses the network JSON document (`nodes`, `links`, `routes`, `od_pairs`).
/// Unknown fields throw InputError; invariant violations throw NetworkError.
[[nodiscard]] TrafficNetwork network_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json network_to_json(const TrafficNetwork& net);

/// Link flows v_l = sum of h_r over routes through l.
[[nodiscard]] Vector link_flows(const TrafficNetwork& net, const Vector& h);
/// c_r = sum of link_time over the route's links. Requires h >= 0.
[[nodiscard]] Vector route_cost(const TrafficNetwork& net, const Vector& h);

/// per_od: one conservation row sum_{r in R_k} h_r - d_k(pi_k) per OD pair,
///         x = (h, pi_k).
/// per_route: the literal row h_r - d(pi_r) for every route, with one time
///         variable per route, x = (h, pi_r). Identical to per_od when every
///         OD pair has a single route.
enum class DemandBlock { per_od, per_route };

[[nodiscard]] const char* to_string(DemandBlock b) noexcept;

/// Dimension of the NCP for the given demand block.
[[nodiscard]] int ncp_dimension(const TrafficNetwork& net, DemandBlock block = DemandBlock::per_od);

/// NCP map with analytic Jacobian. Negative trial flows (the Fischer-Burmeister
/// iterates are not projected) use the odd extension t0 (1 + b sgn(v)|v/cap|^p).
/// The returned problem refers to `net`, which must outlive it.
[[nodiscard]] NcpProblem assemble_ncp(const TrafficNetwork& net,
                                      DemandBlock block = DemandBlock::per_od);

/// sum_i 1/2 phi(x_i, F_i(x))^2.
[[nodiscard]] double gap_value(const TrafficNetwork& net, const Vector& x,
                               DemandBlock block = DemandBlock::per_od);

struct WardropResiduals {
    double complementarity = 0.0;    ///< max_r |h_r (c_r - pi)|
    double time_violation = 0.0;     ///< max_r max(0, pi - c_r)
    double negative_flow = 0.0;      ///< max_r max(0, -h_r)
    double negative_time = 0.0;      ///< max max(0, -pi)
    std::vector<double> demand;      ///< per demand row |sum h - d(pi)|
    double max_demand = 0.0;

    [[nodiscard]] double worst() const noexcept;
    [[nodiscard]] bool within(double tol) const noexcept { return worst() <= tol; }
};

/// `pi` holds one time per OD pair (per_od) or per route (per_route).
[[nodiscard]] WardropResiduals wardrop_residuals(const TrafficNetwork& net, const Vector& h,
                                                 const Vector& pi,
                                                 DemandBlock block = DemandBlock::per_od);

struct UeConfig {
    SolverConfig solver;
    DemandBlock demand_block = DemandBlock::per_od;
};

struct UeSolution {
    Vector h;
    Vector pi;
    Vector route_costs;
    WardropResiduals residuals;
    SolveReport report;
    DemandBlock demand_block = DemandBlock::per_od;
};

/// Starting point: demand at free-flow times split evenly over each OD's
/// routes, and the cheapest free-flow route time per OD.
[[nodiscard]] Vector initial_point(const TrafficNetwork& net,
                                   DemandBlock block = DemandBlock::per_od);

[[nodiscard]] UeSolution solve_ue(const TrafficNetwork& net, const UeConfig& config = {});

}  // namespace ftraffic
