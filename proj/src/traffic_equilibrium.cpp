#include "ftraffic/traffic_equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace ftraffic {

using nlohmann::json;

double link_time(const Link& link, double v) {
    if (!(v >= 0.0)) throw DomainError("link '" + link.id + "': negative flow");
    return link.t0 * (1.0 + link.bpr_b * std::pow(v / link.capacity, link.bpr_p));
}

namespace {

double extended_link_time(const Link& l, double v) {
    const double r = v / l.capacity;
    const double s = r < 0.0 ? -1.0 : 1.0;
    return l.t0 * (1.0 + l.bpr_b * s * std::pow(std::abs(r), l.bpr_p));
}

double extended_link_time_derivative(const Link& l, double v) {
    const double r = std::abs(v / l.capacity);
    if (l.bpr_p == 1.0) return l.t0 * l.bpr_b / l.capacity;
    return l.t0 * l.bpr_b * l.bpr_p * std::pow(r, l.bpr_p - 1.0) / l.capacity;
}

}  // namespace

double Demand::operator()(double pi) const noexcept {
    if (kind == Kind::fixed) return d0;
    return std::max(0.0, d0 - k * pi);
}

double Demand::derivative(double pi) const noexcept {
    if (kind == Kind::fixed) return 0.0;
    return d0 - k * pi > 0.0 ? -k : 0.0;
}

NetworkError::NetworkError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = "invalid network";
          for (const auto& p : problems) msg += "; " + p;
          return msg;
      }()),
      problems_(std::move(problems)) {}

TrafficNetwork::TrafficNetwork(std::vector<std::string> nodes, std::vector<Link> links,
                               std::vector<Route> routes, std::vector<OdPair> od_pairs)
    : nodes_(std::move(nodes)),
      links_(std::move(links)),
      routes_(std::move(routes)),
      od_pairs_(std::move(od_pairs)) {
    std::vector<std::string> problems;

    std::set<std::string> node_set;
    for (const auto& n : nodes_) {
        if (!node_set.insert(n).second) problems.push_back("duplicate node id '" + n + "'");
    }

    std::unordered_map<std::string, std::size_t> link_index;
    for (std::size_t i = 0; i < links_.size(); ++i) {
        const Link& l = links_[i];
        if (!link_index.emplace(l.id, i).second) problems.push_back("duplicate link id '" + l.id + "'");
        if (!node_set.count(l.from)) problems.push_back("link '" + l.id + "': unknown node '" + l.from + "'");
        if (!node_set.count(l.to)) problems.push_back("link '" + l.id + "': unknown node '" + l.to + "'");
        if (l.from == l.to) problems.push_back("link '" + l.id + "' is a self-loop");
        if (!(l.t0 > 0.0) || !std::isfinite(l.t0)) problems.push_back("link '" + l.id + "': t0 must be positive");
        if (!(l.capacity > 0.0) || !std::isfinite(l.capacity)) {
            problems.push_back("link '" + l.id + "': capacity must be positive");
        }
        if (!(l.bpr_b >= 0.0) || !std::isfinite(l.bpr_b)) problems.push_back("link '" + l.id + "': bpr_b must be >= 0");
        if (!(l.bpr_p >= 1.0) || !std::isfinite(l.bpr_p)) problems.push_back("link '" + l.id + "': bpr_p must be >= 1");
    }

    std::unordered_map<std::string, std::size_t> od_index;
    for (std::size_t k = 0; k < od_pairs_.size(); ++k) {
        const OdPair& od = od_pairs_[k];
        if (!od_index.emplace(od.id, k).second) problems.push_back("duplicate od_pair id '" + od.id + "'");
        if (!node_set.count(od.origin)) problems.push_back("od_pair '" + od.id + "': unknown origin '" + od.origin + "'");
        if (!node_set.count(od.destination)) {
            problems.push_back("od_pair '" + od.id + "': unknown destination '" + od.destination + "'");
        }
        if (od.origin == od.destination) problems.push_back("od_pair '" + od.id + "': origin equals destination");
        if (!(od.demand.d0 >= 0.0) || !std::isfinite(od.demand.d0)) {
            problems.push_back("od_pair '" + od.id + "': demand d0 must be >= 0");
        }
        if (!(od.demand.k >= 0.0) || !std::isfinite(od.demand.k)) {
            problems.push_back("od_pair '" + od.id + "': elastic slope k must be >= 0");
        }
    }

    od_routes_.assign(od_pairs_.size(), {});
    std::set<std::string> route_ids;
    for (std::size_t r = 0; r < routes_.size(); ++r) {
        const Route& route = routes_[r];
        if (!route_ids.insert(route.id).second) problems.push_back("duplicate route id '" + route.id + "'");
        std::vector<std::size_t> idx;
        bool ok = true;
        for (const auto& lid : route.links) {
            auto it = link_index.find(lid);
            if (it == link_index.end()) {
                problems.push_back("route '" + route.id + "': unknown link '" + lid + "'");
                ok = false;
            } else {
                idx.push_back(it->second);
            }
        }
        if (route.links.empty()) {
            problems.push_back("route '" + route.id + "' has no links");
            ok = false;
        }
        auto od_it = od_index.find(route.od);
        if (od_it == od_index.end()) {
            problems.push_back("route '" + route.id + "': unknown od_pair '" + route.od + "'");
            ok = false;
        }
        if (ok) {
            const OdPair& od = od_pairs_[od_it->second];
            std::vector<std::string> walk{links_[idx.front()].from};
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const Link& l = links_[idx[i]];
                if (l.from != walk.back()) {
                    problems.push_back("route '" + route.id + "': link '" + l.id +
                                       "' does not continue from node '" + walk.back() + "'");
                    ok = false;
                    break;
                }
                walk.push_back(l.to);
            }
            if (ok) {
                if (walk.front() != od.origin) {
                    problems.push_back("route '" + route.id + "' does not start at origin '" + od.origin + "'");
                }
                if (walk.back() != od.destination) {
                    problems.push_back("route '" + route.id + "' does not end at destination '" +
                                       od.destination + "'");
                }
                std::set<std::string> seen;
                for (const auto& n : walk) {
                    if (!seen.insert(n).second) {
                        problems.push_back("route '" + route.id + "' revisits node '" + n + "'");
                        break;
                    }
                }
            }
            od_routes_[od_it->second].push_back(r);
        }
        route_links_.push_back(std::move(idx));
        route_od_.push_back(od_it == od_index.end() ? 0 : od_it->second);
    }

    for (std::size_t k = 0; k < od_pairs_.size(); ++k) {
        if (od_routes_[k].empty()) problems.push_back("od_pair '" + od_pairs_[k].id + "' has no route");
    }
    if (routes_.empty()) problems.push_back("network has no routes");

    if (!problems.empty()) throw NetworkError(std::move(problems));
}

// -----------------------------------------------------------------------------
// JSON
// -----------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional) {
    if (!obj.is_object()) throw InputError(where + ": expected an object");
    for (const char* k : required) {
        if (!obj.contains(k)) throw InputError(where + ": missing field '" + k + "'");
    }
    for (const auto& [key, value] : obj.items()) {
        const bool known =
            std::any_of(required.begin(), required.end(), [&](const char* k) { return key == k; }) ||
            std::any_of(optional.begin(), optional.end(), [&](const char* k) { return key == k; });
        if (!known) throw InputError(where + ": unknown field '" + key + "'");
    }
}

std::string id_of(const json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw InputError(where + ": expected a string or integer id");
}

double number_of(const json& v, const std::string& where) {
    if (!v.is_number()) throw InputError(where + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InputError(where + ": non-finite number");
    return d;
}

const json& array_field(const json& doc, const char* key) {
    const json& a = doc.at(key);
    if (!a.is_array()) throw InputError(std::string("'") + key + "' must be an array");
    return a;
}

}  // namespace

TrafficNetwork network_from_json(const json& doc) {
    check_keys(doc, "network", {"nodes", "links", "routes", "od_pairs"}, {});

    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < array_field(doc, "nodes").size(); ++i) {
        nodes.push_back(id_of(doc["nodes"][i], "nodes[" + std::to_string(i) + "]"));
    }

    std::vector<Link> links;
    const json& jl = array_field(doc, "links");
    for (std::size_t i = 0; i < jl.size(); ++i) {
        const std::string w = "links[" + std::to_string(i) + "]";
        check_keys(jl[i], w, {"id", "from", "to", "t0", "capacity"}, {"bpr_b", "bpr_p"});
        Link l;
        l.id = id_of(jl[i]["id"], w + ".id");
        l.from = id_of(jl[i]["from"], w + ".from");
        l.to = id_of(jl[i]["to"], w + ".to");
        l.t0 = number_of(jl[i]["t0"], w + ".t0");
        l.capacity = number_of(jl[i]["capacity"], w + ".capacity");
        if (jl[i].contains("bpr_b")) l.bpr_b = number_of(jl[i]["bpr_b"], w + ".bpr_b");
        if (jl[i].contains("bpr_p")) l.bpr_p = number_of(jl[i]["bpr_p"], w + ".bpr_p");
        links.push_back(std::move(l));
    }

    std::vector<Route> routes;
    const json& jr = array_field(doc, "routes");
    for (std::size_t i = 0; i < jr.size(); ++i) {
        const std::string w = "routes[" + std::to_string(i) + "]";
        check_keys(jr[i], w, {"id", "od", "links"}, {});
        Route r;
        r.id = id_of(jr[i]["id"], w + ".id");
        r.od = id_of(jr[i]["od"], w + ".od");
        if (!jr[i]["links"].is_array()) throw InputError(w + ".links: expected an array");
        for (std::size_t j = 0; j < jr[i]["links"].size(); ++j) {
            r.links.push_back(id_of(jr[i]["links"][j], w + ".links[" + std::to_string(j) + "]"));
        }
        routes.push_back(std::move(r));
    }

    std::vector<OdPair> ods;
    const json& jo = array_field(doc, "od_pairs");
    for (std::size_t i = 0; i < jo.size(); ++i) {
        const std::string w = "od_pairs[" + std::to_string(i) + "]";
        check_keys(jo[i], w, {"id", "origin", "destination", "demand"}, {});
        OdPair od;
        od.id = id_of(jo[i]["id"], w + ".id");
        od.origin = id_of(jo[i]["origin"], w + ".origin");
        od.destination = id_of(jo[i]["destination"], w + ".destination");
        const json& jd = jo[i]["demand"];
        check_keys(jd, w + ".demand", {"type", "d0"}, {"k"});
        if (!jd["type"].is_string()) throw InputError(w + ".demand.type: expected a string");
        const std::string type = jd["type"].get<std::string>();
        od.demand.d0 = number_of(jd["d0"], w + ".demand.d0");
        if (type == "fixed") {
            od.demand.kind = Demand::Kind::fixed;
            if (jd.contains("k") && number_of(jd["k"], w + ".demand.k") != 0.0) {
                throw InputError(w + ".demand.k: fixed demand takes no slope");
            }
        } else if (type == "elastic") {
            od.demand.kind = Demand::Kind::elastic;
            if (!jd.contains("k")) throw InputError(w + ".demand: missing field 'k'");
            od.demand.k = number_of(jd["k"], w + ".demand.k");
        } else {
            throw InputError(w + ".demand.type: expected 'fixed' or 'elastic'");
        }
        ods.push_back(std::move(od));
    }

    return TrafficNetwork(std::move(nodes), std::move(links), std::move(routes), std::move(ods));
}

json network_to_json(const TrafficNetwork& net) {
    json doc;
    doc["nodes"] = net.nodes();
    doc["links"] = json::array();
    for (const auto& l : net.links()) {
        doc["links"].push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}, {"t0", l.t0},
                                {"capacity", l.capacity}, {"bpr_b", l.bpr_b}, {"bpr_p", l.bpr_p}});
    }
    doc["routes"] = json::array();
    for (const auto& r : net.routes()) doc["routes"].push_back({{"id", r.id}, {"od", r.od}, {"links", r.links}});
    doc["od_pairs"] = json::array();
    for (const auto& od : net.od_pairs()) {
        json d = {{"type", od.demand.kind == Demand::Kind::fixed ? "fixed" : "elastic"}, {"d0", od.demand.d0}};
        if (od.demand.kind == Demand::Kind::elastic) d["k"] = od.demand.k;
        doc["od_pairs"].push_back(
            {{"id", od.id}, {"origin", od.origin}, {"destination", od.destination}, {"demand", d}});
    }
    return doc;
}

// -----------------------------------------------------------------------------
// Costs and the NCP
// -----------------------------------------------------------------------------

Vector link_flows(const TrafficNetwork& net, const Vector& h) {
    if (h.size() != static_cast<Eigen::Index>(net.route_count())) throw DomainError("route flow size mismatch");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(net.links().size()));
    for (std::size_t r = 0; r < net.route_count(); ++r) {
        for (std::size_t l : net.route_links(r)) v[l] += h[r];
    }
    return v;
}

Vector route_cost(const TrafficNetwork& net, const Vector& h) {
    const Vector v = link_flows(net, h);
    Vector c = Vector::Zero(static_cast<Eigen::Index>(net.route_count()));
    for (std::size_t r = 0; r < net.route_count(); ++r) {
        for (std::size_t l : net.route_links(r)) c[r] += link_time(net.links()[l], v[l]);
    }
    return c;
}

const char* to_string(DemandBlock b) noexcept {
    return b == DemandBlock::per_od ? "per_od" : "per_route";
}

int ncp_dimension(const TrafficNetwork& net, DemandBlock block) {
    const auto R = net.route_count();
    return static_cast<int>(R + (block == DemandBlock::per_od ? net.od_count() : R));
}

NcpProblem assemble_ncp(const TrafficNetwork& net, DemandBlock block) {
    const auto R = static_cast<Eigen::Index>(net.route_count());
    const int n = ncp_dimension(net, block);

    // Index into the time block of x used by route r, and the demand row owner.
    auto time_index = [&net, block, R](std::size_t r) {
        return R + static_cast<Eigen::Index>(block == DemandBlock::per_od ? net.route_od(r) : r);
    };

    NcpProblem p;
    p.n = n;
    p.F = [&net, block, R, n, time_index](const Vector& x) {
        const Vector h = x.head(R);
        const Vector v = link_flows(net, h);
        Vector f(n);
        for (std::size_t r = 0; r < net.route_count(); ++r) {
            double c = 0.0;
            for (std::size_t l : net.route_links(r)) c += extended_link_time(net.links()[l], v[l]);
            f[static_cast<Eigen::Index>(r)] = c - x[time_index(r)];
        }
        if (block == DemandBlock::per_od) {
            for (std::size_t k = 0; k < net.od_count(); ++k) {
                double total = 0.0;
                for (std::size_t r : net.od_routes(k)) total += h[static_cast<Eigen::Index>(r)];
                const auto i = R + static_cast<Eigen::Index>(k);
                f[i] = total - net.od_pairs()[k].demand(x[i]);
            }
        } else {
            for (std::size_t r = 0; r < net.route_count(); ++r) {
                const auto i = R + static_cast<Eigen::Index>(r);
                f[i] = h[static_cast<Eigen::Index>(r)] - net.od_pairs()[net.route_od(r)].demand(x[i]);
            }
        }
        return f;
    };
    p.jacobian = [&net, block, R, n, time_index](const Vector& x) {
        const Vector v = link_flows(net, x.head(R));
        Vector dt(v.size());
        for (Eigen::Index l = 0; l < v.size(); ++l) {
            dt[l] = extended_link_time_derivative(net.links()[static_cast<std::size_t>(l)], v[l]);
        }
        Matrix j = Matrix::Zero(n, n);
        for (std::size_t r = 0; r < net.route_count(); ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            for (std::size_t s = 0; s < net.route_count(); ++s) {
                double d = 0.0;
                for (std::size_t l : net.route_links(r)) {
                    const auto& ls = net.route_links(s);
                    if (std::find(ls.begin(), ls.end(), l) != ls.end()) d += dt[static_cast<Eigen::Index>(l)];
                }
                j(ri, static_cast<Eigen::Index>(s)) = d;
            }
            j(ri, time_index(r)) = -1.0;
        }
        if (block == DemandBlock::per_od) {
            for (std::size_t k = 0; k < net.od_count(); ++k) {
                const auto i = R + static_cast<Eigen::Index>(k);
                for (std::size_t r : net.od_routes(k)) j(i, static_cast<Eigen::Index>(r)) = 1.0;
                j(i, i) = -net.od_pairs()[k].demand.derivative(x[i]);
            }
        } else {
            for (std::size_t r = 0; r < net.route_count(); ++r) {
                const auto i = R + static_cast<Eigen::Index>(r);
                j(i, static_cast<Eigen::Index>(r)) = 1.0;
                j(i, i) = -net.od_pairs()[net.route_od(r)].demand.derivative(x[i]);
            }
        }
        return j;
    };
    return p;
}

double gap_value(const TrafficNetwork& net, const Vector& x, DemandBlock block) {
    if (x.size() != ncp_dimension(net, block)) throw DomainError("gap_value: dimension mismatch");
    return merit(x, assemble_ncp(net, block));
}

double WardropResiduals::worst() const noexcept {
    return std::max({complementarity, time_violation, negative_flow, negative_time, max_demand});
}

WardropResiduals wardrop_residuals(const TrafficNetwork& net, const Vector& h, const Vector& pi,
                                   DemandBlock block) {
    const std::size_t R = net.route_count();
    const std::size_t T = block == DemandBlock::per_od ? net.od_count() : R;
    if (h.size() != static_cast<Eigen::Index>(R) || pi.size() != static_cast<Eigen::Index>(T)) {
        throw DomainError("wardrop_residuals: dimension mismatch");
    }
    const Vector c = route_cost(net, h.cwiseMax(0.0));
    WardropResiduals w;
    for (std::size_t r = 0; r < R; ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        const double p = pi[static_cast<Eigen::Index>(block == DemandBlock::per_od ? net.route_od(r) : r)];
        w.complementarity = std::max(w.complementarity, std::abs(h[ri] * (c[ri] - p)));
        w.time_violation = std::max(w.time_violation, std::max(0.0, p - c[ri]));
        w.negative_flow = std::max(w.negative_flow, std::max(0.0, -h[ri]));
    }
    for (Eigen::Index i = 0; i < pi.size(); ++i) w.negative_time = std::max(w.negative_time, std::max(0.0, -pi[i]));
    if (block == DemandBlock::per_od) {
        for (std::size_t k = 0; k < net.od_count(); ++k) {
            double total = 0.0;
            for (std::size_t r : net.od_routes(k)) total += h[static_cast<Eigen::Index>(r)];
            w.demand.push_back(std::abs(total - net.od_pairs()[k].demand(pi[static_cast<Eigen::Index>(k)])));
        }
    } else {
        for (std::size_t r = 0; r < R; ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            w.demand.push_back(std::abs(h[ri] - net.od_pairs()[net.route_od(r)].demand(pi[ri])));
        }
    }
    for (double d : w.demand) w.max_demand = std::max(w.max_demand, d);
    return w;
}

Vector initial_point(const TrafficNetwork& net, DemandBlock block) {
    const auto R = static_cast<Eigen::Index>(net.route_count());
    const Vector free_flow = route_cost(net, Vector::Zero(R));
    Vector x(ncp_dimension(net, block));
    std::vector<double> pi0(net.od_count(), std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < net.route_count(); ++r) {
        pi0[net.route_od(r)] = std::min(pi0[net.route_od(r)], free_flow[static_cast<Eigen::Index>(r)]);
    }
    for (std::size_t r = 0; r < net.route_count(); ++r) {
        const std::size_t k = net.route_od(r);
        const double d = net.od_pairs()[k].demand(pi0[k]);
        x[static_cast<Eigen::Index>(r)] = d / static_cast<double>(net.od_routes(k).size());
        if (block == DemandBlock::per_route) x[R + static_cast<Eigen::Index>(r)] = pi0[k];
    }
    if (block == DemandBlock::per_od) {
        for (std::size_t k = 0; k < net.od_count(); ++k) x[R + static_cast<Eigen::Index>(k)] = pi0[k];
    }
    return x;
}

UeSolution solve_ue(const TrafficNetwork& net, const UeConfig& config) {
    const NcpProblem problem = assemble_ncp(net, config.demand_block);
    UeSolution s;
    s.demand_block = config.demand_block;
    s.report = solve_ncp(problem, config.solver, initial_point(net, config.demand_block));
    const auto R = static_cast<Eigen::Index>(net.route_count());
    s.h = s.report.x_star.head(R);
    s.pi = s.report.x_star.tail(s.report.x_star.size() - R);
    s.route_costs = route_cost(net, s.h.cwiseMax(0.0));
    s.residuals = wardrop_residuals(net, s.h, s.pi, config.demand_block);
    return s;
}

}  // namespace ftraffic
