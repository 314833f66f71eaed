#include "ftraffic/cli_io.hpp"

#include "ftraffic/congestion_routing.hpp"
#include "ftraffic/finsler_core.hpp"
#include "ftraffic/geodesic.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

namespace ftraffic {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Small JSON readers with field-qualified diagnostics
// ---------------------------------------------------------------------------

double number_at(const json& v, const std::string& where) {
    if (!v.is_number()) throw InputError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw InputError(where + ": expected a finite number");
    return x;
}

Vector vector_at(const json& v, const std::string& where) {
    if (!v.is_array()) throw InputError(where + ": expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = number_at(v[i], where + "[" + std::to_string(i) + "]");
    }
    return out;
}

Matrix matrix_at(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw InputError(where + ": expected a non-empty array of rows");
    const std::size_t rows = v.size();
    if (!v[0].is_array()) throw InputError(where + "[0]: expected an array of numbers");
    const std::size_t cols = v[0].size();
    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string row = where + "[" + std::to_string(i) + "]";
        const Vector r = vector_at(v[i], row);
        if (static_cast<std::size_t>(r.size()) != cols) throw InputError(row + ": ragged matrix row");
        out.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    return out;
}

void reject_unknown(const json& doc, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : doc.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw InputError(where + ": unknown field '" + key + "'");
        }
    }
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Inputs and artifacts
// ---------------------------------------------------------------------------

struct Input {
    std::string name;  ///< for diagnostics and per-input output folders
    fs::path base_dir;
    bool csv = false;
    fs::path path;     ///< set for file inputs
    json doc;          ///< set for JSON inputs
};

std::vector<Input> collect_inputs(const RunConfig& cfg) {
    std::vector<Input> out;
    if (cfg.inline_input) {
        Input in;
        in.name = "config";
        in.base_dir = cfg.inline_base_dir;
        in.doc = *cfg.inline_input;
        out.push_back(std::move(in));
    }
    for (const fs::path& p : cfg.inputs) {
        if (!fs::is_regular_file(p)) throw InputError(p.string() + ": no such file");
        Input in;
        in.name = p.stem().string();
        in.path = p;
        in.base_dir = p.parent_path();
        in.csv = p.extension() == ".csv";
        if (!in.csv) in.doc = load_json_file(p);
        out.push_back(std::move(in));
    }
    if (out.empty()) throw InputError(cfg.command + ": no input given");
    return out;
}

const Input& single_input(const std::vector<Input>& inputs, const std::string& command) {
    if (inputs.size() != 1) throw InputError(command + ": expected exactly one input");
    return inputs.front();
}

class ArtifactWriter {
public:
    ArtifactWriter(fs::path dir, std::vector<std::string>& record) : dir_(std::move(dir)), record_(record) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw InputError(dir_.string() + ": cannot create output directory");
    }

    template <class WriteFn>
    void write(const std::string& name, WriteFn&& fn) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError(path.string() + ": output not writable");
        fn(out);
        out.flush();
        if (!out) throw InputError(path.string() + ": write failed");
        record_.push_back(path.generic_string());
    }

    void write_json(const std::string& name, const json& doc) {
        write(name, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    }

private:
    fs::path dir_;
    std::vector<std::string>& record_;
};

SolverConfig with_tolerance(SolverConfig s, const RunConfig& cfg) {
    if (cfg.tol) s.tol_residual = *cfg.tol;
    s.validate();
    return s;
}

/// Input errors outrank non-convergence.
int worse(int a, int b) {
    auto rank = [](int c) { return c == exit_code::input_error ? 2 : c == exit_code::not_converged ? 1 : 0; };
    return rank(a) >= rank(b) ? a : b;
}

std::string status_of(int code) {
    switch (code) {
        case exit_code::ok: return "ok";
        case exit_code::not_converged: return "not_converged";
        default: return "input_error";
    }
}

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

struct Failure {
    std::string input;
    std::string check;
    std::string message;
};

json failures_json(const std::vector<Failure>& fs_) {
    json out = json::array();
    for (const auto& f : fs_) out.push_back({{"input", f.input}, {"check", f.check}, {"message", f.message}});
    return out;
}

/// Sample points over a box and unit directions at each, fixed by `seed`.
std::vector<std::pair<Point, Components>> structure_samples(const Point& lo, const Point& hi, int count,
                                                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<Point, Components>> out;
    for (int i = 0; i < count; ++i) {
        Point x(2);
        for (int k = 0; k < 2; ++k) x[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
        const double angle = 2.0 * M_PI * unit(rng);
        out.emplace_back(x, Eigen::Vector2d(std::cos(angle), std::sin(angle)));
    }
    return out;
}

void record_structure(const StructureReport& report, const std::string& input, std::vector<Failure>& out) {
    for (const auto& s : report.samples) {
        if (s.passed()) continue;
        std::string check = !s.valid              ? "coefficients"
                            : !s.positive          ? "positivity"
                            : !s.homogeneous       ? "homogeneity"
                            : !s.nondegenerate     ? "nondegeneracy"
                                                   : "positive_definiteness";
        out.push_back({input, check, "at " + format_point(s.x) + " direction " + format_point(s.y) +
                                         (s.message.empty() ? "" : ": " + s.message)});
    }
}

void validate_field(const Input& in, const RunConfig& cfg, std::vector<Failure>& failures, json& details) {
    CongestionField field = CongestionField::none(2);
    RiemannianField base = RiemannianField::euclidean(2);
    double margin = 1e-3;
    Point lo = Eigen::Vector2d(-2.0, -2.0), hi = Eigen::Vector2d(2.0, 2.0);

    if (in.csv) {
        field = CongestionField::grid([&] {
            try {
                return load_grid_csv(in.path.string());
            } catch (const std::exception& e) {
                throw InputError(in.path.string() + ": " + e.what());
            }
        }());
    } else {
        reject_unknown(in.doc, {"field", "base_metric", "saturation_margin", "box"}, in.name);
        field = field_from_json(in.doc["field"], in.base_dir);
        if (in.doc.contains("base_metric")) base = base_metric_from_json(in.doc["base_metric"]);
        if (in.doc.contains("saturation_margin")) {
            margin = number_at(in.doc["saturation_margin"], in.name + ".saturation_margin");
        }
        if (in.doc.contains("box")) {
            const Matrix box = matrix_at(in.doc["box"], in.name + ".box");
            if (box.rows() != 2 || box.cols() != 2 || !(box(0, 0) < box(1, 0)) || !(box(0, 1) < box(1, 1))) {
                throw InputError(in.name + ".box: expected [[xmin, ymin], [xmax, ymax]]");
            }
            lo = box.row(0).transpose();
            hi = box.row(1).transpose();
        }
    }
    if (const auto& b = field.bounds()) {
        lo = b->first;
        hi = b->second;
    }

    BuildOptions options;
    options.saturation_margin = margin;
    constexpr int m = 41;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            options.check_points.push_back(Eigen::Vector2d(lo[0] + (hi[0] - lo[0]) * i / (m - 1.0),
                                                           lo[1] + (hi[1] - lo[1]) * j / (m - 1.0)));
        }
    }
    details["description"] = field.description();
    details["saturation_margin"] = margin;
    try {
        const RandersStructure F = build_randers(base, field, options);
        const auto samples = structure_samples(lo, hi, 200, cfg.seed.value_or(1));
        const StructureReport report = validate_structure(F, samples);
        record_structure(report, in.name, failures);
        details["samples"] = report.samples.size();
    } catch (const CongestionSaturation& e) {
        failures.push_back({in.name, "saturation", e.what()});
    }
}

void validate_metric(const Input& in, const RunConfig& cfg, std::vector<Failure>& failures, json& details) {
    reject_unknown(in.doc, {"randers", "samples"}, in.name);
    const json& r = in.doc["randers"];
    if (!r.is_object()) throw InputError(in.name + ".randers: expected an object with a and b");
    reject_unknown(r, {"a", "b"}, in.name + ".randers");
    if (!r.contains("a") || !r.contains("b")) throw InputError(in.name + ".randers: missing field 'a' or 'b'");
    const Matrix a = matrix_at(r["a"], in.name + ".randers.a");
    const Vector b = vector_at(r["b"], in.name + ".randers.b");
    if (a.rows() != 2 || a.cols() != 2 || b.size() != 2) throw InputError(in.name + ".randers: expected 2x2 a and 2-vector b");
    int count = 200;
    if (in.doc.contains("samples")) {
        if (!in.doc["samples"].is_number_integer() || in.doc["samples"].get<long long>() < 1) {
            throw InputError(in.name + ".samples: expected a positive integer");
        }
        count = in.doc["samples"].get<int>();
    }
    // Checked per sample rather than through RandersStructure::constant so
    // an invalid pair shows up in the failure list.
    const RandersStructure F(2, [a, b](const Point&) { return RandersCoefficients{a, b}; },
                             [](const Point&) { return RandersDerivatives{{Matrix::Zero(2, 2), Matrix::Zero(2, 2)},
                                                                          {Vector::Zero(2), Vector::Zero(2)}}; });
    const auto samples = structure_samples(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), count, cfg.seed.value_or(1));
    const StructureReport report = validate_structure(F, samples);
    record_structure(report, in.name, failures);
    details["samples"] = report.samples.size();
}

void validate_network(const Input& in, std::vector<Failure>& failures, json& details) {
    try {
        const TrafficNetwork net = network_from_json(in.doc);
        details["routes"] = net.route_count();
        details["od_pairs"] = net.od_count();
    } catch (const NetworkError& e) {
        for (const auto& p : e.problems()) failures.push_back({in.name, "network", p});
    }
}

// ---------------------------------------------------------------------------
// dynamic input
// ---------------------------------------------------------------------------

struct DynamicInput {
    Trajectory trajectory;  ///< costs possibly empty
    std::optional<CostModel> model;
    DynamicConfig config;
};

Trajectory read_trajectory_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string() + ": cannot open");
    try {
        Trajectory t = read_trajectory_csv(in);
        t.validate();
        return t;
    } catch (const std::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

DynamicInput dynamic_input(const Input& in, const RunConfig& cfg) {
    DynamicInput out;
    if (in.csv) {
        out.trajectory = read_trajectory_file(in.path);
    } else {
        const json& d = in.doc;
        reject_unknown(d, {"trajectory_csv", "grid", "h0", "cost_model", "variant", "pi_offset", "optimizer"}, in.name);
        if (d.contains("trajectory_csv")) {
            if (d.contains("grid") || d.contains("h0")) {
                throw InputError(in.name + ": give either trajectory_csv or grid/h0");
            }
            if (!d["trajectory_csv"].is_string()) throw InputError(in.name + ".trajectory_csv: expected a path");
            fs::path p = d["trajectory_csv"].get<std::string>();
            if (p.is_relative()) p = in.base_dir / p;
            out.trajectory = read_trajectory_file(p);
        } else {
            if (!d.contains("grid") || !d.contains("h0")) {
                throw InputError(in.name + ": missing field 'grid' or 'h0' (or give trajectory_csv)");
            }
            const json& g = d["grid"];
            if (!g.is_object()) throw InputError(in.name + ".grid: expected {start, end, nodes}");
            reject_unknown(g, {"start", "end", "nodes"}, in.name + ".grid");
            for (const char* k : {"start", "end", "nodes"}) {
                if (!g.contains(k)) throw InputError(in.name + ".grid: missing field '" + k + "'");
            }
            if (!g["nodes"].is_number_integer() || g["nodes"].get<long long>() < 3) {
                throw InputError(in.name + ".grid.nodes: expected an integer >= 3");
            }
            try {
                out.trajectory.t = uniform_grid(number_at(g["start"], in.name + ".grid.start"),
                                                number_at(g["end"], in.name + ".grid.end"),
                                                g["nodes"].get<std::size_t>());
            } catch (const DomainError& e) {
                throw InputError(in.name + ".grid: " + e.what());
            }
            const json& h0 = d["h0"];
            const std::size_t n = out.trajectory.t.size();
            if (h0.is_number()) {
                out.trajectory.h.assign(n, number_at(h0, in.name + ".h0"));
            } else if (h0.is_string() && h0.get<std::string>() == "t") {
                out.trajectory.h = out.trajectory.t;
            } else if (h0.is_array()) {
                const Vector v = vector_at(h0, in.name + ".h0");
                if (static_cast<std::size_t>(v.size()) != n) throw InputError(in.name + ".h0: length differs from grid.nodes");
                out.trajectory.h.assign(v.data(), v.data() + v.size());
            } else {
                throw InputError(in.name + ".h0: expected a number, \"t\" or an array");
            }
        }
        try {
            if (d.contains("cost_model")) {
                if (!d["cost_model"].is_string()) throw InputError(in.name + ".cost_model: expected a string");
                out.model = CostModel::parse(d["cost_model"].get<std::string>());
            }
            if (d.contains("variant")) {
                if (!d["variant"].is_string()) throw InputError(in.name + ".variant: expected a string");
                out.config.variant = parse_integrand_variant(d["variant"].get<std::string>());
            }
        } catch (const DomainError& e) {
            throw InputError(in.name + ": " + e.what());
        }
        if (d.contains("pi_offset")) out.config.pi_offset = number_at(d["pi_offset"], in.name + ".pi_offset");
        if (d.contains("optimizer")) {
            const json& o = d["optimizer"];
            if (!o.is_object()) throw InputError(in.name + ".optimizer: expected an object");
            reject_unknown(o, {"step", "max_iter", "tol", "fix_start", "fix_end"}, in.name + ".optimizer");
            if (o.contains("step")) out.config.step = number_at(o["step"], in.name + ".optimizer.step");
            if (o.contains("tol")) out.config.tol = number_at(o["tol"], in.name + ".optimizer.tol");
            if (o.contains("max_iter")) {
                if (!o["max_iter"].is_number_integer()) throw InputError(in.name + ".optimizer.max_iter: expected an integer");
                out.config.max_iter = o["max_iter"].get<int>();
            }
            for (const char* k : {"fix_start", "fix_end"}) {
                if (!o.contains(k)) continue;
                if (!o[k].is_boolean()) throw InputError(in.name + ".optimizer." + k + ": expected a boolean");
                (std::string(k) == "fix_start" ? out.config.fix_start : out.config.fix_end) = o[k].get<bool>();
            }
            if (!(out.config.step > 0 && out.config.tol > 0 && out.config.max_iter > 0)) {
                throw InputError(in.name + ".optimizer: settings must be positive");
            }
        }
    }
    if (cfg.cost_model) {
        try {
            out.model = CostModel::parse(*cfg.cost_model);
        } catch (const DomainError& e) {
            throw InputError(std::string("--cost-model: ") + e.what());
        }
    }
    if (cfg.variant) out.config.variant = *cfg.variant;
    if (cfg.tol) out.config.tol = *cfg.tol;
    try {
        out.trajectory.validate();
    } catch (const DomainError& e) {
        throw InputError(in.name + ": " + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// route, one scenario
// ---------------------------------------------------------------------------

struct RouteOutcome {
    int code = exit_code::ok;
    json result;
    std::vector<std::string> artifacts;
    std::vector<std::string> errors;
};

RouteOutcome run_scenario(const Input& in, const RunConfig& cfg, const fs::path& dir) {
    RouteOutcome out;
    out.result["input"] = in.name;
    try {
        if (in.csv) throw InputError(in.name + ": route expects a scenario JSON file");
        RoutingScenario s = scenario_from_json(in.doc, in.base_dir);
        if (cfg.tol) s.bvp.tolerance = *cfg.tol;
        if (cfg.seed) s.bvp.seed = *cfg.seed;
        RouteResult r;
        try {
            r = route(s);
        } catch (const CongestionSaturation& e) {
            out.code = exit_code::not_converged;
            out.result["status"] = "saturated";
            out.result["saturation_point"] = vector_json(e.where());
            out.result["congestion_norm"] = e.norm();
            out.errors.push_back(in.name + ": " + e.what());
            return out;
        } catch (const DomainError& e) {
            throw InputError(in.name + ": " + e.what());
        }
        ArtifactWriter writer(dir, out.artifacts);
        writer.write("route.csv", [&](std::ostream& o) { write_curve_csv(o, r.curve); });
        const json summary = route_summary_json(r);
        writer.write_json("route_summary.json", summary);
        if (cfg.svg) writer.write("route.svg", [&](std::ostream& o) { write_curve_svg(o, r.curve); });
        out.result.update(summary);
        out.result["status"] = r.converged ? "converged" : "not_converged";
        if (!r.converged) {
            out.code = exit_code::not_converged;
            std::ostringstream msg;
            msg << std::setprecision(6) << in.name << ": shooting did not converge (endpoint error "
                << r.endpoint_error << " after " << r.restarts << " restarts)";
            out.errors.push_back(msg.str());
        }
    } catch (const std::exception& e) {
        out.code = exit_code::input_error;
        out.result["status"] = "input_error";
        out.errors.push_back(e.what());
    }
    return out;
}

}  // namespace

// -----------------------------------------------------------------------------
// Public helpers
// -----------------------------------------------------------------------------

json RunSummary::to_json() const {
    return {{"command", command}, {"status", status},       {"exit_code", exit_code},
            {"wall_time_s", wall_time}, {"results", results}, {"artifacts", artifacts},
            {"errors", errors}};
}

json parse_json_text(std::istream& in, const std::string& source) {
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(source + ": " + e.what());
    }
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path.string() + ": cannot open");
    return parse_json_text(in, path.string());
}

NcpProblem NcpProblemSpec::problem() const {
    const Matrix m = M;
    const Vector qq = q;
    const Vector cc = c.size() ? c : Vector::Zero(q.size());
    NcpProblem p;
    p.n = static_cast<int>(q.size());
    p.F = [m, qq, cc](const Vector& x) -> Vector { return m * x + qq + cc.cwiseProduct(x.cwiseProduct(x)); };
    p.jacobian = [m, cc](const Vector& x) -> Matrix {
        Matrix J = m;
        J.diagonal() += 2.0 * cc.cwiseProduct(x);
        return J;
    };
    return p;
}

NcpProblemSpec parse_ncp_problem(const json& doc) {
    if (!doc.is_object()) throw InputError("problem: expected an object");
    reject_unknown(doc, {"family", "M", "q", "c", "x0", "solver"}, "problem");
    for (const char* k : {"family", "M", "q"}) {
        if (!doc.contains(k)) throw InputError(std::string("problem: missing field '") + k + "'");
    }
    NcpProblemSpec s;
    if (!doc["family"].is_string()) throw InputError("problem.family: expected a string");
    s.family = doc["family"].get<std::string>();
    if (s.family != "affine" && s.family != "quadratic") {
        throw InputError("problem.family: unknown family '" + s.family + "' (expected affine or quadratic)");
    }
    s.M = matrix_at(doc["M"], "problem.M");
    s.q = vector_at(doc["q"], "problem.q");
    const Eigen::Index n = s.q.size();
    if (n == 0) throw InputError("problem.q: must not be empty");
    if (s.M.rows() != n || s.M.cols() != n) throw InputError("problem.M: expected an n x n matrix matching q");
    if (s.family == "quadratic") {
        if (!doc.contains("c")) throw InputError("problem: missing field 'c'");
        s.c = vector_at(doc["c"], "problem.c");
        if (s.c.size() != n) throw InputError("problem.c: length differs from q");
    } else if (doc.contains("c")) {
        throw InputError("problem.c: only used by the quadratic family");
    }
    if (doc.contains("x0")) {
        s.x0 = vector_at(doc["x0"], "problem.x0");
        if (s.x0->size() != n) throw InputError("problem.x0: length differs from q");
    }
    if (doc.contains("solver")) {
        const json& sv = doc["solver"];
        if (!sv.is_object()) throw InputError("problem.solver: expected an object");
        reject_unknown(sv, {"max_iter", "tol_residual", "tol_merit"}, "problem.solver");
        if (sv.contains("max_iter")) {
            if (!sv["max_iter"].is_number_integer() || sv["max_iter"].get<long long>() < 1) {
                throw InputError("problem.solver.max_iter: expected a positive integer");
            }
            s.solver.max_iter = sv["max_iter"].get<int>();
        }
        if (sv.contains("tol_residual")) s.solver.tol_residual = number_at(sv["tol_residual"], "problem.solver.tol_residual");
        if (sv.contains("tol_merit")) s.solver.tol_merit = number_at(sv["tol_merit"], "problem.solver.tol_merit");
        try {
            s.solver.validate();
        } catch (const DomainError& e) {
            throw InputError(std::string("problem.solver: ") + e.what());
        }
    }
    return s;
}

std::vector<double> CsvTable::numbers(const std::string& column) const {
    const auto cells = strings(column);
    std::vector<double> out;
    out.reserve(cells.size());
    for (std::size_t r = 0; r < cells.size(); ++r) {
        double v = 0.0;
        const std::string& cell = cells[r];
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
            throw InputError("line " + std::to_string(r + 2) + ": invalid number '" + cell + "' in column " + column);
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> CsvTable::strings(const std::string& column) const {
    const auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) throw InputError("csv: no column '" + column + "'");
    const auto k = static_cast<std::size_t>(it - header.begin());
    std::vector<std::string> out;
    for (const auto& row : rows) out.push_back(row[k]);
    return out;
}

CsvTable read_csv_table(std::istream& in) {
    auto split = [](std::string line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return cells;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw InputError("line 1: missing header");
    t.header = split(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                             " columns");
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

void write_flows_csv(std::ostream& out, const TrafficNetwork& net, const UeSolution& s) {
    out << "route,od,flow,cost\n" << std::setprecision(17);
    for (std::size_t r = 0; r < net.route_count(); ++r) {
        out << net.routes()[r].id << ',' << net.routes()[r].od << ',' << s.h[static_cast<Eigen::Index>(r)] << ','
            << s.route_costs[static_cast<Eigen::Index>(r)] << '\n';
    }
}

void write_times_csv(std::ostream& out, const TrafficNetwork& net, const UeSolution& s) {
    out << "id,time\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < s.pi.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        out << (s.demand_block == DemandBlock::per_od ? net.od_pairs()[k].id : net.routes()[k].id) << ','
            << s.pi[i] << '\n';
    }
}

json residuals_json(const WardropResiduals& r) {
    return {{"complementarity", r.complementarity}, {"time_violation", r.time_violation},
            {"negative_flow", r.negative_flow},     {"negative_time", r.negative_time},
            {"demand", r.demand},                   {"max_demand", r.max_demand},
            {"worst", r.worst()}};
}

void apply_config_document(const json& doc, const fs::path& base_dir, RunConfig& cfg) {
    if (!doc.is_object()) throw InputError("config: expected an object");
    if (!doc.contains("command") || !doc["command"].is_string()) {
        throw InputError("config: missing string field 'command'");
    }
    cfg.command = doc["command"].get<std::string>();
    json input = doc;
    input.erase("command");
    if (doc.contains("options")) {
        const json& o = doc["options"];
        input.erase("options");
        if (!o.is_object()) throw InputError("config.options: expected an object");
        reject_unknown(o, {"out", "tol", "seed", "variant", "demand_block", "cost_model", "minimize", "svg", "jobs"},
                       "config.options");
        auto flag = [&](const char* k) {
            if (!o[k].is_boolean()) throw InputError(std::string("config.options.") + k + ": expected a boolean");
            return o[k].get<bool>();
        };
        auto text = [&](const char* k) {
            if (!o[k].is_string()) throw InputError(std::string("config.options.") + k + ": expected a string");
            return o[k].get<std::string>();
        };
        if (o.contains("out")) {
            fs::path p = text("out");
            cfg.out_dir = p.is_relative() ? base_dir / p : p;
        }
        if (o.contains("tol")) cfg.tol = number_at(o["tol"], "config.options.tol");
        if (o.contains("seed")) {
            if (!o["seed"].is_number_unsigned() && !(o["seed"].is_number_integer() && o["seed"].get<std::int64_t>() >= 0)) throw InputError("config.options.seed: expected an unsigned integer");
            cfg.seed = o["seed"].get<std::uint64_t>();
        }
        if (o.contains("variant")) {
            try {
                cfg.variant = parse_integrand_variant(text("variant"));
            } catch (const DomainError& e) {
                throw InputError(std::string("config.options.variant: ") + e.what());
            }
        }
        if (o.contains("demand_block")) {
            const std::string b = text("demand_block");
            if (b == "per_od") cfg.demand_block = DemandBlock::per_od;
            else if (b == "per_route") cfg.demand_block = DemandBlock::per_route;
            else throw InputError("config.options.demand_block: expected per_od or per_route");
        }
        if (o.contains("cost_model")) cfg.cost_model = text("cost_model");
        if (o.contains("minimize")) cfg.minimize = flag("minimize");
        if (o.contains("svg")) cfg.svg = flag("svg");
        if (o.contains("jobs")) {
            if (!o["jobs"].is_number_integer() || o["jobs"].get<long long>() < 1) {
                throw InputError("config.options.jobs: expected a positive integer");
            }
            cfg.jobs = o["jobs"].get<int>();
        }
    }
    cfg.inline_input = std::move(input);
    cfg.inline_base_dir = base_dir;
}

// -----------------------------------------------------------------------------
// Commands
// -----------------------------------------------------------------------------

RunSummary cmd_solve_ncp(const RunConfig& cfg) {
    RunSummary s;
    s.command = "solve-ncp";
    const auto inputs = collect_inputs(cfg);
    const Input& in = single_input(inputs, s.command);
    if (in.csv) throw InputError(in.name + ": solve-ncp expects a JSON problem file");
    NcpProblemSpec spec = parse_ncp_problem(in.doc);
    spec.solver = with_tolerance(spec.solver, cfg);
    const SolveReport report = solve_ncp(spec.problem(), spec.solver, spec.x0);

    const json solution = {{"family", spec.family},
                           {"n", spec.q.size()},
                           {"x", vector_json(report.x_star)},
                           {"merit", report.merit},
                           {"residual", report.residual},
                           {"iterations", report.iterations},
                           {"gradient_steps", report.gradient_steps},
                           {"status", to_string(report.status)}};
    ArtifactWriter(cfg.out_dir, s.artifacts).write_json("solution.json", solution);
    s.results = solution;
    s.exit_code = report.converged() ? exit_code::ok : exit_code::not_converged;
    return s;
}

RunSummary cmd_solve_ue(const RunConfig& cfg) {
    RunSummary s;
    s.command = "solve-ue";
    const auto inputs = collect_inputs(cfg);
    const Input& in = single_input(inputs, s.command);
    if (in.csv) throw InputError(in.name + ": solve-ue expects a network JSON file");
    const TrafficNetwork net = network_from_json(in.doc);
    UeConfig ue;
    ue.solver = with_tolerance(ue.solver, cfg);
    ue.demand_block = cfg.demand_block;
    const UeSolution sol = solve_ue(net, ue);

    ArtifactWriter writer(cfg.out_dir, s.artifacts);
    writer.write("flows.csv", [&](std::ostream& o) { write_flows_csv(o, net, sol); });
    writer.write("times.csv", [&](std::ostream& o) { write_times_csv(o, net, sol); });
    json residual = {{"demand_block", to_string(sol.demand_block)},
                     {"status", to_string(sol.report.status)},
                     {"merit", sol.report.merit},
                     {"residual", sol.report.residual},
                     {"iterations", sol.report.iterations},
                     {"wardrop", residuals_json(sol.residuals)}};
    writer.write_json("residuals.json", residual);

    residual["h"] = vector_json(sol.h);
    residual["pi"] = vector_json(sol.pi);
    s.results = residual;
    s.exit_code = sol.report.converged() ? exit_code::ok : exit_code::not_converged;
    return s;
}

RunSummary cmd_route(const RunConfig& cfg) {
    RunSummary s;
    s.command = "route";
    const auto inputs = collect_inputs(cfg);
    std::vector<fs::path> dirs;
    for (const auto& in : inputs) dirs.push_back(inputs.size() == 1 ? cfg.out_dir : cfg.out_dir / in.name);

    std::vector<RouteOutcome> outcomes(inputs.size());
    const int workers = std::clamp(cfg.jobs, 1, static_cast<int>(inputs.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < inputs.size();) outcomes[i] = run_scenario(inputs[i], cfg, dirs[i]);
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    json results = json::array();
    for (auto& o : outcomes) {
        s.exit_code = worse(s.exit_code, o.code);
        results.push_back(o.result);
        s.artifacts.insert(s.artifacts.end(), o.artifacts.begin(), o.artifacts.end());
        s.errors.insert(s.errors.end(), o.errors.begin(), o.errors.end());
    }
    s.results = results.size() == 1 ? results[0] : results;
    return s;
}

RunSummary cmd_dynamic(const RunConfig& cfg) {
    RunSummary s;
    s.command = "dynamic";
    const auto inputs = collect_inputs(cfg);
    const Input& in = single_input(inputs, s.command);
    DynamicInput d = dynamic_input(in, cfg);

    if (d.model) d.trajectory = with_costs(std::move(d.trajectory), *d.model);
    if (!d.trajectory.has_costs()) {
        throw InputError(in.name + ": no travel times (add a c column or pass --cost-model)");
    }
    json result = {{"variant", to_string(d.config.variant)},
                   {"pi_offset", d.config.pi_offset},
                   {"nodes", d.trajectory.t.size()},
                   {"objective", dynamic_gap(d.trajectory, d.config)},
                   {"monotone", d.trajectory.monotone()}};
    if (d.model) result["cost_model"] = d.model->describe();

    ArtifactWriter writer(cfg.out_dir, s.artifacts);
    if (cfg.minimize) {
        if (!d.model) throw InputError("--minimize needs a cost model");
        const DynamicResult r = minimize_dynamic(*d.model, d.trajectory.t, d.config, d.trajectory.h);
        writer.write("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, r.trajectory); });
        result["initial_objective"] = result["objective"];
        result["objective"] = r.objective;
        result["iterations"] = r.iterations;
        result["status"] = to_string(r.status);
        result["monotone"] = r.monotone;
        result["max_h"] = *std::max_element(r.trajectory.h.begin(), r.trajectory.h.end());
        s.exit_code = r.status == DynamicStatus::converged ? exit_code::ok : exit_code::not_converged;
    }
    writer.write_json("dynamic.json", result);
    s.results = result;
    return s;
}

RunSummary cmd_validate(const RunConfig& cfg) {
    RunSummary s;
    s.command = "validate";
    const auto inputs = collect_inputs(cfg);
    std::vector<Failure> failures;
    json checked = json::array();
    for (const auto& in : inputs) {
        json details = {{"input", in.name}};
        if (in.csv) {
            details["kind"] = "field";
            validate_field(in, cfg, failures, details);
        } else if (!in.doc.is_object()) {
            throw InputError(in.name + ": expected a JSON object");
        } else if (in.doc.contains("links") || in.doc.contains("routes")) {
            details["kind"] = "network";
            validate_network(in, failures, details);
        } else if (in.doc.contains("field")) {
            details["kind"] = "field";
            validate_field(in, cfg, failures, details);
        } else if (in.doc.contains("randers")) {
            details["kind"] = "metric";
            validate_metric(in, cfg, failures, details);
        } else {
            throw InputError(in.name + ": not a network, field or metric document");
        }
        checked.push_back(details);
    }
    const json report = {{"valid", failures.empty()}, {"checked", checked}, {"failures", failures_json(failures)}};
    ArtifactWriter(cfg.out_dir, s.artifacts).write_json("validation.json", report);
    s.results = report;
    for (const auto& f : failures) s.errors.push_back(f.input + ": " + f.check + ": " + f.message);
    s.exit_code = failures.empty() ? exit_code::ok : exit_code::input_error;
    return s;
}

RunSummary run_command(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    RunSummary s;
    try {
        if (cfg.command == "solve-ncp") s = cmd_solve_ncp(cfg);
        else if (cfg.command == "solve-ue") s = cmd_solve_ue(cfg);
        else if (cfg.command == "route") s = cmd_route(cfg);
        else if (cfg.command == "dynamic") s = cmd_dynamic(cfg);
        else if (cfg.command == "validate") s = cmd_validate(cfg);
        else throw InputError("unknown command '" + cfg.command + "'");
    } catch (const NetworkError& e) {
        s = {};
        s.command = cfg.command;
        s.exit_code = exit_code::input_error;
        for (const auto& p : e.problems()) s.errors.push_back(p);
    } catch (const std::exception& e) {
        s = {};
        s.command = cfg.command;
        s.exit_code = exit_code::input_error;
        s.errors.push_back(e.what());
    }
    s.status = status_of(s.exit_code);
    s.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

}  // namespace ftraffic
