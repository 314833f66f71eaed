#pragma once

// Command runners behind the `ftraffic` executable. Each runner reads its
// input, writes artifacts into the output directory and returns a summary;
// the executable only parses flags and prints the summary.

#include "ftraffic/dynamic_equilibrium.hpp"
#include "ftraffic/ncp_solver.hpp"
#include "ftraffic/traffic_equilibrium.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ftraffic {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int input_error = 1;
inline constexpr int not_converged = 2;
}  // namespace exit_code

struct RunConfig {
    std::string command;
    std::vector<std::filesystem::path> inputs;
    /// Input document given inline through --config (takes the place of inputs).
    std::optional<nlohmann::json> inline_input;
    std::filesystem::path inline_base_dir;
    std::filesystem::path out_dir = ".";
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::optional<IntegrandVariant> variant;
    DemandBlock demand_block = DemandBlock::per_od;
    std::optional<std::string> cost_model;
    bool minimize = false;
    bool svg = false;
    int jobs = 1;
};

struct RunSummary {
    std::string command;
    std::string status;
    int exit_code = exit_code::ok;
    double wall_time = 0.0;
    nlohmann::json results = nlohmann::json::object();
    std::vector<std::string> artifacts;
    std::vector<std::string> errors;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Reads a --config document: the command's input document plus a
/// "command" discriminator and an optional "options" object
/// (out, tol, seed, variant, demand_block, cost_model, minimize, svg, jobs).
/// Command-line flags are applied afterwards by the caller so they win.
/// Throws InputError.
void apply_config_document(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           RunConfig& cfg);

[[nodiscard]] RunSummary cmd_solve_ncp(const RunConfig& cfg);
[[nodiscard]] RunSummary cmd_solve_ue(const RunConfig& cfg);
[[nodiscard]] RunSummary cmd_route(const RunConfig& cfg);
[[nodiscard]] RunSummary cmd_dynamic(const RunConfig& cfg);
[[nodiscard]] RunSummary cmd_validate(const RunConfig& cfg);

/// Dispatches on cfg.command. Input errors of any kind become exit code 1
/// with the message in `errors`; wall time is filled in.
[[nodiscard]] RunSummary run_command(const RunConfig& cfg);

// -----------------------------------------------------------------------------
// NCP problem files
// -----------------------------------------------------------------------------

/// { "family": "affine",    "M": [[...]], "q": [...] }            F = M x + q
/// { "family": "quadratic", "M": [[...]], "q": [...], "c": [...] } F = M x + q + c.*x.^2
/// Optional: "x0": [...], "solver": {"max_iter", "tol_residual", "tol_merit"}.
struct NcpProblemSpec {
    std::string family;
    Matrix M;
    Vector q;
    Vector c;
    std::optional<Vector> x0;
    SolverConfig solver;

    [[nodiscard]] NcpProblem problem() const;
};

/// Throws InputError naming the offending field.
[[nodiscard]] NcpProblemSpec parse_ncp_problem(const nlohmann::json& doc);

/// Parses JSON text; syntax errors become InputError with line and column.
[[nodiscard]] nlohmann::json parse_json_text(std::istream& in, const std::string& source);
[[nodiscard]] nlohmann::json load_json_file(const std::filesystem::path& path);

// -----------------------------------------------------------------------------
// Tabular outputs
// -----------------------------------------------------------------------------

/// Header plus rows of raw cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column by header name, parsed as numbers. Throws InputError.
    [[nodiscard]] std::vector<double> numbers(const std::string& column) const;
    [[nodiscard]] std::vector<std::string> strings(const std::string& column) const;
};

[[nodiscard]] CsvTable read_csv_table(std::istream& in);

/// route,od,flow,cost
void write_flows_csv(std::ostream& out, const TrafficNetwork& net, const UeSolution& s);
/// key,time with one row per OD pair (per_od) or per route (per_route).
void write_times_csv(std::ostream& out, const TrafficNetwork& net, const UeSolution& s);
[[nodiscard]] nlohmann::json residuals_json(const WardropResiduals& r);

}  // namespace ftraffic
