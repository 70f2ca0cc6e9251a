#pragma once

#include "sentinel/grid.hpp"
#include "sentinel/model.hpp"
#include "sentinel/sim.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel::io {

// Reads a whole file; a missing or unreadable file raises SemanticError.
std::string read_file(const std::filesystem::path& path);

// Round-trip formatting (17 significant digits).
std::string format_double(double v);

/**
 * Dense matrix CSV. Two layouts are accepted:
 *   - a plain numeric grid, one matrix row per line;
 *   - 1-based triplets under the header `m,n,value`, dimensions taken from
 *     the largest indices, missing entries zero.
 * Blank lines and lines starting with '#' are ignored.
 */
Matrix parse_matrix_csv(std::string_view text);
std::string write_matrix_csv(const Matrix& A);

// Observation stream: rows `t,x_1,...,x_M`, optional header starting with `t`.
// Rows of the wrong width raise DimensionMismatch.
std::vector<Vector> parse_stream_csv(std::string_view text, std::size_t M);
std::string write_stream_csv(const std::vector<Vector>& rows);

struct Scenario {
    sim::ScenarioConfig config;
    std::optional<grid::CaseFile> case_file;
    std::vector<grid::LoadRamp> ramps;
    std::vector<double> thresholds;
    std::optional<double> gamma;
    std::vector<std::string> warnings;
};

/**
 * Loads a scenario JSON document. File references are resolved relative to
 * `base_dir`. JSON syntax errors raise SyntaxError, schema errors raise
 * SemanticError. See docs/formats.md for the schema.
 */
Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

// Theta source for a case with load ramps (angles from DC power flow).
sim::ThetaSource ramp_theta_source(const grid::GridCase& grid, std::vector<grid::LoadRamp> ramps);

// CSV for per-run records: run,stop_time,statistic,overshoot,censored
std::string write_runs_csv(const sim::RunStats& stats);

// CSV for a sweep: h,arl,arl_stderr,arl_censored,edd,edd_stderr,edd_censored,overshoot_ratio
std::string write_curve_csv(const std::vector<sim::CurvePoint>& curve);

}  // namespace sentinel::io
