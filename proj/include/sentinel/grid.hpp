#pragma once

#include "sentinel/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel::grid {

struct Bus {
    int id = 0;
    double load_watts = 0.0;  // net demand: load minus generation

    bool operator==(const Bus&) const = default;
};

struct Branch {
    int from = 0;
    int to = 0;
    double susceptance = 0.0;  // per-unit, > 0

    bool operator==(const Branch&) const = default;
};

/**
 * Bus/branch topology for the DC power-flow model.
 *
 * Angle columns follow the order of the non-reference buses as listed. A case
 * is only constructed through validate(), so a held GridCase is connected,
 * has unique bus ids and a reference bus that exists.
 */
class GridCase {
public:
    GridCase() = default;
    GridCase(std::vector<Bus> buses, std::vector<Branch> branches, int reference_bus);

    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }
    int reference_bus() const noexcept { return reference_bus_; }

    // Number of unknown angles (buses minus the reference).
    std::size_t N() const noexcept { return buses_.empty() ? 0 : buses_.size() - 1; }

    std::optional<std::size_t> bus_position(int id) const;
    // Column of bus `id` in H / theta, or nullopt for the reference bus.
    std::optional<std::size_t> angle_column(int id) const;
    std::vector<int> non_reference_buses() const;

    bool operator==(const GridCase&) const = default;

private:
    void validate() const;

    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    int reference_bus_ = 0;
};

enum class FlowDirection { Forward, Reverse };

struct FlowMeter {
    std::size_t branch = 0;  // 0-based index into GridCase::branches()
    FlowDirection direction = FlowDirection::Forward;

    bool operator==(const FlowMeter&) const = default;
};

// Row order of H: flow meters first, then injection meters, each in listed order.
struct MeterPlacement {
    std::vector<FlowMeter> flow_meters;
    std::vector<int> injection_meters;

    std::size_t M() const noexcept { return flow_meters.size() + injection_meters.size(); }
    bool operator==(const MeterPlacement&) const = default;
};

struct CaseFile {
    GridCase grid;
    MeterPlacement placement;

    bool operator==(const CaseFile&) const = default;
};

/**
 * Parses the `gridcase v1` text format. Records are whitespace-delimited,
 * '#' starts a comment:
 *
 *     gridcase v1
 *     bus <id> <load_watts>
 *     branch <from> <to> <susceptance>
 *     ref <id>
 *     flowmeter <branch_index> <+|->     # branch_index is 1-based
 *     injmeter <bus>
 *
 * Syntax problems raise SyntaxError with a line number; topology problems
 * raise SemanticError.
 */
CaseFile parse_case(std::string_view text);

// A placement-only document: header plus flowmeter/injmeter records.
MeterPlacement parse_placement(std::string_view text);

std::string serialize_case(const CaseFile& c);

Matrix build_H(const GridCase& grid, const MeterPlacement& placement);

// Reduced nodal susceptance matrix B' (reference row/column removed).
Matrix reduced_susceptance(const GridCase& grid);

// Solves B' theta = p for the non-reference angles; `injections` are net
// injections per non-reference bus in the same units as the susceptances.
Vector dc_power_flow(const GridCase& grid, const Vector& injections);

inline constexpr double kBaseWatts = 100e6;  // 100 MVA system base

struct LoadRamp {
    int bus = 0;
    double watts_per_step = 0.0;
};

struct StateTrajectory {
    std::vector<Vector> thetas;
};

/// Angle trajectory driven by linear load ramps, solved by DC power flow at each instant.
class RampTrajectory {
public:
    RampTrajectory(const GridCase& grid, std::vector<LoadRamp> ramps,
                   double base_watts = kBaseWatts);

    // Angles at instant t >= 1; loads are base + (t - 1) * ramp.
    Vector theta_at(std::size_t t) const;
    std::size_t N() const noexcept { return static_cast<std::size_t>(base_injection_.size()); }

private:
    Eigen::LDLT<Matrix> factor_;
    Vector base_injection_;
    Vector ramp_injection_;
};

StateTrajectory load_trajectory(const GridCase& grid, std::span<const LoadRamp> ramps,
                                std::size_t horizon);

}  // namespace sentinel::grid
