#include "sentinel/grid.hpp"

#include "sentinel/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace sentinel::grid {
namespace {

[[noreturn]] void syntax(std::size_t line, const std::string& msg) {
    std::ostringstream os;
    os << "line " << line << ": " << msg;
    throw Error(ErrorCode::SyntaxError, os.str());
}

[[noreturn]] void semantic(const std::string& msg) { throw Error(ErrorCode::SemanticError, msg); }

std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

int parse_int(std::string_view tok, std::size_t line, const char* field) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) {
        syntax(line, std::string("expected integer for ") + field + ", got '" + std::string(tok) + "'");
    }
    return v;
}

double parse_real(std::string_view tok, std::size_t line, const char* field) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) {
        syntax(line, std::string("expected number for ") + field + ", got '" + std::string(tok) + "'");
    }
    return v;
}

struct RawDocument {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::optional<int> ref;
    MeterPlacement placement;
};

RawDocument parse_document(std::string_view text, bool placement_only) {
    RawDocument doc;
    bool header_seen = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto tok = tokenize(line);
        if (tok.empty()) {
            if (end == text.size()) break;
            continue;
        }

        if (!header_seen) {
            if (tok.size() != 2 || tok[0] != "gridcase") syntax(line_no, "expected header 'gridcase v1'");
            if (tok[1] != "v1") syntax(line_no, "unsupported format version '" + std::string(tok[1]) + "'");
            header_seen = true;
            continue;
        }

        const std::string_view kind = tok[0];
        auto arity = [&](std::size_t n) {
            if (tok.size() != n + 1) {
                std::ostringstream os;
                os << "'" << kind << "' takes " << n << " field(s), got " << tok.size() - 1;
                syntax(line_no, os.str());
            }
        };
        const bool grid_record = kind == "bus" || kind == "branch" || kind == "ref";
        if (placement_only && grid_record) {
            syntax(line_no, "'" + std::string(kind) + "' record not allowed in a placement file");
        }
        if (kind == "bus") {
            arity(2);
            doc.buses.push_back({parse_int(tok[1], line_no, "bus id"),
                                 parse_real(tok[2], line_no, "load_watts")});
        } else if (kind == "branch") {
            arity(3);
            doc.branches.push_back({parse_int(tok[1], line_no, "from bus"),
                                    parse_int(tok[2], line_no, "to bus"),
                                    parse_real(tok[3], line_no, "susceptance")});
        } else if (kind == "ref") {
            arity(1);
            if (doc.ref) syntax(line_no, "duplicate 'ref' record");
            doc.ref = parse_int(tok[1], line_no, "reference bus");
        } else if (kind == "flowmeter") {
            arity(2);
            const int idx = parse_int(tok[1], line_no, "branch index");
            if (idx < 1) syntax(line_no, "branch index is 1-based");
            FlowDirection dir;
            if (tok[2] == "+") {
                dir = FlowDirection::Forward;
            } else if (tok[2] == "-") {
                dir = FlowDirection::Reverse;
            } else {
                syntax(line_no, "flow direction must be '+' or '-'");
            }
            doc.placement.flow_meters.push_back({static_cast<std::size_t>(idx - 1), dir});
        } else if (kind == "injmeter") {
            arity(1);
            doc.placement.injection_meters.push_back(parse_int(tok[1], line_no, "bus id"));
        } else {
            syntax(line_no, "unknown record '" + std::string(kind) + "'");
        }
        if (end == text.size()) break;
    }
    if (!header_seen) syntax(line_no == 0 ? 1 : line_no, "missing header 'gridcase v1'");
    return doc;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

GridCase::GridCase(std::vector<Bus> buses, std::vector<Branch> branches, int reference_bus)
    : buses_(std::move(buses)), branches_(std::move(branches)), reference_bus_(reference_bus) {
    validate();
}

void GridCase::validate() const {
    if (buses_.size() < 2) semantic("case needs at least two buses");
    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (!index.emplace(buses_[i].id, i).second) {
            semantic("duplicate bus " + std::to_string(buses_[i].id));
        }
    }
    if (!index.count(reference_bus_)) {
        semantic("reference bus " + std::to_string(reference_bus_) + " does not exist");
    }
    // Union-find for connectivity.
    std::vector<std::size_t> parent(buses_.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const Branch& br = branches_[k];
        for (int end : {br.from, br.to}) {
            if (!index.count(end)) {
                semantic("branch " + std::to_string(k + 1) + " references absent bus " +
                         std::to_string(end));
            }
        }
        if (br.from == br.to) semantic("branch " + std::to_string(k + 1) + " is a self-loop");
        if (!(br.susceptance > 0.0)) {
            semantic("branch " + std::to_string(k + 1) + " has non-positive susceptance");
        }
        parent[find(index[br.from])] = find(index[br.to]);
    }
    const std::size_t root = find(0);
    for (std::size_t i = 1; i < buses_.size(); ++i) {
        if (find(i) != root) {
            semantic("bus " + std::to_string(buses_[i].id) + " is disconnected from bus " +
                     std::to_string(buses_[0].id));
        }
    }
}

std::optional<std::size_t> GridCase::bus_position(int id) const {
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].id == id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> GridCase::angle_column(int id) const {
    std::size_t col = 0;
    for (const Bus& b : buses_) {
        if (b.id == reference_bus_) {
            if (b.id == id) return std::nullopt;
            continue;
        }
        if (b.id == id) return col;
        ++col;
    }
    return std::nullopt;
}

std::vector<int> GridCase::non_reference_buses() const {
    std::vector<int> out;
    for (const Bus& b : buses_) {
        if (b.id != reference_bus_) out.push_back(b.id);
    }
    return out;
}

CaseFile parse_case(std::string_view text) {
    RawDocument doc = parse_document(text, false);
    if (!doc.ref) semantic("case has no 'ref' record");
    return CaseFile{GridCase(std::move(doc.buses), std::move(doc.branches), *doc.ref),
                    std::move(doc.placement)};
}

MeterPlacement parse_placement(std::string_view text) {
    return parse_document(text, true).placement;
}

std::string serialize_case(const CaseFile& c) {
    std::ostringstream os;
    os << "gridcase v1\n";
    for (const Bus& b : c.grid.buses()) os << "bus " << b.id << ' ' << format_real(b.load_watts) << '\n';
    for (const Branch& br : c.grid.branches()) {
        os << "branch " << br.from << ' ' << br.to << ' ' << format_real(br.susceptance) << '\n';
    }
    os << "ref " << c.grid.reference_bus() << '\n';
    for (const FlowMeter& f : c.placement.flow_meters) {
        os << "flowmeter " << f.branch + 1 << ' '
           << (f.direction == FlowDirection::Forward ? '+' : '-') << '\n';
    }
    for (int bus : c.placement.injection_meters) os << "injmeter " << bus << '\n';
    return os.str();
}

Matrix build_H(const GridCase& grid, const MeterPlacement& placement) {
    const auto N = static_cast<Eigen::Index>(grid.N());
    Matrix H = Matrix::Zero(static_cast<Eigen::Index>(placement.M()), N);

    // Adds b * (theta_i - theta_j) to row r, skipping the reference angle.
    auto add_difference = [&](Eigen::Index r, int i, int j, double b) {
        if (auto ci = grid.angle_column(i)) H(r, static_cast<Eigen::Index>(*ci)) += b;
        if (auto cj = grid.angle_column(j)) H(r, static_cast<Eigen::Index>(*cj)) -= b;
    };

    Eigen::Index row = 0;
    for (const FlowMeter& f : placement.flow_meters) {
        if (f.branch >= grid.branches().size()) {
            throw Error(ErrorCode::PlacementError,
                        "flow meter references absent branch " + std::to_string(f.branch + 1));
        }
        const Branch& br = grid.branches()[f.branch];
        if (f.direction == FlowDirection::Forward) {
            add_difference(row, br.from, br.to, br.susceptance);
        } else {
            add_difference(row, br.to, br.from, br.susceptance);
        }
        ++row;
    }
    for (int bus : placement.injection_meters) {
        if (!grid.bus_position(bus)) {
            throw Error(ErrorCode::PlacementError,
                        "injection meter references absent bus " + std::to_string(bus));
        }
        for (const Branch& br : grid.branches()) {
            if (br.from == bus) add_difference(row, br.from, br.to, br.susceptance);
            if (br.to == bus) add_difference(row, br.to, br.from, br.susceptance);
        }
        ++row;
    }
    return H;
}

Matrix reduced_susceptance(const GridCase& grid) {
    const auto N = static_cast<Eigen::Index>(grid.N());
    Matrix B = Matrix::Zero(N, N);
    for (const Branch& br : grid.branches()) {
        const auto ci = grid.angle_column(br.from);
        const auto cj = grid.angle_column(br.to);
        if (ci) B(static_cast<Eigen::Index>(*ci), static_cast<Eigen::Index>(*ci)) += br.susceptance;
        if (cj) B(static_cast<Eigen::Index>(*cj), static_cast<Eigen::Index>(*cj)) += br.susceptance;
        if (ci && cj) {
            B(static_cast<Eigen::Index>(*ci), static_cast<Eigen::Index>(*cj)) -= br.susceptance;
            B(static_cast<Eigen::Index>(*cj), static_cast<Eigen::Index>(*ci)) -= br.susceptance;
        }
    }
    return B;
}

namespace {

// LDL^T avoids square roots, so small integer-valued systems solve exactly.
Eigen::LDLT<Matrix> factor_susceptance(const GridCase& grid) {
    Eigen::LDLT<Matrix> ldlt(reduced_susceptance(grid));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff()) {
        throw Error(ErrorCode::SingularSystem, "reduced susceptance matrix is not positive definite");
    }
    return ldlt;
}

}  // namespace

Vector dc_power_flow(const GridCase& grid, const Vector& injections) {
    if (static_cast<std::size_t>(injections.size()) != grid.N()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(grid.N()) + " injections, got " +
                        std::to_string(injections.size()));
    }
    return factor_susceptance(grid).solve(injections);
}

RampTrajectory::RampTrajectory(const GridCase& grid, std::vector<LoadRamp> ramps,
                               double base_watts)
    : factor_(factor_susceptance(grid)) {
    const auto N = static_cast<Eigen::Index>(grid.N());
    base_injection_ = Vector::Zero(N);
    ramp_injection_ = Vector::Zero(N);
    for (const Bus& b : grid.buses()) {
        if (auto c = grid.angle_column(b.id)) {
            base_injection_[static_cast<Eigen::Index>(*c)] = -b.load_watts / base_watts;
        }
    }
    for (const LoadRamp& r : ramps) {
        if (!grid.bus_position(r.bus)) {
            throw Error(ErrorCode::SemanticError, "load ramp references absent bus " + std::to_string(r.bus));
        }
        // A ramp on the reference bus is absorbed by the slack and leaves theta unchanged.
        if (auto c = grid.angle_column(r.bus)) {
            ramp_injection_[static_cast<Eigen::Index>(*c)] -= r.watts_per_step / base_watts;
        }
    }
}

Vector RampTrajectory::theta_at(std::size_t t) const {
    if (t < 1) throw Error(ErrorCode::InvalidArgument, "time index starts at 1");
    const Vector p = base_injection_ + static_cast<double>(t - 1) * ramp_injection_;
    return factor_.solve(p);
}

StateTrajectory load_trajectory(const GridCase& grid, std::span<const LoadRamp> ramps,
                                std::size_t horizon) {
    if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
    RampTrajectory traj(grid, std::vector<LoadRamp>(ramps.begin(), ramps.end()));
    StateTrajectory out;
    out.thetas.reserve(horizon);
    for (std::size_t t = 1; t <= horizon; ++t) out.thetas.push_back(traj.theta_at(t));
    return out;
}

}  // namespace sentinel::grid
