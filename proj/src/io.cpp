#include "sentinel/io.hpp"

#include "sentinel/error.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace sentinel::io {
namespace {

using nlohmann::json;

[[noreturn]] void syntax(std::size_t line, const std::string& msg) {
    std::ostringstream os;
    os << "line " << line << ": " << msg;
    throw Error(ErrorCode::SyntaxError, os.str());
}

[[noreturn]] void semantic(const std::string& msg) { throw Error(ErrorCode::SemanticError, msg); }

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool to_double(std::string_view tok, double& v) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    return ec == std::errc() && p == tok.data() + tok.size() && std::isfinite(v);
}

double parse_cell(std::string_view tok, std::size_t line) {
    double v = 0.0;
    if (!to_double(tok, v)) syntax(line, "expected a finite number, got '" + std::string(tok) + "'");
    return v;
}

// Yields (line number, content) for non-blank, non-comment lines.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++lineno;
        const auto line = trim(raw);
        if (!line.empty() && line.front() != '#') fn(lineno, line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
}

std::string join_csv_row(const Vector& v) {
    std::string out;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (j) out += ',';
        out += format_double(v[j]);
    }
    return out;
}

const std::set<std::string> kScenarioKeys = {
    "model", "case", "placement", "sigma2", "rho_l", "rho_u", "ramps", "attack", "horizon",
    "runs", "seed", "detector", "thresholds", "gamma", "gcusum_guard"};

const std::set<std::string> kAttackKeys = {"kind", "vector", "vectors", "growth", "onset",
                                           "project_to_complement"};

template <class T>
T get_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        semantic(std::string("scenario field '") + key + "': " + e.what());
    }
}

std::size_t get_count(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        semantic(std::string("scenario field '") + key + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

std::vector<double> number_array(const json& j, const std::string& what) {
    if (!j.is_array()) semantic(what + " must be an array of numbers");
    std::vector<double> out;
    for (const json& e : j) {
        if (!e.is_number()) semantic(what + " must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// An attack vector is either an inline array or
// {"file": <json path>, "key": <name>, "append": [explicit extra entries]}.
Vector attack_vector(const json& j, const std::filesystem::path& base_dir, const std::string& what) {
    if (j.is_array()) return to_vector(number_array(j, what));
    if (!j.is_object() || !j.contains("file") || !j.contains("key")) {
        semantic(what + " must be an array or an object with 'file' and 'key'");
    }
    for (const auto& [k, _] : j.items()) {
        if (k != "file" && k != "key" && k != "append") semantic(what + ": unknown field '" + k + "'");
    }
    const auto file = base_dir / j.at("file").get<std::string>();
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SyntaxError, file.string() + ": " + e.what());
    }
    const std::string key = j.at("key").get<std::string>();
    if (!doc.contains(key)) semantic(file.string() + ": no vector named '" + key + "'");
    std::vector<double> v = number_array(doc.at(key), what);
    if (j.contains("append")) {
        const auto extra = number_array(j.at("append"), what + " append");
        v.insert(v.end(), extra.begin(), extra.end());
    }
    return to_vector(v);
}

sim::AttackSpec parse_attack(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) semantic("'attack' must be an object");
    for (const auto& [k, _] : j.items()) {
        if (!kAttackKeys.contains(k)) semantic("attack: unknown field '" + k + "'");
    }
    const std::string kind = get_field<std::string>(j, "kind");
    const std::size_t onset = j.contains("onset") ? get_count(j, "onset") : 1;
    if (kind != "none" && onset < 1) semantic("attack onset must be >= 1");
    sim::AttackSpec spec;
    if (kind == "none") {
        spec = sim::AttackSpec::none();
    } else if (kind == "constant") {
        if (!j.contains("vector")) semantic("constant attack needs 'vector'");
        spec = sim::AttackSpec::constant(attack_vector(j.at("vector"), base_dir, "attack vector"), onset);
    } else if (kind == "cyclic") {
        if (!j.contains("vectors") || !j.at("vectors").is_array() || j.at("vectors").empty()) {
            semantic("cyclic attack needs a nonempty 'vectors' array");
        }
        std::vector<Vector> vs;
        for (std::size_t i = 0; i < j.at("vectors").size(); ++i) {
            vs.push_back(attack_vector(j.at("vectors")[i], base_dir,
                                       "attack vector " + std::to_string(i + 1)));
        }
        const double growth = j.contains("growth") ? get_field<double>(j, "growth") : 0.0;
        spec = sim::AttackSpec::cyclic(std::move(vs), growth, onset);
    } else {
        semantic("attack kind must be none, constant or cyclic, got '" + kind + "'");
    }
    if (j.contains("project_to_complement")) {
        spec.project_to_complement = get_field<bool>(j, "project_to_complement");
    }
    return spec;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) semantic("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Matrix parse_matrix_csv(std::string_view text) {
    bool first = true;
    bool triplets = false;
    std::vector<std::vector<double>> rows;
    struct Entry {
        std::size_t m, n;
        double v;
    };
    std::vector<Entry> entries;
    for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        const auto cells = split_csv(line);
        if (first) {
            first = false;
            if (cells.size() == 3 && cells[0] == "m" && cells[1] == "n" && cells[2] == "value") {
                triplets = true;
                return;
            }
        }
        if (triplets) {
            if (cells.size() != 3) syntax(lineno, "triplet rows need exactly 3 fields");
            const double m = parse_cell(cells[0], lineno);
            const double n = parse_cell(cells[1], lineno);
            if (m < 1 || n < 1 || m != std::floor(m) || n != std::floor(n)) {
                syntax(lineno, "triplet indices must be positive integers");
            }
            entries.push_back({static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                               parse_cell(cells[2], lineno)});
            return;
        }
        std::vector<double> row;
        for (auto c : cells) row.push_back(parse_cell(c, lineno));
        if (!rows.empty() && row.size() != rows.front().size()) {
            syntax(lineno, "row has " + std::to_string(row.size()) + " columns, expected " +
                               std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    });
    if (triplets) {
        std::size_t M = 0, N = 0;
        for (const Entry& e : entries) {
            M = std::max(M, e.m);
            N = std::max(N, e.n);
        }
        if (M == 0) throw Error(ErrorCode::SyntaxError, "matrix has no entries");
        Matrix A = Matrix::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(N));
        for (const Entry& e : entries) {
            A(static_cast<Eigen::Index>(e.m - 1), static_cast<Eigen::Index>(e.n - 1)) = e.v;
        }
        return A;
    }
    if (rows.empty()) throw Error(ErrorCode::SyntaxError, "matrix has no rows");
    Matrix A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return A;
}

std::string write_matrix_csv(const Matrix& A) {
    std::string out;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        out += join_csv_row(A.row(i).transpose());
        out += '\n';
    }
    return out;
}

std::vector<Vector> parse_stream_csv(std::string_view text, std::size_t M) {
    std::vector<Vector> out;
    bool first = true;
    double last_t = -std::numeric_limits<double>::infinity();
    for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        const auto cells = split_csv(line);
        if (first) {
            first = false;
            if (!cells.empty() && cells[0] == "t") return;
        }
        if (cells.size() != M + 1) {
            std::ostringstream os;
            os << "line " << lineno << ": stream row has " << cells.size() - 1
               << " measurements, model expects " << M;
            throw Error(ErrorCode::DimensionMismatch, os.str());
        }
        const double t = parse_cell(cells[0], lineno);
        if (!(t > last_t)) syntax(lineno, "time stamps must be strictly increasing");
        last_t = t;
        Vector x(static_cast<Eigen::Index>(M));
        for (std::size_t m = 0; m < M; ++m) x[static_cast<Eigen::Index>(m)] = parse_cell(cells[m + 1], lineno);
        out.push_back(std::move(x));
    });
    return out;
}

std::string write_stream_csv(const std::vector<Vector>& rows) {
    std::string out;
    if (!rows.empty()) {
        out += "t";
        for (Eigen::Index m = 0; m < rows.front().size(); ++m) out += ",x_" + std::to_string(m + 1);
        out += '\n';
    }
    for (std::size_t t = 0; t < rows.size(); ++t) {
        out += std::to_string(t + 1) + "," + join_csv_row(rows[t]) + "\n";
    }
    return out;
}

sim::ThetaSource ramp_theta_source(const grid::GridCase& grid, std::vector<grid::LoadRamp> ramps) {
    auto traj = std::make_shared<const grid::RampTrajectory>(grid, std::move(ramps));
    return [traj](std::size_t t) { return traj->theta_at(t); };
}

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SyntaxError, std::string("scenario: ") + e.what());
    }
    if (!j.is_object()) semantic("scenario must be a JSON object");
    for (const auto& [k, _] : j.items()) {
        if (!kScenarioKeys.contains(k)) semantic("scenario: unknown field '" + k + "'");
    }
    if (j.contains("model") == j.contains("case")) semantic("scenario needs exactly one of 'model' or 'case'");
    for (const char* key : {"sigma2", "rho_l", "rho_u"}) {
        if (!j.contains(key)) semantic(std::string("scenario: missing '") + key + "'");
    }
    const double sigma2 = get_field<double>(j, "sigma2");
    const AttackBounds bounds(get_field<double>(j, "rho_l"), get_field<double>(j, "rho_u"));

    std::optional<grid::CaseFile> case_file;
    Matrix H;
    if (j.contains("case")) {
        case_file = grid::parse_case(read_file(base_dir / get_field<std::string>(j, "case")));
        if (j.contains("placement")) {
            case_file->placement =
                grid::parse_placement(read_file(base_dir / get_field<std::string>(j, "placement")));
        }
        H = grid::build_H(case_file->grid, case_file->placement);
    } else {
        if (j.contains("placement")) semantic("'placement' requires 'case'");
        H = parse_matrix_csv(read_file(base_dir / get_field<std::string>(j, "model")));
    }

    Scenario s{sim::ScenarioConfig(build_model(std::move(H), sigma2), bounds), std::move(case_file),
               {}, {}, {}, {}};
    if (j.contains("ramps")) {
        if (!s.case_file) semantic("'ramps' requires 'case'");
        if (!j.at("ramps").is_array()) semantic("'ramps' must be an array");
        for (const json& r : j.at("ramps")) {
            s.ramps.push_back({get_field<int>(r, "bus"), get_field<double>(r, "watts_per_step")});
        }
        s.config.theta = ramp_theta_source(s.case_file->grid, s.ramps);
    }
    if (j.contains("attack")) s.config.attack = parse_attack(j.at("attack"), base_dir);
    if (j.contains("horizon")) s.config.horizon = get_count(j, "horizon");
    if (j.contains("runs")) s.config.runs = get_count(j, "runs");
    if (j.contains("seed")) s.config.base_seed = get_field<std::uint64_t>(j, "seed");
    if (j.contains("gcusum_guard")) s.config.gcusum_guard = get_count(j, "gcusum_guard");
    if (j.contains("detector")) {
        const auto d = get_field<std::string>(j, "detector");
        if (d == "rgcusum") {
            s.config.detector = sim::DetectorKind::Rgcusum;
        } else if (d == "gcusum") {
            s.config.detector = sim::DetectorKind::Gcusum;
        } else {
            semantic("detector must be rgcusum or gcusum, got '" + d + "'");
        }
    }
    if (j.contains("thresholds")) s.thresholds = number_array(j.at("thresholds"), "'thresholds'");
    if (j.contains("gamma")) s.gamma = get_field<double>(j, "gamma");
    if (s.config.horizon < 1) semantic("horizon must be >= 1");
    if (s.config.runs < 1) semantic("runs must be >= 1");

    const Projector proj(s.config.model);
    s.warnings = sim::validate_attack(s.config.attack, proj, s.config.bounds).warnings;
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_file(path), path.parent_path());
}

std::string write_runs_csv(const sim::RunStats& stats) {
    std::string out = "run,stop_time,statistic,overshoot,censored\n";
    for (std::size_t i = 0; i < stats.runs.size(); ++i) {
        const auto& r = stats.runs[i];
        out += std::to_string(i) + "," + std::to_string(r.stop_time) + "," +
               format_double(r.statistic) + "," + format_double(r.overshoot) + "," +
               (r.censored ? "1" : "0") + "\n";
    }
    return out;
}

std::string write_curve_csv(const std::vector<sim::CurvePoint>& curve) {
    std::string out = "h,arl,arl_stderr,arl_censored,edd,edd_stderr,edd_censored,overshoot_ratio\n";
    for (const auto& p : curve) {
        out += format_double(p.h) + "," + format_double(p.arl.mean_stop) + "," +
               format_double(p.arl.stderr_stop) + "," + format_double(p.arl.censored_fraction) + "," +
               format_double(p.edd.mean_delay) + "," + format_double(p.edd.stderr_delay) + "," +
               format_double(p.edd.censored_fraction) + "," +
               format_double(p.edd.mean_overshoot_ratio) + "\n";
    }
    return out;
}

}  // namespace sentinel::io
