#include "sentinel/bounds.hpp"
#include "sentinel/error.hpp"
#include "sentinel/gcusum.hpp"
#include "sentinel/grid.hpp"
#include "sentinel/io.hpp"
#include "sentinel/model.hpp"
#include "sentinel/rgcusum.hpp"
#include "sentinel/sim.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace sentinel;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitSyntax = 2;
constexpr int kExitSemantic = 3;
constexpr int kExitDimension = 4;
constexpr int kExitCensored = 10;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::SyntaxError:
            return kExitSyntax;
        case ErrorCode::DimensionMismatch:
            return kExitDimension;
        default:
            return kExitSemantic;
    }
}

struct ModelSource {
    std::string model_path;
    std::string case_path;
    std::string placement_path;
    std::optional<double> sigma2;

    void add_to(CLI::App& app) {
        app.add_option("--model", model_path, "Measurement matrix H as CSV");
        app.add_option("--case", case_path, "Grid case file (gridcase v1)");
        app.add_option("--placement", placement_path, "Meter placement overriding the case's own");
        app.add_option("--sigma2", sigma2, "Noise variance per measurement");
    }

    bool given() const { return !model_path.empty() || !case_path.empty(); }

    Matrix load_H() const {
        if (model_path.empty() == case_path.empty()) {
            throw Error(ErrorCode::SemanticError, "give exactly one of --model or --case");
        }
        if (!case_path.empty()) {
            auto c = grid::parse_case(io::read_file(case_path));
            if (!placement_path.empty()) c.placement = grid::parse_placement(io::read_file(placement_path));
            return grid::build_H(c.grid, c.placement);
        }
        if (!placement_path.empty()) throw Error(ErrorCode::SemanticError, "--placement requires --case");
        return io::parse_matrix_csv(io::read_file(model_path));
    }
};

struct BandFlags {
    std::optional<double> rho_l;
    std::optional<double> rho_u;

    void add_to(CLI::App& app) {
        app.add_option("--rho-l", rho_l, "Lower attack magnitude bound");
        app.add_option("--rho-u", rho_u, "Upper attack magnitude bound");
    }

    AttackBounds require() const {
        if (!rho_l || !rho_u) throw Error(ErrorCode::SemanticError, "--rho-l and --rho-u are required");
        return AttackBounds(*rho_l, *rho_u);
    }
};

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::SemanticError, "cannot write '" + path + "'");
    out << text;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json number_or_null(double v) {
    return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json vector_json(const Vector& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// ---- model ------------------------------------------------------------------

struct ModelCommand {
    ModelSource src;
    std::string out;
    std::string summary;

    int run() const {
        const Matrix H = src.load_H();
        const std::size_t rank = numerical_rank(H);
        const LinearModel model = build_model(H, src.sigma2.value_or(1.0));
        const Projector proj(model);
        const auto d = diagnose(proj, model);

        ordered_json report;
        report["M"] = model.M();
        report["N"] = model.N();
        report["rank"] = rank;
        report["row_norms"] = vector_json(proj.row_norms());
        report["diagnostics"] = {{"symmetry", d.symmetry},
                                 {"idempotence", d.idempotence},
                                 {"annihilation", d.annihilation},
                                 {"min_diagonal", d.min_diagonal},
                                 {"max_diagonal", d.max_diagonal}};
        write_output(out, io::write_matrix_csv(H));
        if (!summary.empty()) write_output(summary, dump(report));

        std::fprintf(stderr, "M = %zu  N = %zu  rank = %zu\n", model.M(), model.N(), rank);
        std::fprintf(stderr, "max |P - P^T| = %.3e  max |P^2 - P| = %.3e  max |PH| = %.3e\n",
                     d.symmetry, d.idempotence, d.annihilation);
        std::fprintf(stderr, "P_mm in [%.6f, %.6f]\n", d.min_diagonal, d.max_diagonal);
        return kExitOk;
    }
};

// ---- detect -----------------------------------------------------------------

struct DetectCommand {
    ModelSource src;
    BandFlags band;
    std::optional<double> threshold;
    std::string detector = "rgcusum";
    std::string stream = "-";
    std::size_t guard = kDefaultEnumerationGuard;
    std::string out;

    int run() const {
        if (!threshold) throw Error(ErrorCode::SemanticError, "--threshold is required");
        if (!(*threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "--threshold must be positive");
        if (!src.sigma2) throw Error(ErrorCode::SemanticError, "--sigma2 is required");
        const AttackBounds bounds = band.require();
        const LinearModel model = build_model(src.load_H(), *src.sigma2);
        const Projector proj(model);

        std::string text;
        if (stream == "-") {
            text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
        } else {
            text = io::read_file(stream);
        }
        const auto rows = io::parse_stream_csv(text, model.M());

        ordered_json report;
        report["detector"] = detector;
        report["threshold"] = *threshold;
        bool censored = false;
        if (detector == "rgcusum") {
            const auto r = run_rgcusum(rows, model, proj, bounds, *threshold);
            censored = r.censored;
            report["censored"] = r.censored;
            report["t_alarm"] = r.censored ? ordered_json(nullptr) : ordered_json(r.t_alarm);
            report["samples"] = r.omega_trace.size();
            report["statistic"] = r.omega_final;
            report["overshoot"] = r.overshoot ? ordered_json(*r.overshoot) : ordered_json(nullptr);
        } else {
            const GcusumEvaluator evaluator(model, bounds, guard);
            const auto r = run_gcusum(rows, evaluator, proj, *threshold);
            censored = r.censored;
            report["censored"] = r.censored;
            report["t_alarm"] = r.censored ? ordered_json(nullptr) : ordered_json(r.t_alarm);
            report["samples"] = r.V_trace.size();
            report["statistic"] = r.V_final;
            report["overshoot"] = r.censored ? ordered_json(nullptr) : ordered_json(r.V_final - *threshold);
            ordered_json steps = ordered_json::array();
            for (std::size_t t = 0; t < r.per_step.size(); ++t) {
                const auto& v = r.per_step[t];
                ordered_json s;
                s["t"] = t + 1;
                s["v"] = v.value;
                s["sentinel"] = v.sentinel;
                if (v.argmax) {
                    ordered_json support = ordered_json::array();
                    for (auto m : v.argmax->support) support.push_back(m + 1);
                    s["support"] = support;
                    s["signs"] = v.argmax->signs;
                }
                steps.push_back(std::move(s));
            }
            report["per_step"] = std::move(steps);
        }
        write_output(out, dump(report));
        return censored ? kExitCensored : kExitOk;
    }
};

// ---- bounds -----------------------------------------------------------------

struct BoundsCommand {
    ModelSource src;
    BandFlags band;
    std::optional<double> gamma;
    std::optional<double> threshold;
    std::string out;

    int run() const {
        if (!src.sigma2) throw Error(ErrorCode::SemanticError, "--sigma2 is required");
        const AttackBounds bounds = band.require();
        const LinearModel model = build_model(src.load_H(), *src.sigma2);
        const Projector proj(model);
        const BoundsReport r = compute_bounds(model, proj, bounds, gamma, threshold);

        ordered_json j;
        j["gamma"] = r.gamma ? ordered_json(*r.gamma) : ordered_json(nullptr);
        j["h_floor"] = r.gamma ? ordered_json(r.h_floor) : ordered_json(nullptr);
        j["threshold"] = r.threshold;
        j["delay_ceiling"] = number_or_null(r.ceiling.value);
        j["vacuous"] = r.ceiling.vacuous;
        j["per_meter_upper"] = r.per_meter_upper;
        j["per_meter_lower"] = r.per_meter_lower;
        write_output(out, dump(j));

        if (r.gamma) std::fprintf(stderr, "h_floor (gamma = %g) = %.10g\n", *r.gamma, r.h_floor);
        if (r.ceiling.vacuous) {
            std::fprintf(stderr, "delay ceiling at h = %.10g: vacuous\n", r.threshold);
        } else {
            std::fprintf(stderr, "delay ceiling at h = %.10g: %.10g\n", r.threshold, r.ceiling.value);
        }
        return kExitOk;
    }
};

// ---- simulate / curves --------------------------------------------------------

struct ScenarioFlags {
    std::string scenario;
    ModelSource src;
    BandFlags band;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    std::optional<std::size_t> horizon;
    std::optional<std::string> detector;
    std::optional<double> gamma;

    void add_to(CLI::App& app) {
        app.add_option("--scenario", scenario, "Scenario JSON");
        src.add_to(app);
        band.add_to(app);
        app.add_option("--seed", seed, "Base seed");
        app.add_option("--runs", runs, "Monte Carlo runs");
        app.add_option("--horizon", horizon, "Per-run sample cap");
        app.add_option("--detector", detector, "rgcusum or gcusum")
            ->check(CLI::IsMember({"rgcusum", "gcusum"}));
        app.add_option("--gamma", gamma, "Required false-alarm period");
    }

    io::Scenario build() const {
        std::optional<io::Scenario> s;
        if (!scenario.empty()) {
            if (src.given()) throw Error(ErrorCode::SemanticError, "--scenario excludes --model/--case");
            s.emplace(io::load_scenario(scenario));
            if (src.sigma2) s->config.model = s->config.model.with_sigma2(*src.sigma2);
            if (band.rho_l || band.rho_u) {
                s->config.bounds = AttackBounds(band.rho_l.value_or(s->config.bounds.rho_l()),
                                                band.rho_u.value_or(s->config.bounds.rho_u()));
            }
        } else {
            if (!src.sigma2) throw Error(ErrorCode::SemanticError, "--sigma2 is required");
            s.emplace(io::Scenario{sim::ScenarioConfig(build_model(src.load_H(), *src.sigma2), band.require()),
                                   {}, {}, {}, {}, {}});
        }
        if (seed) s->config.base_seed = *seed;
        if (runs) s->config.runs = *runs;
        if (gamma) s->gamma = *gamma;
        if (horizon) {
            s->config.horizon = *horizon;
        } else if (s->gamma && s->config.attack.kind == sim::AttackKind::None && scenario.empty()) {
            s->config.horizon = static_cast<std::size_t>(std::ceil(sim::kArlHorizonFactor * *s->gamma));
        }
        if (detector) {
            s->config.detector = *detector == "gcusum" ? sim::DetectorKind::Gcusum : sim::DetectorKind::Rgcusum;
        }
        if (s->config.runs < 1) throw Error(ErrorCode::SemanticError, "--runs must be >= 1");
        if (s->config.horizon < 1) throw Error(ErrorCode::SemanticError, "--horizon must be >= 1");
        for (const auto& w : s->warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        return std::move(*s);
    }
};

ordered_json stats_json(const sim::RunStats& st) {
    ordered_json j;
    j["h"] = st.h;
    j["runs"] = st.runs.size();
    j["mean_stop"] = st.mean_stop;
    j["stderr_stop"] = st.stderr_stop;
    j["mean_delay"] = st.mean_delay;
    j["stderr_delay"] = st.stderr_delay;
    j["censored_fraction"] = st.censored_fraction;
    j["mean_overshoot"] = st.mean_overshoot;
    j["mean_overshoot_ratio"] = st.mean_overshoot_ratio;
    j["warnings"] = st.warnings;
    return j;
}

struct SimulateCommand {
    ScenarioFlags flags;
    std::optional<double> threshold;
    std::string out;
    std::string summary;

    int run() const {
        io::Scenario s = flags.build();
        double h = 0.0;
        if (threshold) {
            h = *threshold;
        } else if (s.thresholds.size() == 1) {
            h = s.thresholds.front();
        } else if (s.gamma) {
            const Projector proj(s.config.model);
            h = threshold_floor(s.config.model, proj, s.config.bounds, *s.gamma);
        } else {
            throw Error(ErrorCode::SemanticError, "give --threshold or --gamma (or one scenario threshold)");
        }
        if (!(h >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");

        const bool attacked = s.config.attack.kind != sim::AttackKind::None;
        const sim::RunStats st = attacked ? sim::estimate_edd(s.config, h) : sim::estimate_arl(s.config, h);
        write_output(out, io::write_runs_csv(st));

        ordered_json j;
        j["quantity"] = attacked ? "edd" : "arl";
        j["detector"] = s.config.detector == sim::DetectorKind::Gcusum ? "gcusum" : "rgcusum";
        j["sigma2"] = s.config.model.sigma2();
        j["rho_l"] = s.config.bounds.rho_l();
        j["rho_u"] = s.config.bounds.rho_u();
        j["seed"] = s.config.base_seed;
        j["horizon"] = s.config.horizon;
        j["stats"] = stats_json(st);
        if (!summary.empty()) write_output(summary, dump(j));

        for (const auto& w : st.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        std::fprintf(stderr, "%s at h = %.10g: %.6g +/- %.3g (%zu runs, %.1f%% censored)\n",
                     attacked ? "EDD" : "ARL", h, attacked ? st.mean_delay : st.mean_stop,
                     attacked ? st.stderr_delay : st.stderr_stop, st.runs.size(),
                     100.0 * st.censored_fraction);
        return kExitOk;
    }
};

struct CurvesCommand {
    ScenarioFlags flags;
    std::vector<double> h_grid;
    std::string out;

    int run() const {
        io::Scenario s = flags.build();
        const std::vector<double> grid = h_grid.empty() ? s.thresholds : h_grid;
        if (grid.empty()) throw Error(ErrorCode::SemanticError, "give --h-grid or scenario thresholds");
        const auto curve = sim::curve_sweep(s.config, grid);
        write_output(out, io::write_curve_csv(curve));

        std::fprintf(stderr, "%14s %14s %14s %10s\n", "h", "ARL", "EDD", "dh/h");
        for (const auto& p : curve) {
            std::fprintf(stderr, "%14.6g %14.6g %14.6g %10.4g\n", p.h, p.arl.mean_stop, p.edd.mean_delay,
                         p.edd.mean_overshoot_ratio);
            for (const auto& w : p.arl.warnings) std::fprintf(stderr, "warning (ARL): %s\n", w.c_str());
            for (const auto& w : p.edd.warnings) std::fprintf(stderr, "warning (EDD): %s\n", w.c_str());
        }
        return kExitOk;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential detection of false data injection on linear measurement models"};
    app.require_subcommand(1);

    ModelCommand model_cmd;
    auto* model = app.add_subcommand("model", "Build H from a case and report projector diagnostics");
    model_cmd.src.add_to(*model);
    model->add_option("--out", model_cmd.out, "H as CSV (default stdout)");
    model->add_option("--summary", model_cmd.summary, "JSON report path");

    DetectCommand detect_cmd;
    auto* detect = app.add_subcommand("detect", "Run a detector over an observation stream");
    detect_cmd.src.add_to(*detect);
    detect_cmd.band.add_to(*detect);
    detect->add_option("--threshold", detect_cmd.threshold, "Alarm threshold h");
    detect->add_option("--detector", detect_cmd.detector, "rgcusum or gcusum")
        ->check(CLI::IsMember({"rgcusum", "gcusum"}));
    detect->add_option("--stream", detect_cmd.stream, "Stream CSV (default stdin)");
    detect->add_option("--guard", detect_cmd.guard, "Largest M the exhaustive detector accepts");
    detect->add_option("--out", detect_cmd.out, "JSON report path (default stdout)");

    BoundsCommand bounds_cmd;
    auto* bounds = app.add_subcommand("bounds", "Threshold floor and delay ceiling");
    bounds_cmd.src.add_to(*bounds);
    bounds_cmd.band.add_to(*bounds);
    bounds->add_option("--gamma", bounds_cmd.gamma, "Required false-alarm period");
    bounds->add_option("--threshold", bounds_cmd.threshold, "Threshold for the delay ceiling");
    bounds->add_option("--out", bounds_cmd.out, "JSON report path (default stdout)");

    SimulateCommand sim_cmd;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run length or detection delay");
    sim_cmd.flags.add_to(*simulate);
    simulate->add_option("--threshold", sim_cmd.threshold, "Alarm threshold h");
    simulate->add_option("--out", sim_cmd.out, "Per-run CSV (default stdout)");
    simulate->add_option("--summary", sim_cmd.summary, "Aggregate JSON path");

    CurvesCommand curves_cmd;
    auto* curves = app.add_subcommand("curves", "ARL and EDD over a threshold grid");
    curves_cmd.flags.add_to(*curves);
    curves->add_option("--h-grid", curves_cmd.h_grid, "Ascending thresholds, comma separated")
        ->delimiter(',');
    curves->add_option("--out", curves_cmd.out, "Curve CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitSyntax;
    }

    try {
        if (model->parsed()) return model_cmd.run();
        if (detect->parsed()) return detect_cmd.run();
        if (bounds->parsed()) return bounds_cmd.run();
        if (simulate->parsed()) return sim_cmd.run();
        if (curves->parsed()) return curves_cmd.run();
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSemantic;
    }
    return kExitSemantic;
}
