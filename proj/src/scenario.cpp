#include "aronsson/scenario.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "aronsson/field_io.hpp"
#include "aronsson/intrinsic.hpp"
#include "aronsson/operators.hpp"
#include "aronsson/util.hpp"
#include "json.hpp"

namespace aronsson {

using nlohmann::json;

namespace {

const std::set<std::string> kSuites = {"max_principle", "gradient_bound",    "holder",
                                       "barrier",       "flatness",          "slope_monotonicity",
                                       "am_probe"};
const std::set<std::string> kDiagnosticSuites = {"gradient_bound", "am_probe"};

double uniform01(std::uint64_t& state) {
    // splitmix64 step; avoids distribution-implementation differences
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

}  // namespace

ScalarField data_constant(const Grid2D& grid, double c) {
    ScalarField g(grid);
    std::fill(g.v.begin(), g.v.end(), c);
    return g;
}

ScalarField data_affine(const Grid2D& grid, double bx, double by, double c) {
    ScalarField g(grid);
    for (int k = 0; k < grid.count(); ++k) {
        const auto p = grid.point(k);
        g.v[k] = bx * p[0] + by * p[1] + c;
    }
    return g;
}

ScalarField data_aronsson(const Grid2D& grid) {
    ScalarField g(grid);
    for (int k = 0; k < grid.count(); ++k) {
        const auto p = grid.point(k);
        g.v[k] = std::pow(std::abs(p[0]), 4.0 / 3.0) - std::pow(std::abs(p[1]), 4.0 / 3.0);
    }
    return g;
}

ScalarField data_flat(const Grid2D& grid, double lambda, std::uint64_t seed) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("data_flat: lambda must lie in (0,1)");
    std::uint64_t state = seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull;
    const double w1 = 0.8 + 0.6 * uniform01(state);
    const double w2 = 0.8 + 0.6 * uniform01(state);
    const double p1 = 6.283185307179586 * uniform01(state);
    const double p2 = 6.283185307179586 * uniform01(state);
    ScalarField g(grid);
    for (int k = 0; k < grid.count(); ++k) {
        const auto p = grid.point(k);
        g.v[k] = p[1] + lambda * 0.5 * std::sin(w1 * p[0] + p1) * std::sin(w2 * p[1] + p2);
    }
    return g;
}

Grid2D Scenario::make_grid() const { return Grid2D::over_rectangle(ax, ay, bx, by, resolution); }

CoefficientField Scenario::make_coefficients() const {
    return make_preset(make_grid(), coeff_preset, coeff_params);
}

ScalarField Scenario::make_boundary_data(const Grid2D& grid) const {
    if (data_preset == "constant")
        return data_constant(grid, data_params.empty() ? 0.0 : data_params[0]);
    if (data_preset == "affine") {
        const double c = data_params.size() > 2 ? data_params[2] : 0.0;
        return data_affine(grid, data_params[0], data_params[1], c);
    }
    if (data_preset == "aronsson") return data_aronsson(grid);
    if (data_preset == "flat") return data_flat(grid, data_params[0], seed);
    throw std::invalid_argument("unknown boundary data preset '" + data_preset + "'");
}

SolveConfig Scenario::make_solve_config() const {
    SolveConfig cfg;
    cfg.eps = schedule.eps0;
    cfg.grad_tol = grad_tol;
    cfg.max_newton_iters = max_newton_iters;
    cfg.armijo_slope_frac = armijo_slope_frac;
    cfg.armijo_backtrack = armijo_backtrack;
    cfg.schedule = schedule;
    return cfg;
}

std::string Scenario::canonical_json() const {
    json j;
    j["domain"] = {ax, ay, bx, by};
    j["resolution"] = resolution;
    j["coefficients"] = {{"preset", coeff_preset}, {"params", coeff_params}};
    j["boundary_data"] = {{"preset", data_preset}, {"params", data_params}};
    j["eps_schedule"] = {{"eps0", schedule.eps0}, {"ratio", schedule.ratio},
                         {"count", schedule.count}};
    j["solver"] = {{"grad_tol", grad_tol},
                   {"max_newton_iters", max_newton_iters},
                   {"armijo_slope_frac", armijo_slope_frac},
                   {"armijo_backtrack", armijo_backtrack}};
    j["suites"] = suites;
    if (barrier_given)
        j["barrier"] = {{"vertex", {barrier.vertex[0], barrier.vertex[1]}},
                        {"amplitude", barrier.amplitude},
                        {"gamma", barrier.exponent}};
    j["seed"] = seed;
    return j.dump();
}

std::string Scenario::hash() const { return fnv1a_hex(canonical_json()); }

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.contains(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get_field(const json& obj, const std::string& where, const std::string& key) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: field '" + key + "' in " + where + ": " + e.what());
    }
}

template <typename T>
T get_field_or(const json& obj, const std::string& where, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return get_field<T>(obj, where, key);
}

}  // namespace

Scenario parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw std::invalid_argument("config: top level must be an object");
    require_keys(root, "top level",
                 {"domain", "resolution", "coefficients", "boundary_data", "eps_schedule",
                  "solver", "suites", "barrier", "seed", "output_dir"});
    for (const char* req : {"domain", "resolution", "coefficients", "boundary_data"})
        if (!root.contains(req))
            throw std::invalid_argument("config: missing required key '" + std::string(req) + "'");

    Scenario sc;
    const auto dom = get_field<std::vector<double>>(root, "top level", "domain");
    if (dom.size() != 4)
        throw std::invalid_argument("config: 'domain' must be [ax, ay, bx, by]");
    sc.ax = dom[0];
    sc.ay = dom[1];
    sc.bx = dom[2];
    sc.by = dom[3];
    sc.resolution = get_field<int>(root, "top level", "resolution");
    if (sc.resolution < 17)
        throw std::invalid_argument("config: resolution must be at least 17 per side");

    const json& co = root.at("coefficients");
    require_keys(co, "coefficients", {"preset", "params"});
    sc.coeff_preset = get_field<std::string>(co, "coefficients", "preset");
    sc.coeff_params = get_field_or<std::vector<double>>(co, "coefficients", "params", {});

    const json& bd = root.at("boundary_data");
    require_keys(bd, "boundary_data", {"preset", "params"});
    sc.data_preset = get_field<std::string>(bd, "boundary_data", "preset");
    sc.data_params = get_field_or<std::vector<double>>(bd, "boundary_data", "params", {});
    if (sc.data_preset == "constant" && sc.data_params.size() > 1)
        throw std::invalid_argument("config: constant data takes at most one parameter");
    if (sc.data_preset == "affine" && (sc.data_params.size() < 2 || sc.data_params.size() > 3))
        throw std::invalid_argument("config: affine data takes parameters [bx, by] or [bx, by, c]");
    if (sc.data_preset == "aronsson" && !sc.data_params.empty())
        throw std::invalid_argument("config: aronsson data takes no parameters");
    if (sc.data_preset == "flat" && sc.data_params.size() != 1)
        throw std::invalid_argument("config: flat data takes one parameter (lambda)");
    if (sc.data_preset != "constant" && sc.data_preset != "affine" &&
        sc.data_preset != "aronsson" && sc.data_preset != "flat")
        throw std::invalid_argument("config: unknown boundary data preset '" + sc.data_preset +
                                    "'");

    if (root.contains("eps_schedule")) {
        const json& es = root.at("eps_schedule");
        require_keys(es, "eps_schedule", {"eps0", "ratio", "count"});
        sc.schedule.eps0 = get_field_or<double>(es, "eps_schedule", "eps0", sc.schedule.eps0);
        sc.schedule.ratio = get_field_or<double>(es, "eps_schedule", "ratio", sc.schedule.ratio);
        sc.schedule.count = get_field_or<int>(es, "eps_schedule", "count", sc.schedule.count);
    }
    sc.schedule.validate();

    if (root.contains("solver")) {
        const json& so = root.at("solver");
        require_keys(so, "solver",
                     {"grad_tol", "max_newton_iters", "armijo_slope_frac", "armijo_backtrack"});
        sc.grad_tol = get_field_or<double>(so, "solver", "grad_tol", sc.grad_tol);
        sc.max_newton_iters =
            get_field_or<int>(so, "solver", "max_newton_iters", sc.max_newton_iters);
        sc.armijo_slope_frac =
            get_field_or<double>(so, "solver", "armijo_slope_frac", sc.armijo_slope_frac);
        sc.armijo_backtrack =
            get_field_or<double>(so, "solver", "armijo_backtrack", sc.armijo_backtrack);
    }

    if (root.contains("suites")) {
        sc.suites = get_field<std::vector<std::string>>(root, "top level", "suites");
        for (const auto& s : sc.suites)
            if (!kSuites.contains(s))
                throw std::invalid_argument("config: unknown suite '" + s + "'");
    } else {
        sc.suites = {"max_principle", "gradient_bound", "holder", "slope_monotonicity"};
        if (sc.data_preset == "flat") sc.suites.push_back("flatness");
    }

    if (root.contains("barrier")) {
        const json& ba = root.at("barrier");
        require_keys(ba, "barrier", {"vertex", "amplitude", "gamma"});
        const auto v = get_field_or<std::vector<double>>(ba, "barrier", "vertex",
                                                         {sc.ax, sc.ay});
        if (v.size() != 2) throw std::invalid_argument("config: barrier vertex must be [x, y]");
        sc.barrier.vertex = {v[0], v[1]};
        sc.barrier.amplitude = get_field_or<double>(ba, "barrier", "amplitude", 1.5);
        sc.barrier.exponent = get_field_or<double>(ba, "barrier", "gamma", 0.5);
        sc.barrier_given = true;
    } else {
        sc.barrier.vertex = {sc.ax, sc.ay};
        sc.barrier.amplitude = 1.5;
        sc.barrier.exponent = 0.5;
    }
    sc.barrier.validate();

    sc.seed = get_field_or<std::uint64_t>(root, "top level", "seed", 0);
    sc.output_dir = get_field_or<std::string>(root, "top level", "output_dir", "out");

    // validate the presets eagerly so a bad config fails in `check` mode
    make_preset(Grid2D(17, 17, sc.ax, sc.ay, (sc.bx - sc.ax) / 16.0), sc.coeff_preset,
                sc.coeff_params);
    return sc;
}

Scenario parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

namespace {

json check_entry(const std::string& name, const CheckReport& rep, bool diagnostic) {
    json e;
    e["name"] = name;
    if (rep.flagged())
        e["pass"] = nullptr;
    else
        e["pass"] = rep.passed();
    e["diagnostic"] = diagnostic;
    return e;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

RunResult run_scenario(const Scenario& sc, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);

    const Grid2D grid = sc.make_grid();
    const CoefficientField coeff = sc.make_coefficients();
    const ScalarField data = sc.make_boundary_data(grid);

    const auto t_solve0 = std::chrono::steady_clock::now();
    const ContinuationReport cont = continuation(data, coeff, sc.make_solve_config());
    const double solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_solve0).count();

    for (size_t s = 0; s < cont.solutions.size(); ++s)
        write_csv(cont.solutions[s].u,
                  (fs::path(out_dir) / ("solution_eps_" + std::to_string(s) + ".csv")).string());
    write_text(fs::path(out_dir) / "continuation.json", cont.report_json());

    json checks = json::array();
    bool any_fail = false, any_flag = false;
    const auto note = [&](const json& e) {
        if (e["pass"].is_null()) {
            any_flag = true;
        } else if (!e["pass"].get<bool>() && !e["diagnostic"].get<bool>()) {
            any_fail = true;
        }
    };

    for (const auto& suite : sc.suites) {
        if (suite == "max_principle") {
            CheckReport worst;
            bool first = true;
            for (const auto& sol : cont.solutions) {
                CheckReport rep = check_max_principle(sol, data);
                if (first || rep.measured["excess"] > worst.measured["excess"]) worst = rep;
                first = false;
            }
            write_text(fs::path(out_dir) / "report_max_principle.json", worst.to_json());
            json e = check_entry("max_principle", worst, false);
            checks.push_back(e);
            note(e);
        } else if (suite == "gradient_bound") {
            const IndexSet v = continuation_inset_mask(grid);
            CheckReport rep;
            rep.name = "gradient_bound";
            for (size_t s = 0; s < cont.solutions.size(); ++s)
                rep.measured["sup_eps_" + std::to_string(s)] =
                    interior_gradient_bound(cont.solutions[s].u, v);
            rep.measured["sup_over_schedule"] = interior_gradient_bound(cont.solutions, v);
            rep.status = CheckReport::Status::Pass;  // recorded constant, no threshold
            write_text(fs::path(out_dir) / "report_gradient_bound.json", rep.to_json());
            json e = check_entry("gradient_bound", rep, true);
            checks.push_back(e);
            note(e);
        } else if (suite == "holder") {
            CheckReport rep = boundary_holder_check(cont.solutions, data, sc.barrier);
            write_text(fs::path(out_dir) / "report_holder.json", rep.to_json());
            json e = check_entry("holder", rep, false);
            checks.push_back(e);
            note(e);
        } else if (suite == "barrier") {
            CheckReport rep;
            if (sc.barrier.gamma_tilde(coeff.ellipticity) <= 0.0) {
                rep.name = "barrier_supersolution";
                rep.hypothesis_flags = {{"gamma_tilde_positive", false},
                                        {"l_below_2_14", coeff.below_2_pow_14()}};
                rep.measured = {{"gamma_tilde", sc.barrier.gamma_tilde(coeff.ellipticity)},
                                {"ellipticity", coeff.ellipticity}};
                rep.status = CheckReport::Status::Flagged;
            } else {
                const double eps_last = sc.schedule.eps_at(sc.schedule.count - 1);
                rep = barrier_supersolution_check(sc.barrier, coeff, eps_last);
            }
            write_text(fs::path(out_dir) / "report_barrier.json", rep.to_json());
            json e = check_entry("barrier", rep, false);
            checks.push_back(e);
            note(e);
        } else if (suite == "flatness") {
            CheckReport rep;
            rep.name = "flatness";
            if (sc.data_preset != "flat") {
                rep.hypothesis_flags = {{"data_is_flat", false}};
                rep.status = CheckReport::Status::Flagged;
                write_text(fs::path(out_dir) / "report_flatness.json", rep.to_json());
            } else {
                const FlatnessReport fr =
                    flatness_check(cont.solutions.back(), sc.data_params[0], coeff);
                write_text(fs::path(out_dir) / "report_flatness.json", fr.to_json());
                rep.status = fr.flagged() ? CheckReport::Status::Flagged
                                          : CheckReport::Status::Pass;
            }
            json e = check_entry("flatness", rep, false);
            checks.push_back(e);
            note(e);
        } else if (suite == "slope_monotonicity") {
            const ScalarField& u = cont.solutions.back().u;
            const int ci = grid.nx / 2, cj = grid.ny / 2;
            const int center = grid.idx(ci, cj);
            const DistanceField dist = intrinsic_distance(coeff, center);
            CheckReport rep;
            rep.name = "slope_monotonicity";
            std::vector<double> values;
            for (double r : {4.0 * grid.h, 8.0 * grid.h, 16.0 * grid.h, 32.0 * grid.h}) {
                try {
                    values.push_back(slope(u, center, r, dist));
                    rep.measured["s_plus_" + std::to_string(values.size())] = values.back();
                } catch (const std::runtime_error&) {
                    break;  // shell left the domain; keep the resolvable prefix
                }
            }
            bool mono = values.size() >= 2;
            double vmax = 0.0;
            for (double v : values) vmax = std::max(vmax, std::abs(v));
            const double tol = 2.0 * shell_halfwidth(grid.h) / (4.0 * grid.h) *
                               std::max(vmax, 1e-12);
            for (size_t s = 0; s + 1 < values.size(); ++s)
                if (values[s] > values[s + 1] + tol) mono = false;
            rep.measured["tolerance"] = tol;
            rep.status = mono ? CheckReport::Status::Pass : CheckReport::Status::Fail;
            write_text(fs::path(out_dir) / "report_slope_monotonicity.json", rep.to_json());
            json e = check_entry("slope_monotonicity", rep, false);
            checks.push_back(e);
            note(e);
        } else if (suite == "am_probe") {
            const ScalarField& u = cont.solutions.back().u;
            const double side = std::min(sc.bx - sc.ax, sc.by - sc.ay);
            const std::array<double, 2> c{0.5 * (sc.ax + sc.bx), 0.5 * (sc.ay + sc.by)};
            const IndexSet mask = ball_mask(grid, c, 0.3 * side);
            ScalarField v = u;
            const double rb = 0.22 * side;
            for (int k : ball_mask(grid, c, rb)) {
                const auto p = grid.point(k);
                const double rr = std::hypot(p[0] - c[0], p[1] - c[1]) / rb;
                const double prof = std::cos(0.5 * 3.141592653589793 * rr);
                v.v[k] += 0.1 * prof * prof;
            }
            const MinimizerProbe probe = absolute_minimizer_probe(u, coeff, mask, v);
            CheckReport rep;
            rep.name = "am_probe";
            rep.measured = {{"f_u", probe.f_u}, {"f_v", probe.f_v}};
            rep.status = probe.pass ? CheckReport::Status::Pass : CheckReport::Status::Fail;
            write_text(fs::path(out_dir) / "report_am_probe.json", rep.to_json());
            json e = check_entry("am_probe", rep, true);
            checks.push_back(e);
            note(e);
        }
    }

    json summary;
    summary["scenario_hash"] = sc.hash();
    summary["checks"] = checks;
    summary["timings"] = {{"total_s", std::chrono::duration<double>(
                                          std::chrono::steady_clock::now() - t_start)
                                          .count()},
                          {"solve_s", solve_seconds}};
    RunResult result;
    result.summary_json = summary.dump(2);
    write_text(fs::path(out_dir) / "summary.json", result.summary_json);
    result.exit_code = any_fail ? 1 : (any_flag ? 2 : 0);
    return result;
}

int run_config_file(const std::string& config_path, const std::string& out_dir_override,
                    const std::vector<std::string>& suite_override) {
    std::string out_dir = out_dir_override.empty() ? "out" : out_dir_override;
    try {
        Scenario sc = parse_config_file(config_path);
        if (!suite_override.empty()) {
            for (const auto& s : suite_override)
                if (!kSuites.contains(s))
                    throw std::invalid_argument("unknown suite '" + s + "'");
            sc.suites = suite_override;
        }
        if (out_dir_override.empty() && !sc.output_dir.empty()) out_dir = sc.output_dir;
        return run_scenario(sc, out_dir).exit_code;
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        try {
            std::filesystem::create_directories(out_dir);
            std::ofstream out(std::filesystem::path(out_dir) / "error.json");
            out << err.dump(2);
        } catch (...) {
        }
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

int check_config_file(const std::string& config_path) {
    try {
        const Scenario sc = parse_config_file(config_path);
        printf("ok %s\n", sc.hash().c_str());
        return 0;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace aronsson
