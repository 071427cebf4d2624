#include "mephd/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mephd/divergence.hpp"
#include "mephd/dual_solver.hpp"
#include "mephd/errors.hpp"
#include "mephd/estimator.hpp"
#include "mephd/inference.hpp"
#include "mephd/model.hpp"
#include "mephd/montecarlo.hpp"
#include "mephd/primal_oracle.hpp"

namespace mephd {

namespace {

using nlohmann::json;

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || (*end != '\0' && *end != ' '))
            throw Error("bad numeric list entry: " + item);
        out.push_back(v);
    }
    if (out.empty()) throw Error("empty numeric list");
    return out;
}

std::vector<int> parse_ints(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_doubles(csv)) out.push_back(static_cast<int>(v));
    return out;
}

json mat_to_json(const la::Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json dual_to_json(const DualSolution& sol) {
    return json{{"theta", sol.theta},
                {"c", sol.c},
                {"value", sol.value},
                {"weights", sol.weights},
                {"converged", sol.converged},
                {"iterations", sol.iterations},
                {"status", to_string(sol.status)},
                {"grad_norm", sol.grad_norm}};
}

json estimation_to_json(const EstimationResult& r) {
    json trace = json::array();
    for (const auto& p : r.profile_trace) {
        trace.push_back(json{{"theta", p.theta},
                             {"value", std::isfinite(p.value) ? json(p.value) : json()},
                             {"converged", p.converged}});
    }
    json j{{"theta_hat", r.theta_hat},
           {"c_hat", r.c_hat},
           {"value", r.value},
           {"weights", r.weights},
           {"variance_theta", mat_to_json(r.variance_theta)},
           {"variance_c", mat_to_json(r.variance_c)},
           {"profile_grad", r.profile_grad},
           {"profile_trace", trace}};
    if (r.misspec_cov) j["misspec_cov"] = mat_to_json(*r.misspec_cov);
    return j;
}

json report_to_json(const TestReport& r) {
    json j{{"statistic", r.statistic}, {"df", r.df},
           {"p_value", r.p_value},     {"alpha", r.alpha},
           {"critical_value", r.critical_value}, {"reject", r.reject}};
    if (r.h1_sigma2) j["h1_sigma2"] = *r.h1_sigma2;
    return j;
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        if (text.empty() || text.back() != '\n') out << "\n";
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw Error("cannot write " + out_path);
    f << text;
    if (text.empty() || text.back() != '\n') f << "\n";
}

struct CommonArgs {
    std::string data_path;
    std::string model_name = "qinlawless";
    std::string divergence_name = "klm";
    std::string out_path;
    double alpha = 0.05;
    SolverConfig solver;

    MomentModel model() const { return builtin_model(model_name); }
    Divergence spec() const { return divergence_by_name(divergence_name); }
    Sample sample() const {
        if (data_path.empty()) throw Error("--data is required");
        return load_sample(data_path, builtin_model(model_name).obs_dim);
    }
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data = true) {
    auto* data = cmd->add_option("--data", args.data_path, "CSV with one observation per row");
    if (needs_data) data->required();
    cmd->add_option("--model", args.model_name, "qinlawless|mean1|normal2")
        ->capture_default_str();
    cmd->add_option("--divergence", args.divergence_name,
                    "chi2m|klm|hellinger|kl|chi2|power:<gamma>")
        ->capture_default_str();
    cmd->add_option("--alpha", args.alpha, "test level in (0,1)")->capture_default_str();
    cmd->add_option("--out", args.out_path, "write the result to this file instead of stdout");
    cmd->add_option("--grad-tol", args.solver.grad_tol, "inner solver gradient tolerance")
        ->capture_default_str();
    cmd->add_option("--max-iter", args.solver.max_iter, "inner solver iteration cap")
        ->capture_default_str();
}

// Custom scenario description, e.g.
//   {"name": "tilted", "theta0": 1.5, "sizes": [50, 100], "reps": 400,
//    "divergences": ["hellinger"], "seed": 9,
//    "contamination": {"kind": "point_mass", "eps": 0.1, "at": 4.0}}
// contamination.kind may also be "inlier_cut" (with "lo"/"hi") or "none".
ScenarioConfig scenario_from_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot read " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw Error("bad scenario JSON: " + std::string(e.what()));
    }
    ScenarioConfig cfg;
    cfg.name = j.value("name", std::string("custom"));
    cfg.theta0 = j.value("theta0", 0.0);
    if (j.contains("sizes")) cfg.sizes = j["sizes"].get<std::vector<int>>();
    cfg.reps = j.value("reps", cfg.reps);
    if (j.contains("divergences"))
        cfg.divergences = j["divergences"].get<std::vector<std::string>>();
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("contamination")) {
        const auto& c = j["contamination"];
        const std::string kind = c.value("kind", std::string("none"));
        if (kind == "point_mass") {
            cfg.kind = Contamination::point_mass;
            cfg.eps = c.value("eps", 0.0);
            cfg.atom = c.value("at", 0.0);
        } else if (kind == "inlier_cut") {
            cfg.kind = Contamination::inlier_cut;
            cfg.cut_lo = c.value("lo", 0.0);
            cfg.cut_hi = c.value("hi", 0.0);
        } else if (kind != "none") {
            throw Error("unknown contamination kind: " + kind);
        }
    }
    return cfg;
}

GridSpec parse_grid(const std::string& text, int d) {
    GridSpec gs;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ',')) {
        std::stringstream as(axis);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(as, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw Error("grid axis must be lo:hi:steps");
        gs.lo.push_back(std::strtod(parts[0].c_str(), nullptr));
        gs.hi.push_back(std::strtod(parts[1].c_str(), nullptr));
        gs.steps.push_back(std::atoi(parts[2].c_str()));
    }
    if (static_cast<int>(gs.lo.size()) != d)
        throw Error("grid must provide one lo:hi:steps block per parameter");
    return gs;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"minimum empirical phi-divergence estimation for moment-condition models"};
    app.require_subcommand(1);

    // ---- estimate ----
    CommonArgs est_args;
    std::string est_theta_init;
    auto* est = app.add_subcommand("estimate", "minimize the divergence profile over theta");
    add_common(est, est_args);
    est->add_option("--theta-init", est_theta_init, "comma-separated start for theta");

    // ---- project ----
    CommonArgs proj_args;
    std::string proj_theta;
    auto* proj = app.add_subcommand("project", "projection weights at a fixed theta");
    add_common(proj, proj_args);
    proj->add_option("--theta", proj_theta, "comma-separated theta")->required();

    // ---- verify ----
    CommonArgs ver_args;
    std::string ver_theta;
    auto* ver = app.add_subcommand("verify",
                                   "cross-check the dual solution against the primal oracle");
    add_common(ver, ver_args);
    ver->add_option("--theta", ver_theta, "comma-separated theta")->required();

    // ---- test-model ----
    CommonArgs tm_args;
    auto* tm = app.add_subcommand("test-model", "over-identification test (df = l - d)");
    add_common(tm, tm_args);

    // ---- test-point ----
    CommonArgs tp_args;
    std::string tp_theta;
    auto* tp = app.add_subcommand("test-point", "simple parameter test (df = d)");
    add_common(tp, tp_args);
    tp->add_option("--theta", tp_theta, "hypothesized theta")->required();

    // ---- test-composite ----
    CommonArgs tc_args;
    std::string tc_fix;
    bool tc_raw = false;
    auto* tc = app.add_subcommand("test-composite",
                                  "composite test fixing one normal2 coordinate");
    add_common(tc, tc_args);
    tc->add_option("--fix", tc_fix, "mu=<value> or v=<value>")->required();
    tc->add_flag("--raw-statistic", tc_raw, "report the unnormalized statistic");

    // ---- cr ----
    CommonArgs cr_args;
    std::string cr_grid;
    double cr_level = 0.95;
    int cr_jobs = 1;
    auto* crc = app.add_subcommand("cr", "confidence region on a theta grid");
    add_common(crc, cr_args);
    crc->add_option("--level", cr_level, "confidence level")->capture_default_str();
    crc->add_option("--grid", cr_grid, "lo:hi:steps per parameter, comma separated")
        ->required();
    crc->add_option("--jobs", cr_jobs, "worker threads for the grid")->capture_default_str();

    // ---- cdf ----
    CommonArgs cdf_args;
    std::string cdf_at;
    std::string cdf_theta_init;
    bool cdf_monotone = false;
    auto* cdfc = app.add_subcommand("cdf", "weighted distribution-function estimate");
    add_common(cdfc, cdf_args);
    cdfc->add_option("--at", cdf_at, "comma-separated evaluation points")->required();
    cdfc->add_option("--theta-init", cdf_theta_init, "comma-separated start for theta");
    cdfc->add_flag("--monotone", cdf_monotone, "apply a running-max rectification");

    // ---- simulate ----
    std::string sim_scenario;
    std::string sim_config;
    std::string sim_sizes;
    std::string sim_out;
    int sim_reps = -1;
    long long sim_seed = -1;
    int sim_jobs = 1;
    bool sim_csv = false;
    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo scenario");
    auto* scen_opt =
        sim->add_option("--scenario", sim_scenario, "example1a|example1b|example2a|example2b");
    sim->add_option("--config", sim_config, "JSON file with a custom scenario")
        ->excludes(scen_opt);
    sim->add_option("--reps", sim_reps, "replications per sample size");
    sim->add_option("--sizes", sim_sizes, "comma-separated sample sizes");
    sim->add_option("--seed", sim_seed, "base seed (MEPHD_SEED overrides)");
    sim->add_option("--jobs", sim_jobs, "worker threads")->capture_default_str();
    sim->add_option("--out", sim_out, "write the report to this file");
    sim->add_flag("--csv", sim_csv, "emit the wide per-n table instead of JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::stringstream ss;
        const int code = app.exit(e, ss, ss);
        (code == 0 ? out : err) << ss.str();
        return code == 0 ? 0 : 2;
    }

    try {
        if (est->parsed()) {
            auto model = est_args.model();
            auto spec = est_args.spec();
            auto sample = est_args.sample();
            std::optional<std::vector<double>> init;
            if (!est_theta_init.empty()) init = parse_doubles(est_theta_init);
            EstimationResult r = estimate(model, spec, sample, est_args.solver,
                                          init ? &*init : nullptr);
            try {
                r.misspec_cov = misspec_covariance(model, spec, sample, r.theta_hat, r.c_hat);
            } catch (const SingularMatrixError&) {
            }
            emit(estimation_to_json(r).dump(2), est_args.out_path, out);
            return 0;
        }
        if (proj->parsed()) {
            auto model = proj_args.model();
            auto sol = solve_inner(model, proj_args.spec(), proj_args.sample(),
                                   parse_doubles(proj_theta), proj_args.solver);
            if (!sol.converged) {
                out << json{{"error", "NotConverged"},
                            {"reason", to_string(sol.status)},
                            {"iterations", sol.iterations},
                            {"grad_norm", sol.grad_norm}}
                           .dump(2)
                    << "\n";
                return 3;
            }
            emit(dual_to_json(sol).dump(2), proj_args.out_path, out);
            return 0;
        }
        if (ver->parsed()) {
            auto model = ver_args.model();
            auto spec = ver_args.spec();
            auto sample = ver_args.sample();
            auto theta = parse_doubles(ver_theta);
            auto dual = solve_inner(model, spec, sample, theta, ver_args.solver);
            if (!dual.converged) {
                out << json{{"error", "NotConverged"}, {"reason", to_string(dual.status)}}
                           .dump(2)
                    << "\n";
                return 3;
            }
            auto primal = primal_project(model, spec, sample, theta);
            double wgap = 0.0;
            for (int i = 0; i < sample.n; ++i)
                wgap = std::max(wgap, std::fabs(primal.weights[i] - dual.weights[i]));
            emit(json{{"dual", dual_to_json(dual)},
                      {"primal",
                       {{"weights", primal.weights},
                        {"value", primal.value},
                        {"kkt_residual", primal.kkt_residual}}},
                      {"value_gap", std::fabs(primal.value - dual.value)},
                      {"max_weight_gap", wgap}}
                     .dump(2),
                 ver_args.out_path, out);
            return 0;
        }
        if (tm->parsed()) {
            auto r = model_test(tm_args.model(), tm_args.spec(), tm_args.sample(),
                                tm_args.alpha, tm_args.solver);
            emit(report_to_json(r).dump(2), tm_args.out_path, out);
            return 0;
        }
        if (tp->parsed()) {
            auto r = simple_test(tp_args.model(), tp_args.spec(), tp_args.sample(),
                                 parse_doubles(tp_theta), tp_args.alpha, tp_args.solver);
            emit(report_to_json(r).dump(2), tp_args.out_path, out);
            return 0;
        }
        if (tc->parsed()) {
            auto model = tc_args.model();
            if (model.name != "normal2")
                throw Error("test-composite ships builtin restrictions for normal2 only");
            const auto eq = tc_fix.find('=');
            if (eq == std::string::npos) throw Error("--fix expects mu=<v> or v=<v>");
            const std::string which = tc_fix.substr(0, eq);
            const double fixed = std::strtod(tc_fix.c_str() + eq + 1, nullptr);
            CompositeHypothesis hyp;
            if (which == "mu") {
                hyp.f = [fixed](const std::vector<double>& b) {
                    return std::vector<double>{fixed, b[0]};
                };
                hyp.beta_box = {model.theta_box[1]};
            } else if (which == "v") {
                hyp.f = [fixed](const std::vector<double>& b) {
                    return std::vector<double>{b[0], fixed};
                };
                hyp.beta_box = {model.theta_box[0]};
            } else {
                throw Error("--fix expects mu=<v> or v=<v>");
            }
            auto r = composite_test(model, tc_args.spec(), tc_args.sample(), hyp,
                                    tc_args.alpha, tc_args.solver, tc_raw);
            emit(report_to_json(r).dump(2), tc_args.out_path, out);
            return 0;
        }
        if (crc->parsed()) {
            auto model = cr_args.model();
            auto region = confidence_region(model, cr_args.spec(), cr_args.sample(),
                                            cr_level, parse_grid(cr_grid, model.d),
                                            cr_args.solver, cr_jobs);
            json intervals = json::array();
            for (const auto& iv : region.intervals)
                intervals.push_back(json{{"lo", iv.first}, {"hi", iv.second}});
            emit(json{{"level", region.level},
                      {"theta_grid", region.theta_grid},
                      {"inside", region.inside},
                      {"solver_failed", region.solver_failed},
                      {"intervals", intervals}}
                     .dump(2),
                 cr_args.out_path, out);
            return 0;
        }
        if (cdfc->parsed()) {
            auto model = cdf_args.model();
            auto spec = cdf_args.spec();
            auto sample = cdf_args.sample();
            std::optional<std::vector<double>> init;
            if (!cdf_theta_init.empty()) init = parse_doubles(cdf_theta_init);
            EstimationResult r = estimate(model, spec, sample, cdf_args.solver,
                                          init ? &*init : nullptr);
            auto xs = parse_doubles(cdf_at);
            auto rows = cdf_estimate(model, r, sample, xs);
            if (cdf_monotone) {
                double run = 0.0;
                for (auto& row : rows) {
                    run = std::max(run, row.value);
                    row.value = run;
                }
            }
            std::ostringstream csv;
            csv.precision(17);
            csv << "x,Fhat,Fn,W\n";
            for (const auto& row : rows)
                csv << row.x << "," << row.value << "," << row.empirical_value << ","
                    << row.variance << "\n";
            emit(csv.str(), cdf_args.out_path, out);
            return 0;
        }
        if (sim->parsed()) {
            ScenarioConfig cfg;
            if (!sim_config.empty()) {
                cfg = scenario_from_json(sim_config);
            } else if (!sim_scenario.empty()) {
                cfg = builtin_scenario(sim_scenario);
            } else {
                throw Error("simulate needs --scenario or --config");
            }
            if (sim_reps > 0) cfg.reps = sim_reps;
            if (!sim_sizes.empty()) cfg.sizes = parse_ints(sim_sizes);
            if (sim_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sim_seed);
            if (const char* env = std::getenv("MEPHD_SEED"))
                cfg.seed = std::strtoull(env, nullptr, 10);
            ScenarioReport report = run_scenario(cfg, sim_jobs);
            if (sim_csv) {
                emit(report_csv(report), sim_out, out);
                return 0;
            }
            json rows = json::array();
            for (const auto& r : report.rows)
                rows.push_back(json{{"estimator", r.estimator},
                                    {"n", r.n},
                                    {"mean", r.mean},
                                    {"var", r.var},
                                    {"mse", r.mse},
                                    {"failures", r.failures}});
            emit(json{{"config",
                       {{"name", cfg.name},
                        {"theta0", cfg.theta0},
                        {"sizes", cfg.sizes},
                        {"reps", cfg.reps},
                        {"divergences", cfg.divergences},
                        {"seed", cfg.seed}}},
                      {"rows", rows}}
                     .dump(2),
                 sim_out, out);
            return 0;
        }
    } catch (const NotConvergedError& e) {
        out << json{{"error", "NotConverged"}, {"reason", e.what()}}.dump(2) << "\n";
        return 3;
    } catch (const NoFeasibleThetaError& e) {
        out << json{{"error", "NoFeasibleTheta"}, {"reason", e.what()}}.dump(2) << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << "error: no subcommand\n";
    return 2;
}

} // namespace mephd
