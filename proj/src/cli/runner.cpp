#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "model_build.hpp"
#include "reports.hpp"

#include "qbsdej/decompositions.hpp"
#include "qbsdej/duality.hpp"
#include "qbsdej/errors.hpp"
#include "qbsdej/g_expectation.hpp"
#include "qbsdej/numerics.hpp"
#include "qbsdej/risk_sharing.hpp"
#include "qbsdej/solver.hpp"

namespace qbsdej::cli {
namespace {

// Raised by task bodies when a checked mathematical property fails; the
// report set is still written so the violation can be inspected.
struct PropertyViolation {
    std::string message;
    ReportSet reports;
};

struct TaskContext {
    const Config& cfg;
    Experiment ex;
    std::string hash;
};

nlohmann::json model_echo(const Experiment& ex) {
    nlohmann::json j;
    j["horizon"] = ex.grid.horizon;
    j["steps"] = ex.grid.steps;
    j["dt"] = ex.grid.dt;
    j["mark_count"] = ex.marks.size();
    auto marks = nlohmann::json::array();
    auto weights = nlohmann::json::array();
    for (int i = 0; i < ex.marks.size(); ++i) {
        marks.push_back(ex.marks.mark(i));
        weights.push_back(ex.marks.weight(i, 0.0));
    }
    j["marks"] = marks;
    j["weights_at_0"] = weights;
    j["generator"] = ex.generator.name;
    return j;
}

CsvTable slice_stats(const Lattice& lat, const std::vector<std::vector<double>>& per_slice,
                     int slices) {
    CsvTable t;
    t.columns = {"k", "t", "min", "max"};
    for (int k = 0; k < slices; ++k) {
        const auto& v = per_slice[static_cast<std::size_t>(k)];
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        t.rows.push_back({static_cast<double>(k), lat.grid().time(k), *lo, *hi});
    }
    return t;
}

// ---------------------------------------------------------------- solve ----

ReportSet task_solve(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    LatticeSolution sol = solve_lattice(*ex.lattice, ex.generator, ex.payoff);
    DiagnosticsReport diag = bmo_diagnostics(sol);

    ReportSet out;
    out.json_name = "solve_report.json";
    out.json = report_base("solve", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);
    out.json["y0"] = sol.y0();
    out.json["y_sup"] = sol.y_sup;
    out.json["diagnostics"] = {{"z_bmo", diag.z_bmo}, {"u_bmo", diag.u_bmo}};

    if (ex.generator.builtin == GeneratorSpec::Builtin::entropic) {
        const double oracle = entropic_closed_form(*ex.lattice, ex.generator.param1, ex.payoff);
        out.json["oracle"] = {{"value", oracle}, {"abs_gap", std::fabs(sol.y0() - oracle)}};
    }

    if (ctx.cfg.has("task", "paths")) {
        const long long paths = ctx.cfg.get_int("task", "paths");
        BasisSpec basis;
        basis.degree = static_cast<int>(ctx.cfg.get_int("task", "degree", 2));
        PathSet ps = simulate_paths(ex.grid, ex.marks, static_cast<std::size_t>(paths), ex.seed);
        PathSolution mc = solve_lsmc(ps, ex.generator, ex.payoff, basis);
        out.json["lsmc"] = {{"y0", mc.y0},
                            {"y0_out", mc.y0_out},
                            {"y0_out_se", mc.y0_out_se},
                            {"paths", paths},
                            {"degree", basis.degree},
                            {"max_regression_residual", mc.max_regression_residual}};
    }

    out.csv.emplace_back("solve_slices.csv",
                         slice_stats(*ex.lattice, sol.y, ex.grid.steps + 1));
    return out;
}

// ----------------------------------------------------------- properties ----

ReportSet task_properties(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    const int trials = static_cast<int>(ctx.cfg.get_int("task", "trials", 50));
    const double tol = ctx.cfg.get_double("task", "tolerance", 1e-9);
    const int n = ex.grid.steps;
    const int r = static_cast<int>(ctx.cfg.get_int("task", "tc_r", std::max(1, n / 4)));
    const int s = static_cast<int>(ctx.cfg.get_int("task", "tc_s", std::max(r + 1, n / 2)));

    GExpectation ge(*ex.lattice, ex.generator);
    AxiomReport ax = check_axioms(ge, trials, ex.seed);
    const double tc_gap = check_time_consistency(ge, ex.payoff, r, s);

    auto axiom_json = [](const AxiomCheck& c) {
        return nlohmann::json{
            {"applicable", c.applicable}, {"max_violation", c.max_violation}, {"trials", c.trials}};
    };

    double worst = tc_gap;
    for (const AxiomCheck* c :
         {&ax.monotonicity, &ax.cash_additivity, &ax.convexity, &ax.positive_homogeneity})
        if (c->applicable) worst = std::max(worst, c->max_violation);

    ReportSet out;
    out.json_name = "properties_report.json";
    out.json = report_base("properties", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);
    out.json["axioms"] = {{"monotonicity", axiom_json(ax.monotonicity)},
                          {"cash_additivity", axiom_json(ax.cash_additivity)},
                          {"convexity", axiom_json(ax.convexity)},
                          {"positive_homogeneity", axiom_json(ax.positive_homogeneity)}};
    out.json["time_consistency"] = {{"r", r}, {"s", s}, {"gap", tc_gap}};
    out.json["tolerance"] = tol;
    out.json["max_violation"] = worst;
    out.json["passed"] = worst <= tol;

    if (worst > tol)
        throw PropertyViolation{"axiom or time-consistency violation " + format_double(worst) +
                                    " exceeds tolerance " + format_double(tol),
                                std::move(out)};
    return out;
}

// ----------------------------------------------------------------- dual ----

ReportSet task_dual(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    const int trials = static_cast<int>(ctx.cfg.get_int("task", "trials", 100));
    const Lattice& lat = *ex.lattice;
    const int m = ex.marks.size();

    GExpectation ge(lat, ex.generator);
    const LatticeSolution& sol = ge.solve(ex.payoff);
    const double y0 = sol.y0();

    SeededRng rng(ex.seed);
    CsvTable cand;
    cand.columns = {"index", "mu"};
    for (int j = 1; j <= m; ++j) cand.columns.push_back("v" + std::to_string(j));
    cand.columns.push_back("lower_bound");
    cand.columns.push_back("slack");

    double min_slack = std::numeric_limits<double>::infinity();
    int admissible = 0;
    for (int i = 0; i < trials; ++i) {
        const double mu = rng.uniform(-1.0, 1.0);
        std::vector<double> v(static_cast<std::size_t>(m));
        for (auto& vj : v) vj = rng.uniform(-0.9, 1.5);
        double bound;
        try {
            bound = dual_lower_bound(ge, ex.payoff, constant_measure_change(lat, mu, v));
        } catch (const std::invalid_argument&) {
            continue;  // draw breached the admissibility box; skip it
        }
        ++admissible;
        if (!std::isfinite(bound)) continue;  // conjugate unbounded along this density
        const double slack = y0 - bound;
        min_slack = std::min(min_slack, slack);
        std::vector<double> row = {static_cast<double>(i), mu};
        row.insert(row.end(), v.begin(), v.end());
        row.push_back(bound);
        row.push_back(slack);
        cand.rows.push_back(std::move(row));
    }

    MeasureChange opt = optimal_density(ge.lattice(), ex.generator, sol);
    const double dual_at_opt = dual_lower_bound(ge, ex.payoff, opt);
    const double opt_gap = y0 - dual_at_opt;

    // Fenchel-Young residual along the solution, only meaningful when the
    // generator declares its subgradient (the optimizer is then exact).
    double fy_max = 0.0;
    if (ex.generator.subgradient) {
        for (int k = 0; k < ex.grid.steps; ++k) {
            const double t = ex.grid.time(k);
            const std::size_t nodes = sol.z[static_cast<std::size_t>(k)].size();
            for (std::size_t node = 0; node < nodes; ++node) {
                const double zkn = sol.z[static_cast<std::size_t>(k)][node];
                std::span<const double> ukn(
                    sol.u[static_cast<std::size_t>(k)].data() + node * static_cast<std::size_t>(m),
                    static_cast<std::size_t>(m));
                const double mu = opt.mu[static_cast<std::size_t>(k)][node];
                std::span<const double> vv(
                    opt.v[static_cast<std::size_t>(k)].data() + node * static_cast<std::size_t>(m),
                    static_cast<std::size_t>(m));
                double pairing = mu * zkn;
                for (int j = 0; j < m; ++j)
                    pairing += lat.weight(j, k) * vv[static_cast<std::size_t>(j)] *
                               ukn[static_cast<std::size_t>(j)];
                const double resid = std::fabs(legendre_transform(ex.generator, t, mu, vv) +
                                               ex.generator(t, 0.0, zkn, ukn) - pairing);
                fy_max = std::max(fy_max, resid);
            }
        }
    }

    ReportSet out;
    out.json_name = "dual_report.json";
    out.json = report_base("dual", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);
    out.json["y0"] = y0;
    out.json["trials"] = trials;
    out.json["admissible"] = admissible;
    out.json["min_slack"] = std::isfinite(min_slack) ? min_slack : 0.0;
    out.json["optimal"] = {{"lower_bound", dual_at_opt}, {"gap", opt_gap}};
    if (ex.generator.subgradient) out.json["fenchel_young_max"] = fy_max;
    const bool ok = (!std::isfinite(min_slack) || min_slack >= -1e-8) && opt_gap >= -1e-8;
    out.json["passed"] = ok;
    out.csv.emplace_back("dual_candidates.csv", std::move(cand));

    if (!ok)
        throw PropertyViolation{
            "weak duality violated: min slack " +
                format_double(std::min(std::isfinite(min_slack) ? min_slack : 0.0, opt_gap)),
            std::move(out)};
    return out;
}

// -------------------------------------------------------------- infconv ----

ReportSet task_infconv(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    if (!ex.generator2)
        throw std::invalid_argument("config: task infconv needs a [generator2] section");
    const int trials = static_cast<int>(ctx.cfg.get_int("task", "trials", 50));

    RiskTransfer rt = build_transfer(*ex.lattice, ex.generator, *ex.generator2, ex.payoff);
    AuditReport audit = suboptimality_audit(rt, trials, ex.seed);

    ReportSet out;
    out.json_name = "infconv_report.json";
    out.json = report_base("infconv", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);
    out.json["generator2"] = ex.generator2->name;
    out.json["combined_value"] = rt.combined_value;
    out.json["premium"] = rt.premium;
    out.json["decomposition_gap"] = rt.decomposition_gap;
    out.json["max_split_defect"] = rt.max_split_defect;
    out.json["f2_consistency"] = rt.f2_consistency;
    out.json["audit"] = {{"candidates", audit.candidates},
                         {"min_slack", audit.min_slack},
                         {"constructed_gap", audit.constructed_gap},
                         {"constructed_is_minimal", audit.constructed_is_minimal}};
    const bool ok = rt.decomposition_ok && audit.min_slack >= -1e-6 && audit.constructed_is_minimal;
    out.json["passed"] = ok;

    CsvTable split;
    split.columns = {"node", "brownian", "xi", "f1", "f2"};
    const Lattice& lat = *ex.lattice;
    const int n = ex.grid.steps;
    for (std::size_t node = 0; node < rt.xi_values.size(); ++node) {
        split.rows.push_back({static_cast<double>(node),
                              lat.brownian_value(n, static_cast<int>(node)), rt.xi_values[node],
                              rt.f1[node], rt.f2[node]});
    }
    out.csv.emplace_back("infconv_split.csv", std::move(split));

    if (!ok)
        throw PropertyViolation{"risk transfer failed optimality or decomposition checks",
                                std::move(out)};
    return out;
}

// ------------------------------------------------------------ doobmeyer ----

const char* class_name(ProcessClass c) {
    switch (c) {
        case ProcessClass::martingale: return "martingale";
        case ProcessClass::submartingale: return "submartingale";
        case ProcessClass::supermartingale: return "supermartingale";
        default: return "neither";
    }
}

ReportSet task_doobmeyer(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    const double slope = ctx.cfg.get_double("task", "slope", 0.1);
    const double tol = ctx.cfg.get_double("task", "tolerance", 1e-8);

    GExpectation ge(*ex.lattice, ex.generator);
    const LatticeSolution& sol = ge.solve(ex.payoff);
    AdaptedProcess x = drifted_process(ge.lattice(), sol, slope);
    DoobMeyer dm = doob_meyer(ge, x);

    // Predictable increments must not fight the classification.
    double sign_defect = 0.0;
    for (const auto& slice : dm.a_incr)
        for (double d : slice) {
            if (dm.type == ProcessClass::submartingale) sign_defect = std::max(sign_defect, -d);
            if (dm.type == ProcessClass::supermartingale) sign_defect = std::max(sign_defect, d);
            if (dm.type == ProcessClass::martingale) sign_defect = std::max(sign_defect, std::fabs(d));
        }

    ReportSet out;
    out.json_name = "doobmeyer_report.json";
    out.json = report_base("doobmeyer", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);
    out.json["slope"] = slope;
    out.json["type"] = class_name(dm.type);
    out.json["a_consistency"] = dm.a_consistency;
    out.json["max_recon_residual"] = dm.max_recon_residual;
    out.json["increment_sign_defect"] = sign_defect;
    const bool ok =
        dm.max_recon_residual <= tol && dm.a_consistency <= tol && sign_defect <= 1e-10;
    out.json["passed"] = ok;
    out.csv.emplace_back("doobmeyer_a.csv",
                         slice_stats(*ex.lattice, dm.a, ex.grid.steps + 1));

    if (!ok)
        throw PropertyViolation{"Doob-Meyer reconstruction exceeded tolerance", std::move(out)};
    return out;
}

// ----------------------------------------------------------- upcrossing ----

ReportSet task_upcrossing(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    const double a = ctx.cfg.get_double("task", "a");
    const double b = ctx.cfg.get_double("task", "b");
    const double theta = ctx.cfg.get_double("task", "theta");
    const double slope = ctx.cfg.get_double("task", "slope", 0.0);

    GExpectation ge(*ex.lattice, ex.generator);
    const LatticeSolution& sol = ge.solve(ex.payoff);
    AdaptedProcess x = drifted_process(ge.lattice(), sol, slope);

    ReportSet out;
    out.json_name = "upcrossing_report.json";
    out.json = report_base("upcrossing", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);

    std::string failure;
    UpcrossingReport rep;
    try {
        rep = verify_upcrossing_bound(ge, x, a, b, theta);
    } catch (const NumericalError& e) {
        // verify throws precisely when the count exceeds the bound beyond
        // Monte Carlo noise; that is a property violation, not a solver
        // breakdown.
        failure = e.what();
        rep.a = a;
        rep.b = b;
        rep.theta = theta;
    }
    out.json["a"] = rep.a;
    out.json["b"] = rep.b;
    out.json["theta"] = rep.theta;
    out.json["expected_count"] = rep.expected_count;
    out.json["standard_error"] = rep.standard_error;
    out.json["bound"] = rep.bound;
    out.json["margin"] = rep.margin;
    out.json["x_sup"] = rep.x_sup;
    out.json["j_const"] = rep.j_const;
    out.json["k_theta"] = rep.k_theta;
    out.json["passed"] = failure.empty();

    const auto builtin = ex.generator.builtin;
    if (failure.empty() && (builtin == GeneratorSpec::Builtin::linear ||
                            builtin == GeneratorSpec::Builtin::royer)) {
        DensityBoundReport db = verify_upcrossing_density_bound(ge, x, a, b);
        out.json["density"] = {{"expected_count", db.expected_count},
                               {"bound", db.bound},
                               {"margin", db.margin},
                               {"k_used", db.k_used},
                               {"j_const", db.j_const}};
        if (db.margin < 0.0) failure = "tilted-measure upcrossing bound violated";
        out.json["passed"] = failure.empty();
    }

    if (!failure.empty()) throw PropertyViolation{failure, std::move(out)};
    return out;
}

// -------------------------------------------------------------- recover ----

ReportSet task_recover(TaskContext& ctx) {
    const Experiment& ex = ctx.ex;
    const int m = ex.marks.size();
    const double y0 = ctx.cfg.get_double("task", "y0", 0.0);
    const double z0 = ctx.cfg.get_double("task", "z0");
    std::vector<double> u0 = ctx.cfg.get_doubles(
        "task", "u0", std::vector<double>(static_cast<std::size_t>(m), 0.0));
    if (static_cast<int>(u0.size()) != m)
        throw std::invalid_argument("config: [task] u0 needs one entry per mark");
    const int k = static_cast<int>(ctx.cfg.get_int("task", "k", 0));
    const int h = static_cast<int>(ctx.cfg.get_int("task", "h", 1));

    GExpectation ge(*ex.lattice, ex.generator);
    const double slope = recover_generator(ge, y0, z0, u0, k, h);
    const double direct = ex.generator(ex.grid.time(k), y0, z0, u0);

    ReportSet out;
    out.json_name = "recover_report.json";
    out.json = report_base("recover", ctx.hash, ex.seed);
    out.json["model"] = model_echo(ex);
    out.json["k"] = k;
    out.json["h"] = h;
    out.json["y0"] = y0;
    out.json["z0"] = z0;
    out.json["u0"] = u0;
    out.json["slope"] = slope;
    out.json["generator_value"] = direct;
    out.json["abs_error"] = std::fabs(slope - direct);
    return out;
}

}  // namespace

int run_task(const RunOptions& opts) {
    try {
        Config cfg = Config::load(opts.config_path);
        TaskContext ctx{cfg, build_experiment(cfg), config_hash_hex(cfg.raw())};
        if (opts.seed) ctx.ex.seed = *opts.seed;

        ReportSet reports;
        if (opts.task == "solve") reports = task_solve(ctx);
        else if (opts.task == "properties") reports = task_properties(ctx);
        else if (opts.task == "dual") reports = task_dual(ctx);
        else if (opts.task == "infconv") reports = task_infconv(ctx);
        else if (opts.task == "doobmeyer") reports = task_doobmeyer(ctx);
        else if (opts.task == "upcrossing") reports = task_upcrossing(ctx);
        else if (opts.task == "recover") reports = task_recover(ctx);
        else throw std::invalid_argument("unknown task: " + opts.task);

        reports.write_all(opts.out_dir);
        return 0;
    } catch (const PropertyViolation& v) {
        // Still record what was measured; the exit code flags the failure.
        try {
            v.reports.write_all(opts.out_dir);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 3;
        }
        std::cerr << "property violation: " << v.message << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace qbsdej::cli
