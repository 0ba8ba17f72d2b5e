#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qfc/bellman_solver.hpp"
#include "qfc/cli.hpp"
#include "qfc/lq_exact.hpp"
#include "qfc/value_grid_io.hpp"

namespace qfc::cli {

namespace {

using nlohmann::json;

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char c : s) {
        q += c;
        if (c == '"') {
            q += '"';
        }
    }
    return q + "\"";
}

// Writes to `path` atomically, or to `out` when no path is configured.
void emit(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty()) {
        out << text;
        out.flush();
        return;
    }
    write_file_atomic(path, [&](std::ostream& os) { os << text; });
}

std::size_t checked_steps(const ExperimentConfig& cfg, const ModelParams& params)
{
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) {
        throw ConfigError("dt", "must be finite and positive");
    }
    try {
        return step_count(params.horizon(), cfg.dt);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("dt", e.what());
    }
}

void check_paths(const ExperimentConfig& cfg)
{
    if (cfg.n_paths == 0) {
        throw ConfigError("n-paths", "at least one path is required");
    }
}

json summary_json(Model model, const std::string& policy, const CostStatistics& s, std::uint64_t seed)
{
    json j;
    j["model"] = std::string(model_name(model));
    j["policy"] = policy;
    j["mean_cost"] = s.mean;
    j["stderr"] = s.std_error;
    j["n_paths"] = s.count;
    j["seed"] = seed;
    return j;
}

void print_summary_table(std::ostream& err, const std::string& policy, const CostStatistics& s)
{
    char line[256];
    std::snprintf(line, sizeof line, "%-24s mean %.6f  stderr %.6f  n %zu  [min %.4f, max %.4f]\n",
                  policy.c_str(), s.mean, s.std_error, s.count, s.min, s.max);
    err << line;
}

std::string utc_timestamp()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err)
{
    const Model model = model_of(cfg);
    const ModelParams params = params_of(cfg);
    const InitialState init = initial_state_of(cfg, model);
    const SimOptions opts = sim_options_of(cfg);
    checked_steps(cfg, params);
    check_paths(cfg);
    const Policy policy = make_policy(cfg.policy, model, params);

    if (!cfg.trajectory_out.empty()) {
        const Trajectory traj = simulate(model, policy, init, params, cfg.dt, cfg.seed, opts);
        write_file_atomic(cfg.trajectory_out, [&](std::ostream& os) { write_trajectory_csv(os, traj); });
    }
    const CostStatistics stats =
        run_batch(model, policy, init, params, cfg.dt, cfg.n_paths, cfg.seed, cfg.threads, opts);
    emit(cfg.out, summary_json(model, cfg.policy, stats, cfg.seed).dump(2) + "\n", out);
    print_summary_table(err, cfg.policy, stats);
    return exit_ok;
}

int cmd_solve(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err)
{
    const Model model = model_of(cfg);
    const ModelParams params = params_of(cfg);
    const GridSpec spec = grid_spec_of(cfg, params);
    if (cfg.out.empty()) {
        throw ConfigError("out", "solve needs an output .vgrid path");
    }
    try {
        check_stability(spec, params);
    } catch (const StabilityError& e) {
        throw ConfigError("delta", e.what());
    }

    const auto start = std::chrono::steady_clock::now();
    const ValueGrid vg = solve_backward(spec, params, cfg.threads);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_value_grid(vg, cfg.out);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t n = 0; n < vg.slices(); ++n) {
        const auto v = vg.values(n);
        for (std::size_t idx = 0; idx < vg.nodes(); ++idx) {
            if (vg.grid().active(idx)) {
                lo = std::min(lo, v[idx]);
                hi = std::max(hi, v[idx]);
            }
        }
    }
    const InitialState init = initial_state_of(cfg, model);
    json report;
    report["grid"] = cfg.out;
    report["model"] = std::string(model_name(model));
    report["mode"] = std::string(control_mode_name(spec.mode));
    report["slices"] = vg.slices();
    report["nodes"] = vg.nodes();
    report["active_nodes"] = vg.grid().active_count();
    report["delta"] = spec.delta;
    report["min_value"] = lo;
    report["max_value"] = hi;
    report["value_at_initial_state"] = vg.value_at(0, init);
    if (model == Model::AngleLQ) {
        const double theta = std::get<AngleState>(init).theta;
        const double t0 = params.horizon() - static_cast<double>(spec.steps) * spec.delta;
        const double exact = lq::value(t0, theta, params.horizon(), params.alpha());
        double max_err = 0.0;
        for (std::size_t idx = 0; idx < vg.nodes(); ++idx) {
            const double th = vg.grid().point(idx).x;
            if (std::abs(th) <= 2.0) {
                max_err = std::max(max_err, std::abs(vg.values(0)[idx] -
                                                     lq::value(t0, th, params.horizon(), params.alpha())));
            }
        }
        report["closed_form"] = {{"theta", theta},
                                 {"grid_value", vg.value_at(0, init)},
                                 {"exact_value", exact},
                                 {"abs_error", std::abs(vg.value_at(0, init) - exact)},
                                 {"max_abs_error_theta_le_2", max_err}};
    }
    if (!cfg.no_timestamps) {
        report["wall_time_s"] = wall;
        report["created_utc"] = utc_timestamp();
    }
    emit(cfg.report_out, report.dump(2) + "\n", out);

    char line[256];
    std::snprintf(line, sizeof line, "solved %zu slices on %zu nodes; J in [%.6g, %.6g]; %.2f s\n",
                  vg.slices(), vg.nodes(), lo, hi, wall);
    err << line;
    return exit_ok;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (cfg.grid_path.empty()) {
        throw ConfigError("grid", "evaluate needs a .vgrid path");
    }
    check_paths(cfg);
    const auto vg = load_grid_for(cfg.grid_path, model_of(cfg), params_of(cfg), cfg.model_given, cfg.params_given);
    const Model model = vg->spec().model;
    const ModelParams& params = vg->params();
    const InitialState init = initial_state_of(cfg, model);
    const SimOptions opts = sim_options_of(cfg);
    checked_steps(cfg, params);
    const Policy policy = extract_policy(vg);
    const std::string label = "grid:" + cfg.grid_path;

    const CostStatistics stats =
        run_batch(model, policy, init, params, cfg.dt, cfg.n_paths, cfg.seed, cfg.threads, opts);
    json j = summary_json(model, label, stats, cfg.seed);
    j["grid_value_at_initial_state"] = vg->value_at(0, init);
    emit(cfg.out, j.dump(2) + "\n", out);
    print_summary_table(err, label, stats);
    return exit_ok;
}

int cmd_compare(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (cfg.policies.size() < 2) {
        throw ConfigError("policies", "compare needs at least two policies");
    }
    const Model model = model_of(cfg);
    const ModelParams params = params_of(cfg);
    const InitialState init = initial_state_of(cfg, model);
    const SimOptions opts = sim_options_of(cfg);
    checked_steps(cfg, params);
    check_paths(cfg);
    std::vector<Policy> policies;
    for (const auto& spec : cfg.policies) {
        policies.push_back(make_policy(spec, model, params));
    }

    // Every policy sees the same per-path noise (common random numbers).
    std::vector<std::vector<double>> costs;
    std::vector<CostStatistics> stats;
    for (const auto& p : policies) {
        costs.push_back(batch_costs(model, p, init, params, cfg.dt, cfg.n_paths, cfg.seed, cfg.threads, opts));
        stats.push_back(CostStatistics::from_samples(costs.back()));
    }
    std::vector<std::size_t> order(policies.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return stats[a].mean < stats[b].mean; });

    std::string csv = "policy,mean,stderr,n\n";
    for (std::size_t i : order) {
        csv += csv_field(cfg.policies[i]) + "," + num(stats[i].mean) + "," + num(stats[i].std_error) + "," +
               std::to_string(stats[i].count) + "\n";
    }
    emit(cfg.out, csv, out);

    const std::size_t best = order.front();
    for (std::size_t i : order) {
        print_summary_table(err, cfg.policies[i], stats[i]);
        if (i != best) {
            std::vector<double> diff(cfg.n_paths);
            for (std::size_t k = 0; k < diff.size(); ++k) {
                diff[k] = costs[i][k] - costs[best][k];
            }
            const CostStatistics d = CostStatistics::from_samples(diff);
            char line[160];
            std::snprintf(line, sizeof line, "  paired gap to best %.6f +- %.6f (%.1f stderr)\n", d.mean,
                          d.std_error, d.std_error > 0 ? d.mean / d.std_error : 0.0);
            err << line;
        }
    }
    return exit_ok;
}

int cmd_lq(const ExperimentConfig& cfg, std::ostream& out, std::ostream& /*err*/)
{
    const ModelParams params = params_of(cfg);
    const double T = params.horizon();
    std::string csv = "t,theta,f,g,value,optimal_B\n";
    for (double t : cfg.t_mesh) {
        if (!(t <= T)) {
            throw ConfigError("t", "mesh time " + num(t) + " exceeds the horizon");
        }
        for (double theta : cfg.theta_mesh) {
            csv += num(t) + "," + num(theta) + "," + num(lq::riccati_f(t, T)) + "," +
                   num(lq::g_term(t, T, params.alpha())) + "," + num(lq::value(t, theta, T, params.alpha())) +
                   "," + num(lq::optimal_B(t, theta, T)) + "\n";
        }
    }
    emit(cfg.out, csv, out);
    return exit_ok;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    ExperimentConfig cfg;
    CLI::App app{"Feedback control experiments for monitored qubits and the linear cavity model", "qfc"};
    app.set_config("--config", "", "INI file of settings; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--model", cfg.model, "diffusive-qubit | counting-qubit | angle-lq")->capture_default_str();
    app.add_option("--kappa-s-sq", cfg.kappa_s_sq, "side-channel rate kappa_s^2")->capture_default_str();
    app.add_option("--kappa-f-sq", cfg.kappa_f_sq, "forward-channel rate (default 1 - kappa_s^2)");
    app.add_option("--alpha", cfg.alpha, "angle-model noise strength")->capture_default_str();
    app.add_option("--horizon,-T", cfg.horizon, "time horizon T")->capture_default_str();
    app.add_option("--p0", cfg.p0, "initial Bloch vector x,y,z")->delimiter(',')->expected(3);
    app.add_option("--theta0", cfg.theta0, "initial angle")->capture_default_str();
    app.add_option("--dt", cfg.dt, "simulation time step")->capture_default_str();
    app.add_option("--n-paths", cfg.n_paths, "Monte Carlo paths")->capture_default_str();
    app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
    app.add_option("--threads", cfg.threads, "worker threads (0: QFC_THREADS or all cores)")->capture_default_str();
    app.add_option("--ball-tolerance", cfg.ball_tolerance, "radial excess accepted before projection");
    app.add_flag("--no-timestamps", cfg.no_timestamps, "omit wall time and creation time from reports");
    app.add_option("--out,-o", cfg.out, "main output file (stdout when omitted)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo cost of one policy");
    sim->add_option("--policy", cfg.policy, "zero | constant:<values> | lq-closed-form | grid:<path>")
        ->capture_default_str();
    sim->add_option("--trajectory-out", cfg.trajectory_out, "CSV of the first sample path");

    auto* solve = app.add_subcommand("solve", "backward dynamic-programming solve to a .vgrid file");
    solve->add_option("--nodes", cfg.nodes, "nodes per axis (1 value or one per axis)")->delimiter(',');
    solve->add_option("--lower", cfg.lower, "lower grid bounds per axis")->delimiter(',');
    solve->add_option("--upper", cfg.upper, "upper grid bounds per axis")->delimiter(',');
    solve->add_option("--delta", cfg.delta, "backward time step")->capture_default_str();
    solve->add_option("--steps", cfg.steps, "number of slices N (default T / delta)");
    solve->add_option("--mode", cfg.mode, "closed-form | exhaustive")->capture_default_str();
    solve->add_option("--u-max", cfg.u_max, "control box half-width (exhaustive mode)");
    solve->add_option("--control-nodes", cfg.control_nodes, "control grid points per axis (exhaustive mode)");
    solve->add_option("--report-out", cfg.report_out, "JSON report file (stdout when omitted)");

    auto* eval = app.add_subcommand("evaluate", "Monte Carlo cost of the policy stored in a .vgrid file");
    eval->add_option("--grid", cfg.grid_path, ".vgrid file")->required();

    auto* compare = app.add_subcommand("compare", "rank policies by Monte Carlo cost with common random numbers");
    compare->add_option("--policies", cfg.policies, "two or more policy specs")->required();

    auto* lq = app.add_subcommand("lq", "closed-form value and control of the angle model as CSV");
    lq->add_option("--t", cfg.t_mesh, "time mesh")->delimiter(',');
    lq->add_option("--theta", cfg.theta_mesh, "angle mesh")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e, out, err);
        }
        err << "error: " << e.what() << "\n";
        return exit_config;
    }
    cfg.model_given = app.count("--model") > 0;
    cfg.params_given = app.count("--kappa-s-sq") + app.count("--kappa-f-sq") + app.count("--alpha") +
                           app.count("--horizon") > 0;

    try {
        if (sim->parsed()) {
            return cmd_simulate(cfg, out, err);
        }
        if (solve->parsed()) {
            return cmd_solve(cfg, out, err);
        }
        if (eval->parsed()) {
            return cmd_evaluate(cfg, out, err);
        }
        if (compare->parsed()) {
            return cmd_compare(cfg, out, err);
        }
        return cmd_lq(cfg, out, err);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const GridSpecError& e) {
        err << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::logic_error& e) {
        err << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_runtime;
    }
}

} // namespace qfc::cli
