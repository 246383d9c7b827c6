#include "commands.hpp"

#include "tpmgrit/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tpmgrit::cli {

namespace {

std::string fmt(double v) { return format_double(v); }

void ensure_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw StepError(std::string("non-finite ") + what + " in output");
}

std::filesystem::path out_dir(const ExperimentConfig& config) {
    std::filesystem::path dir(config.out);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Initial value whose one-cycle trajectory serves as the reference.
StateVector reference_start(const ExperimentConfig& config, const Application& app, const Hierarchy& h) {
    if (config.reference == "oracle") return periodic_fixed_point(app, h).u0;
    const std::size_t n = std::stoul(config.reference.substr(6));
    StateVector u = app.init(0.0);
    for (std::size_t i = 1; i < n; ++i) u = cycle_map(app, h, u);
    return u;
}

SolveResult run_configured(const ExperimentConfig& config, const Application& app, const Hierarchy& h,
                           const SolverConfig& solver, const ExecutorConfig& executor) {
    const PeriodicConfig pc = config.periodic_config();
    return run(app, h, solver, pc.enabled ? &pc : nullptr, executor);
}

}  // namespace

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot write " + tmp.string());
        f << content;
        f.flush();
        if (!f) throw ConfigError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void cmd_run(const ExperimentConfig& config, std::ostream& out) {
    auto app = config.make_app();
    const Hierarchy h = config.hierarchy();
    app->prepare(h);
    const SolveResult result = run_configured(config, *app, h, config.solver(), config.executor());
    const RunReport& rep = result.report;

    std::ostringstream residuals;
    residuals << residuals_header << '\n';
    for (std::size_t it = 0; it < rep.pointwise_residuals.size(); ++it) {
        for (const auto& p : rep.pointwise_residuals[it]) {
            ensure_finite(p.norm, "residual");
            residuals << it << ',' << p.index << ',' << fmt(p.norm) << '\n';
        }
    }
    std::ostringstream summary;
    summary << summary_header << '\n';
    for (std::size_t it = 0; it < rep.residual_history.size(); ++it) {
        ensure_finite(rep.residual_history[it], "residual");
        ensure_finite(rep.jump_history[it], "jump");
        summary << it << ',' << fmt(rep.residual_history[it]) << ',' << fmt(rep.jump_history[it]) << ','
                << fmt(rep.wall_clock[it]) << '\n';
    }
    std::ostringstream meta;
    for (const auto& [k, v] : config.entries()) meta << k << " = " << v << '\n';
    meta << "result.converged_reason = " << to_string(rep.converged_reason) << '\n';
    meta << "result.iterations = " << rep.iterations << '\n';
    meta << "result.final_residual = " << fmt(rep.residual_history.back()) << '\n';
    meta << "result.residual_scope = " << rep.residual_scope << '\n';
    if (config.periodic) {
        meta << "result.ic_converged_iteration = "
             << (rep.ic_converged_iteration ? std::to_string(*rep.ic_converged_iteration) : "none") << '\n';
        meta << "result.ic_deposits = " << rep.ic_deposits << '\n';
        meta << "result.ic_consumed = " << rep.ic_consumed << '\n';
        meta << "result.ic_stale = " << rep.ic_stale << '\n';
    }

    const auto dir = out_dir(config);
    write_atomic(dir / "residuals.csv", residuals.str());
    write_atomic(dir / "summary.csv", summary.str());
    write_atomic(dir / "meta.txt", meta.str());

    out << "iterations " << rep.iterations << ", converged_reason " << to_string(rep.converged_reason)
        << ", final residual " << fmt(rep.residual_history.back()) << "\n";
}

void cmd_compare(const ExperimentConfig& config, std::ostream& out) {
    auto app = config.make_app();
    const Hierarchy h = config.hierarchy();
    app->prepare(h);
    const double dt = h.level(0).dt;

    const StateVector ref = reference_start(config, *app, h);
    const SpaceTimeState ref_traj = propagate(*app, h, ref);

    ExperimentConfig periodic_cfg = config;
    periodic_cfg.periodic = true;
    periodic_cfg.ic_tolerance = 0.0;
    periodic_cfg.residual_tol = 0.0;

    std::ostringstream csv;
    csv << convergence_header << '\n';
    StateVector ic = app->init(0.0);
    std::vector<double> seq_err, mg_err;
    for (std::size_t k = 1; k <= config.cycles; ++k) {
        const SpaceTimeState cycle = propagate(*app, h, ic);
        const double seq_st = state_distance(cycle, ref_traj, *app, dt);
        ic = cycle.values.back();
        const double seq = app->spatial_norm(app->linear_combine(1.0, ic, -1.0, ref));

        SolverConfig solver = periodic_cfg.solver();
        solver.max_iterations = k + 1;
        const SolveResult r = run_configured(periodic_cfg, *app, h, solver, periodic_cfg.executor());
        const double mg = app->spatial_norm(app->linear_combine(1.0, r.state.values.front(), -1.0, ref));
        const double mg_st = state_distance(r.state, ref_traj, *app, dt);

        for (double v : {seq, mg, seq_st, mg_st}) ensure_finite(v, "error");
        seq_err.push_back(seq);
        mg_err.push_back(mg);
        csv << k << ',' << fmt(seq) << ',' << fmt(mg) << ',' << fmt(seq_st) << ',' << fmt(mg_st) << '\n';
    }
    write_atomic(out_dir(config) / "convergence.csv", csv.str());

    out << "k=1: sequential " << fmt(seq_err.front()) << ", mgrit " << fmt(mg_err.front()) << "\n";
    if (seq_err.size() > 1 && seq_err.front() > 0 && seq_err.back() > 0 && mg_err.front() > 0 &&
        mg_err.back() > 0) {
        const double span = static_cast<double>(seq_err.size() - 1);
        const double s_seq = std::log(seq_err.back() / seq_err.front()) / span;
        const double s_mg = std::log(mg_err.back() / mg_err.front()) / span;
        out << "mean log-reduction per step: sequential " << fmt(s_seq) << ", mgrit " << fmt(s_mg)
            << ", ratio " << fmt(s_mg / s_seq) << "\n";
    }
}

void cmd_bench(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    auto app = config.make_app();
    const Hierarchy fine = config.hierarchy();
    app->prepare(fine);

    const StateVector ic = app->init(0.0);
    const std::size_t cycles = cycles_to_tolerance(*app, fine, ic, config.ic_tolerance, 100000);
    const double baseline = best_of(config.repeat, [&] { sequential_cycles(*app, fine, cycles, ic, ic); });
    out << "baseline: " << cycles << " sequential cycles, best of " << config.repeat << " = "
        << fmt(baseline) << " s\n";

    ExperimentConfig periodic_cfg = config;
    periodic_cfg.periodic = true;

    std::ostringstream csv;
    csv << speedup_header << '\n';
    for (Relaxation rel : config.bench_relaxations) {
        for (std::size_t m : config.bench_coarsen) {
            const Hierarchy h = config.hierarchy(m);
            app->prepare(h);
            SolverConfig solver = periodic_cfg.solver();
            solver.relaxation = rel;
            solver.coarsen = m;
            double previous = 0.0;
            for (std::size_t w : config.bench_workers) {
                ExecutorConfig exec = periodic_cfg.executor();
                exec.workers = w;
                exec.mode = w > 1 ? ExecutionMode::threaded : ExecutionMode::serial;
                const PeriodicConfig pc = periodic_cfg.periodic_config();
                const Measurement meas = measure(*app, h, solver, &pc, exec, config.repeat);
                const double speedup = baseline / meas.best_seconds;
                ensure_finite(speedup, "speedup");
                csv << w << ',' << m << ',' << to_string(rel) << ',' << fmt(meas.best_seconds) << ','
                    << fmt(speedup) << '\n';
                out << "W=" << w << " m=" << m << " " << to_string(rel) << ": " << fmt(meas.best_seconds)
                    << " s, speedup " << fmt(speedup) << ", iterations " << meas.report.iterations << "\n";
                if (speedup < previous) {
                    err << "warning: speedup decreased from " << fmt(previous) << " to " << fmt(speedup)
                        << " at W=" << w << "\n";
                }
                previous = speedup;
            }
        }
    }
    write_atomic(out_dir(config) / "speedup.csv", csv.str());
}

void cmd_oracle(const ExperimentConfig& config, std::ostream& out) {
    auto app = config.make_app();
    const Hierarchy h = config.hierarchy();
    app->prepare(h);
    const FixedPoint fp = periodic_fixed_point(*app, h);
    for (std::size_t i = 0; i < fp.u0.size(); ++i) out << "u0[" << i << "] = " << fmt(fp.u0[i]) << "\n";
    out << "spectral_radius = " << fmt(fp.spectral_radius) << "\n";
    out << "cycles = " << fp.cycles << "\n";
}

int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& out,
             std::ostream& err) {
    try {
        config.validate();
        if (command == "run") cmd_run(config, out);
        else if (command == "compare") cmd_compare(config, out);
        else if (command == "bench") cmd_bench(config, out, err);
        else if (command == "oracle") cmd_oracle(config, out);
        else throw ConfigError("unknown command '" + command + "'");
        return exit_ok;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const ArgumentError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_solver;
    }
}

}  // namespace tpmgrit::cli
