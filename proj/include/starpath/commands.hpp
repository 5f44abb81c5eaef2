#pragma once

// The three CLI commands as library functions returning process exit codes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "starpath/analyzer.hpp"
#include "starpath/config.hpp"
#include "starpath/report.hpp"
#include "starpath/svg.hpp"
#include "starpath/trace_io.hpp"

namespace starpath {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_diverged = 3,
    exit_mismatch = 4,
    exit_missing_csv = 5,
};

inline constexpr const char* kTraceFileName = "trace.spth";

/// STARPATH_OUT wins over the config's [output] dir.
inline std::filesystem::path output_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("STARPATH_OUT"); env && *env) return env;
    return cfg.output_dir;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw InputError("cannot write " + path.string());
}

template <class Fn>
void write_with(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    fn(out);
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace detail

inline int cmd_train(const std::filesystem::path& config_path, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    ExperimentConfig cfg;
    BuiltProblem built;
    RunConfig run_cfg;
    ParamVector x0;
    try {
        cfg = load_config(config_path);
        built = build_problem(cfg.problem);
        run_cfg = resolve_run(cfg.run, *built.problem);
        x0 = initial_point(cfg, *built.problem);
    } catch (const Error& e) {
        err << "starpath train: " << e.what() << '\n';
        return exit_config;
    }
    const FiniteSumProblem& p = *built.problem;
    const auto dir = output_dir(cfg);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        err << "starpath train: cannot create " << dir << ": " << ec.message() << '\n';
        return exit_config;
    }

    out << "problem " << p.name() << ": n=" << p.n() << " d=" << p.dim() << ", eta=" << fmt(run_cfg.eta)
        << ", epochs=" << run_cfg.epochs << '\n';
    RunHooks hooks;
    hooks.on_warning = [&](const std::string& w) { err << "warning: " << w << '\n'; };
    hooks.on_epoch = [&](std::uint64_t b, double loss) {
        out << "epoch " << b << " mean step loss " << fmt(loss) << '\n';
    };
    Trace t = run(p, x0, run_cfg, hooks);
    const auto path = dir / kTraceFileName;
    try {
        save_trace(t, path);
    } catch (const Error& e) {
        err << "starpath train: " << e.what() << '\n';
        return exit_config;
    }
    out << "trace " << path.string() << ": " << t.steps.size() << " steps, " << t.checkpoints.size()
        << " checkpoints, final full loss " << fmt(full_value(p, t.final_iterate)) << ", "
        << fmt(t.wall_seconds) << " s\n";
    if (t.status == RunStatus::diverged) {
        err << "starpath train: " << t.diagnostic << " (partial trace written)\n";
        return exit_diverged;
    }
    return exit_ok;
}

inline int cmd_analyze(const std::filesystem::path& trace_path, const std::filesystem::path& config_path,
                       std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    ExperimentConfig cfg;
    BuiltProblem built;
    Trace t;
    try {
        cfg = load_config(config_path);
        built = build_problem(cfg.problem);
        t = load_trace(trace_path);
    } catch (const Error& e) {
        err << "starpath analyze: " << e.what() << '\n';
        return exit_config;
    }
    const FiniteSumProblem& p = *built.problem;
    if (t.fingerprint != p.fingerprint() || t.n != p.n() || t.d != p.dim()) {
        err << "starpath analyze: trace " << trace_path.string()
            << " was not produced by the configured problem (fingerprint or shape mismatch)\n";
        return exit_mismatch;
    }
    const auto dir = output_dir(cfg);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        err << "starpath analyze: cannot create " << dir << ": " << ec.message() << '\n';
        return exit_config;
    }
    try {
        const auto& opts = cfg.analysis.options;
        const ReferencePoint ref =
            make_reference(t, p, cfg.analysis.reference, opts.eps_loss, opts.access);
        if (ref.approximate())
            err << "warning: reference full loss " << fmt(ref.achieved_loss) << " exceeds eps_loss "
                << fmt(ref.eps_loss) << "\n";
        const PathReport rep = analyze_path(t, p, ref, opts);
        detail::write_with(dir / "epochs.csv", [&](std::ostream& o) { write_epochs_csv(rep, o); });
        detail::write_with(dir / "iters.csv", [&](std::ostream& o) { write_iters_csv(rep, o); });
        detail::write_with(dir / "audits.csv", [&](std::ostream& o) { write_audits_csv(rep, o); });
        detail::write_with(dir / "steps_audit.csv", [&](std::ostream& o) { write_step_audits_csv(rep, o); });
        detail::write_with(dir / "subsequences.csv", [&](std::ostream& o) { write_subsequences_csv(rep, o); });
        detail::write_with(dir / "summary.txt", [&](std::ostream& o) { write_summary(rep, t, o); });
        write_summary(rep, t, out);
        out << "wrote " << (dir / "epochs.csv").string() << " and companions\n";
    } catch (const Error& e) {
        err << "starpath analyze: " << e.what() << '\n';
        return exit_config;
    }
    return exit_ok;
}

inline int cmd_plot(const std::filesystem::path& dir, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    for (const char* name : {"epochs.csv", "iters.csv"}) {
        if (!std::filesystem::exists(dir / name)) {
            err << "starpath plot: missing " << (dir / name).string() << '\n';
            return exit_missing_csv;
        }
    }
    try {
        const CsvTable epochs = read_csv(dir / "epochs.csv");
        const CsvTable iters = read_csv(dir / "iters.csv");
        auto series = [&](const char* col) {
            Series s;
            const auto e = epochs.values("epoch"), v = epochs.values(col);
            for (std::size_t i = 0; i < e.size(); ++i) s.emplace_back(e[i], v[i]);
            return s;
        };

        SvgChart dist("Distance to reference point", "epoch", "||x_nB - x*||");
        dist.line("distance", series("dist"));
        detail::write_file(dir / "distance.svg", dist.render());

        SvgChart resid("Epoch residual e_B", "epoch", "e_B");
        resid.line("e_B", series("e_B"));
        resid.baseline(0.0);
        detail::write_file(dir / "residual.svg", resid.render());

        SvgChart norm("Weight norm", "epoch", "||x_nB||");
        norm.line("weight norm", series("weight_norm"), "#2ca02c");
        detail::write_file(dir / "norm.svg", norm.render());

        std::string written = "distance.svg residual.svg norm.svg";
        if (iters.rows.empty()) {
            std::filesystem::remove(dir / "fraction.svg");
            out << "iters.csv has no rows; fraction.svg omitted\n";
        } else {
            SvgChart frac("Fraction of star-convex iterations (e_k < 0)", "epoch", "fraction");
            Series bars;
            for (const auto& [e, f] : fractions_from_iters(iters)) bars.emplace_back(e, f);
            frac.bars("fraction e_k < 0", bars);
            frac.fix_y(0.0, 1.0);
            frac.line_right("full loss", series("full_loss"), "training loss");
            detail::write_file(dir / "fraction.svg", frac.render());
            written += " fraction.svg";
        }
        out << "wrote " << written << " in " << dir.string() << '\n';
    } catch (const Error& e) {
        err << "starpath plot: " << e.what() << '\n';
        return exit_missing_csv;
    }
    return exit_ok;
}

}  // namespace starpath
