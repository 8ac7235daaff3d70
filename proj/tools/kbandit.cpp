// kbandit: command-line front end for running, sweeping, cross-validating and
// diagnosing kernel epsilon-greedy bandit experiments.
//
// Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kbandit/kbandit.hpp"

namespace fs = std::filesystem;
using namespace kbandit;

namespace {

struct Common {
    std::vector<std::string> configs;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string policy;
};

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("", "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void apply_policy_override(ExperimentConfig& c, const std::string& name) {
    if (name.empty()) return;
    if (name == "kernel_eps_greedy") {
        c.policy.kind = PolicyKind::KernelEpsGreedy;
    } else if (name == "kernel_ucb") {
        c.policy.kind = PolicyKind::KernelUcb;
    } else if (name == "wls_eps_greedy" || name == "wls_ridge_eps_greedy") {
        c.policy.kind = PolicyKind::WlsEpsGreedy;
        c.policy.ridge = name == "wls_ridge_eps_greedy";
    } else {
        throw ConfigError("policy.name", "unknown policy '" + name + "' given to --policy");
    }
}

ExperimentConfig load(const std::string& path, const Common& opt) {
    ExperimentConfig c;
    try {
        c = parse_config(read_file(path));
    } catch (const ConfigError&) {
        std::cerr << "in " << path << ":\n";
        throw;
    }
    apply_policy_override(c, opt.policy);
    if (opt.seed) c.master_seed = *opt.seed;
    c.validate();
    return c;
}

void write_metadata(const fs::path& dir, const ExperimentConfig& c, const Environment& env) {
    auto f = open_output(dir / "metadata.txt");
    f << "policy = " << policy_name(c.policy) << "\n";
    f << "config_hash = " << config_hash(c) << "\n";
    f << "master_seed = " << c.master_seed << "\n";
    for (int r = 0; r < c.n_runs; ++r) f << "run." << r << ".seed = " << run_seed(c.master_seed, static_cast<std::uint64_t>(r)) << "\n";
    if (c.env.setting == SettingKind::Setting3) {
        f << "setting3.x_star =";
        for (Eigen::Index i = 0; i < env.x_star().size(); ++i) f << ' ' << fmt12(env.x_star()[i]);
        f << "\nsetting3.w_star =";
        for (Eigen::Index i = 0; i < env.w_star().size(); ++i) f << ' ' << fmt12(env.w_star()[i]);
        f << "\n";
    }
    f << "\n# resolved configuration\n" << serialize_config(c);
}

void write_runs(const fs::path& dir, const std::vector<RegretTrace>& traces) {
    for (std::size_t r = 0; r < traces.size(); ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu.csv", r);
        auto f = open_output(dir / name);
        write_run_csv(f, static_cast<int>(r), traces[r]);
    }
    auto f = open_output(dir / "summary.csv");
    write_summary_csv(f, average_traces(traces));
}

MeanCurve run_and_write(const ExperimentConfig& c, const fs::path& dir, int threads) {
    const Environment env = make_environment(c);
    const auto traces = run_experiment(c, threads);
    write_runs(dir, traces);
    write_metadata(dir, c, env);
    return average_traces(traces);
}

int cmd_run(const Common& opt) {
    for (const auto& path : opt.configs) {
        const auto c = load(path, opt);
        const fs::path dir = opt.configs.size() == 1 ? fs::path(opt.out) : fs::path(opt.out) / fs::path(path).stem();
        const auto curve = run_and_write(c, dir, opt.threads);
        std::cout << path << ": " << policy_name(c.policy) << " mean final regret " << fmt12(curve.mean.back()) << " +- "
                  << fmt12(curve.stderr_.back()) << " (" << c.n_runs << " runs) -> " << dir.string() << "\n";
    }
    return 0;
}

int cmd_sweep(const Common& opt) {
    auto table = open_output(fs::path(opt.out) / "sweep.csv");
    table << "config,policy,config_hash,n_runs,T,mean_final_regret,stderr_final_regret\n";
    for (const auto& path : opt.configs) {
        const auto c = load(path, opt);
        const auto curve = run_and_write(c, fs::path(opt.out) / fs::path(path).stem(), opt.threads);
        table << fs::path(path).stem().string() << ',' << policy_name(c.policy) << ',' << config_hash(c) << ',' << c.n_runs << ',' << c.horizon
              << ',' << fmt12(curve.mean.back()) << ',' << fmt12(curve.stderr_.back()) << '\n';
        std::cout << path << ": " << fmt12(curve.mean.back()) << "\n";
    }
    return 0;
}

int cmd_cv(const Common& opt) {
    for (const auto& path : opt.configs) {
        const auto c = load(path, opt);
        const fs::path dir = opt.configs.size() == 1 ? fs::path(opt.out) : fs::path(opt.out) / fs::path(path).stem();
        const auto res = cross_validate(c, opt.threads);
        {
            auto f = open_output(dir / "cv_table.csv");
            f << "index,candidate,mean_final_regret";
            for (int k = 0; k < c.cv.folds; ++k) f << ",fold_" << k;
            f << '\n';
            for (std::size_t i = 0; i < res.table.size(); ++i) {
                const auto& row = res.table[i];
                f << i << ",\"" << describe(row.candidate, c) << "\"," << fmt12(row.mean_regret);
                for (double v : row.fold_regret) f << ',' << fmt12(v);
                f << '\n';
            }
        }
        write_runs(dir, res.evaluation);
        write_metadata(dir, res.best_config, make_environment(res.best_config));
        const auto curve = average_traces(res.evaluation);
        auto f = open_output(dir / "cv_summary.txt");
        f << "winner_index = " << res.best << "\n";
        f << "winner = " << describe(res.table[res.best].candidate, c) << "\n";
        f << "winner_cv_mean_final_regret = " << fmt12(res.table[res.best].mean_regret) << "\n";
        f << "test_mean_final_regret = " << fmt12(curve.mean.back()) << "\n";
        f << "test_stderr_final_regret = " << fmt12(curve.stderr_.back()) << "\n";
        std::cout << path << ": winner " << describe(res.table[res.best].candidate, c) << ", test fold mean final regret "
                  << fmt12(curve.mean.back()) << " -> " << dir.string() << "\n";
    }
    return 0;
}

struct DiagnoseOptions {
    int seeds = 200;
    int n_mc = 500;
    Step cov_t = 200;
    std::vector<Step> checkpoints{500, 1000, 2000, 3000, 5000};
    double window = 0.5;
    double exponent_lo = 0.55;
    double exponent_hi = 0.80;
};

int cmd_diagnose(const Common& opt, const DiagnoseOptions& d) {
    std::vector<TheoryReport> reports;
    for (const auto& path : opt.configs) {
        const auto c = load(path, opt);
        if (c.policy.kind != PolicyKind::KernelUcb) {
            auto rc = c;
            rc.n_runs = d.seeds;
            reports.push_back(randomization_rate_check(rc, d.seeds, 5.0, opt.threads).report);
        }
        if (c.kernel.kind == KernelKind::Linear && c.policy.kind != PolicyKind::KernelUcb && c.t0 < d.cov_t) {
            reports.push_back(check_covariance_unbiasedness(c, d.cov_t, d.n_mc, 0.05, opt.threads).report);
        }
        if (c.env.setting == SettingKind::InRkhs && c.policy.kind == PolicyKind::KernelEpsGreedy && !c.policy.augment_bias &&
            c.t0 < d.checkpoints.front()) {
            reports.push_back(estimation_error_decay(c, d.checkpoints, c.n_runs, 0.3, opt.threads).report);
        }
        reports.push_back(regret_exponent_check(c, d.window, d.exponent_lo, d.exponent_hi, opt.threads).report);
    }
    auto f = open_output(fs::path(opt.out) / "diagnostics.csv");
    write_reports_csv(f, reports);
    bool all = true;
    for (const auto& r : reports) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": statistic " << fmt12(r.statistic) << " tolerance " << fmt12(r.tolerance) << " ("
                  << r.detail << ")\n";
        all = all && r.passed;
    }
    std::cout << (all ? "all checks passed" : "some checks failed") << "\n";
    return 0;
}

int cmd_plotdata(const Common& opt, bool loglog) {
    std::vector<PlotSeries> series;
    for (const auto& path : opt.configs) {
        const auto c = load(path, opt);
        series.push_back({fs::path(path).stem().string() + "_" + policy_name(c.policy), average_traces(run_experiment(c, opt.threads))});
    }
    const fs::path dir(opt.out);
    {
        auto f = open_output(dir / "plotdata.csv");
        write_plotdata_csv(f, series);
    }
    auto f = open_output(dir / "regret.svg");
    write_regret_svg(f, series, loglog);
    std::cout << "wrote " << (dir / "plotdata.csv").string() << " and " << (dir / "regret.svg").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel epsilon-greedy contextual bandit simulator"};
    app.require_subcommand(1);
    Common opt;
    DiagnoseOptions diag;
    bool loglog = false;

    auto add_common = [&](CLI::App* sub, bool many) {
        auto* c = sub->add_option("--config,-c", opt.configs, many ? "Config file(s)" : "Config file")->required()->check(CLI::ExistingFile);
        if (!many) c->expected(1);
        sub->add_option("--out,-o", opt.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", opt.seed, "Master seed (overrides [run] seed)");
        sub->add_option("--threads", opt.threads, "Worker threads (default: KBANDIT_THREADS or 1)");
        sub->add_option("--policy", opt.policy, "Policy override: kernel_eps_greedy|kernel_ucb|wls_eps_greedy|wls_ridge_eps_greedy");
    };
    auto* run = app.add_subcommand("run", "Run n_runs episodes; write per-run CSVs and a summary");
    add_common(run, true);
    auto* sweep = app.add_subcommand("sweep", "Run several configs and tabulate final regret");
    add_common(sweep, true);
    auto* cv = app.add_subcommand("cv", "Cross-validate the parameter grid, then evaluate the winner");
    add_common(cv, true);
    auto* diagnose = app.add_subcommand("diagnose", "Run the statistical diagnostics that apply to each config");
    add_common(diagnose, true);
    diagnose->add_option("--seeds", diag.seeds, "Seeds for the randomization-rate check")->capture_default_str();
    diagnose->add_option("--n-mc", diag.n_mc, "Episodes for the covariance check")->capture_default_str();
    diagnose->add_option("--cov-t", diag.cov_t, "Step at which the covariance is checked")->capture_default_str();
    diagnose->add_option("--checkpoints", diag.checkpoints, "Checkpoints for the error-decay check");
    diagnose->add_option("--window", diag.window, "Fraction of T where the regret exponent is fitted")->capture_default_str();
    diagnose->add_option("--exponent-lo", diag.exponent_lo)->capture_default_str();
    diagnose->add_option("--exponent-hi", diag.exponent_hi)->capture_default_str();
    auto* plot = app.add_subcommand("plotdata", "Write mean/stderr curves per config and an SVG plot");
    add_common(plot, true);
    plot->add_flag("--loglog", loglog, "Log-log axes in the SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(opt);
        if (*sweep) return cmd_sweep(opt);
        if (*cv) return cmd_cv(opt);
        if (*diagnose) return cmd_diagnose(opt, diag);
        if (*plot) return cmd_plotdata(opt, loglog);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
