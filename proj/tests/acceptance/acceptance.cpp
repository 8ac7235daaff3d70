// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kbandit/kbandit.hpp"
#include "oracles.hpp"

using namespace kbandit;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= budget_seconds;
    const bool ok = o.passed && in_time;
    if (!ok) ++failures;
    std::printf("%s criterion %d (%s): %s [%.2f s, budget %.0f s%s]\n", ok ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs,
                budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Vector random_vector(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(d);
    for (int j = 0; j < d; ++j) x[j] = u(rng);
    return x;
}

// 1. Linear kernel, d=3, t=50, random propensities: dual prediction vs primal ridge.
Outcome dual_primal() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.05, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        ArmHistory h;
        for (Step s = 1; s <= 50; ++s) {
            if (rng() % 2) continue;
            record_observation(h, s, random_vector(rng, 3), 2.0 * u(rng), p(rng));
        }
        const double lambda = 0.001 * std::pow(10.0, rep % 4);
        const auto k = KernelSpec::linear(3.0);
        const ArmFit f = fit(k, h, 50, lambda);
        const Vector theta = oracle::primal_weighted_ridge(h.contexts, h.weights, h.rewards, 50.0, lambda);
        for (int q = 0; q < 20; ++q) {
            const Vector x = random_vector(rng, 3);
            worst = std::max(worst, std::abs(predict(k, f, h, x) - theta.dot(x)));
        }
    }
    return {worst <= 1e-8, "max |dual - primal| = " + num(worst) + " (tol 1e-8, 20 instances x 20 queries)"};
}

// 2. Reduced per-arm solve vs the full t x t system over all steps.
Outcome reduced_full() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.05, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int t = 2 + static_cast<int>(rng() % 59);
        const int arms = 2 + static_cast<int>(rng() % 2);
        const int d = 1 + static_cast<int>(rng() % 3);
        const double gamma = 0.3 + 2.0 * (rng() % 1000) / 1000.0;
        const double lambda = std::pow(10.0, -3.0 + 3.0 * (rng() % 1000) / 1000.0);
        std::vector<Vector> xs;
        std::vector<int> as;
        std::vector<double> ys, ps;
        for (int s = 0; s < t; ++s) {
            xs.push_back(random_vector(rng, d));
            as.push_back(static_cast<int>(rng() % static_cast<unsigned>(arms)));
            ys.push_back(2.0 * u(rng));
            ps.push_back(p(rng));
        }
        const auto k = KernelSpec::gaussian(gamma);
        auto kfun = [gamma](const Vector& a, const Vector& b) { return oracle::gaussian(gamma, a, b); };
        for (int a = 0; a < arms; ++a) {
            ArmHistory h;
            for (int s = 0; s < t; ++s) {
                if (as[static_cast<std::size_t>(s)] == a) record_observation(h, s + 1, xs[static_cast<std::size_t>(s)], ys[static_cast<std::size_t>(s)], ps[static_cast<std::size_t>(s)]);
            }
            if (h.size() == 0) continue;
            const ArmFit f = fit(k, h, t, lambda);
            for (int q = 0; q < 3; ++q) {
                const Vector x = random_vector(rng, d);
                worst = std::max(worst, std::abs(predict(k, f, h, x) - oracle::full_system_predict(kfun, xs, as, ys, ps, a, lambda, x)));
            }
        }
    }
    return {worst <= 1e-10, "max |reduced - full| = " + num(worst) + " (tol 1e-10, 100 instances)"};
}

ExperimentConfig linear_rkhs(int dim, const std::vector<Vector>& thetas) {
    ExperimentConfig c;
    c.env.setting = SettingKind::InRkhs;
    c.env.num_arms = static_cast<int>(thetas.size());
    c.env.dim = dim;
    c.env.contexts = ContextDist::Uniform;
    c.env.kernel = KernelSpec::linear(1.0);
    for (const auto& th : thetas) c.env.expansions.push_back(KernelExpansion{{th}, Vector::Constant(1, 1.0)});
    c.kernel = KernelSpec::linear(1.0);
    c.policy.solver = SolverPath::Auto;
    return c;
}

// 3. Mean weighted covariance vs Sigma = I/3.
Outcome covariance() {
    auto c = linear_rkhs(2, {(Vector(2) << 1.0, 0.0).finished(), (Vector(2) << 0.0, 1.0).finished()});
    c.schedule.eps_kind = EpsilonKind::Constant;
    c.schedule.eps_value = 0.3;
    c.t0 = 10;
    c.master_seed = 303;
    const auto r = check_covariance_unbiasedness(c, 200, 500, 0.05, 0);
    return {r.report.passed, "max_arm ||mean Sigma_hat - I/3||_F = " + num(r.report.statistic) + " (tol 0.05, n_mc 500, t 200)"};
}

// 4. Non-greedy pull count under eps = 0.3.
Outcome randomization() {
    ExperimentConfig c;
    c.env = setting_spec(1);
    c.kernel = KernelSpec::gaussian(1.0);
    c.policy.solver = SolverPath::Auto;
    c.schedule.eps_kind = EpsilonKind::Constant;
    c.schedule.eps_value = 0.3;
    c.horizon = 1000;
    c.t0 = 2;
    c.master_seed = 404;
    const auto r = randomization_rate_check(c, 200, 5.0, 0);
    const double z300 = std::abs(r.mean_count - 300.0) / r.stderr_count;
    return {z300 <= 5.0 && r.report.passed, "mean count " + num(r.mean_count) + ", stderr " + num(r.stderr_count) + ", |z| vs 300 = " +
                                                 num(z300) + ", |z| vs exact " + num(r.expected) + " = " + num(r.report.statistic) + " (tol 5)"};
}

// 5. Regret growth exponent without margin.
Outcome regret_exponent() {
    auto c = linear_rkhs(3, {(Vector(3) << 0.6, -0.3, 0.2).finished(), (Vector(3) << -0.4, 0.5, 0.3).finished()});
    c.schedule.eps_kind = EpsilonKind::PowerLaw;
    c.schedule.beta = 1.0 / 3.0;
    c.schedule.lambda_regime = LambdaRegime::FiniteDim;
    c.horizon = 20000;
    c.t0 = 10;
    c.n_runs = 25;
    c.master_seed = 505;
    const auto r = regret_exponent_check(c, 0.5, 0.55, 0.80, 0);
    return {r.report.passed, "slope on [T/2, T] = " + num(r.fit.slope) + " (band [0.55, 0.80], r2 " + num(r.fit.r2) + ", 25 seeds, T 20000)"};
}

// 6. RKHS estimation error decay with a Gaussian target and constant eps.
// Targets are f = Sigma g with g = amp * k(., c), Sigma the covariance operator of
// Uniform(-1, 1); the integral is taken by 16-node Gauss-Legendre quadrature.
Outcome estimation_decay() {
    const double gamma = 0.5;
    std::vector<double> nodes, weights;
    oracle::gauss_legendre(16, nodes, weights);
    auto target = [&](double center, double amp) {
        KernelExpansion e;
        e.coeffs = Vector(16);
        for (int i = 0; i < 16; ++i) {
            e.points.push_back(Vector::Constant(1, nodes[static_cast<std::size_t>(i)]));
            const double dx = nodes[static_cast<std::size_t>(i)] - center;
            e.coeffs[i] = amp * 0.5 * weights[static_cast<std::size_t>(i)] * std::exp(-gamma * gamma * dx * dx);
        }
        return e;
    };
    ExperimentConfig c;
    c.env.setting = SettingKind::InRkhs;
    c.env.num_arms = 2;
    c.env.dim = 1;
    c.env.contexts = ContextDist::Uniform;
    c.env.kernel = KernelSpec::gaussian(gamma);
    c.env.expansions = {target(0.6, 3.0), target(-0.6, 3.0)};
    c.kernel = KernelSpec::gaussian(gamma);
    c.policy.solver = SolverPath::Auto;
    c.schedule.eps_kind = EpsilonKind::Constant;
    c.schedule.eps_value = 0.3;
    c.schedule.lambda_regime = LambdaRegime::FiniteDim;
    c.t0 = 10;
    c.master_seed = 606;
    const auto r = estimation_error_decay(c, {500, 1000, 2000, 3000, 5000}, 25, 0.3, 0);
    std::string slopes;
    for (double s : r.median_slope) slopes += (slopes.empty() ? "" : ", ") + num(s);
    return {r.report.passed, "median slopes [" + slopes + "] vs envelope " + num(r.expected_slope) + ", max deviation " + num(r.report.statistic) +
                                 " (tol 0.3, 25 seeds, t in [500, 5000])"};
}

// 7. Setting 1: CV-selected Gaussian kernel eps-greedy beats linear eps-greedy.
Outcome setting1_ordering() {
    ExperimentConfig base;
    base.env = setting_spec(1);
    base.schedule.eps_kind = EpsilonKind::PaperSim;
    base.horizon = 1000;
    base.t0 = 50;
    base.n_runs = 25;
    base.master_seed = 707;
    base.cv.folds = 10;
    base.cv.lambdas = default_eps_greedy_grid().lambdas;

    auto gauss = base;
    gauss.kernel = KernelSpec::gaussian(1.0);
    gauss.policy.solver = SolverPath::Auto;
    gauss.cv.gammas = {0.3, 0.7, 1.5, 3.0};
    auto ridge = base;
    ridge.kernel = KernelSpec::linear(1.0);
    ridge.policy.kind = PolicyKind::WlsEpsGreedy;
    ridge.policy.ridge = true;
    ridge.policy.augment_bias = true;
    auto plain = ridge;
    plain.policy.ridge = false;

    struct Row {
        std::string name;
        const ExperimentConfig* config;
        double mean = 0.0, se = 0.0;
        std::string winner;
    };
    std::vector<Row> rows{{"gaussian", &gauss}, {"wls_ridge", &ridge}, {"wls", &plain}};
    for (auto& row : rows) {
        const auto res = cross_validate(*row.config, 0);
        const auto curve = average_traces(res.evaluation);
        row.mean = curve.mean.back();
        row.se = curve.stderr_.back();
        row.winner = describe(res.table[res.best].candidate, *row.config);
    }
    std::string detail;
    for (const auto& row : rows) detail += row.name + " " + num(row.mean) + "+-" + num(row.se) + " [" + row.winner + "]; ";
    const bool ok = rows[0].mean < rows[1].mean && rows[0].mean < rows[2].mean;
    return {ok, detail + "need gaussian lowest"};
}

// 8. Linear-kernel eps-greedy and ridge WLS eps-greedy: same arms, same predictions.
Outcome baseline_identity() {
    std::size_t mismatched_arms = 0, steps = 0;
    double worst = 0.0;
    for (int which : {1, 4}) {
        ExperimentConfig keg;
        keg.env = setting_spec(which);
        keg.kernel = KernelSpec::linear(1.0);
        keg.policy.augment_bias = true;
        keg.schedule.eps_kind = EpsilonKind::PaperSim;
        keg.schedule.lambda_regime = LambdaRegime::PowerLog;
        keg.schedule.lambda_power = 0.25;
        keg.horizon = 1000;
        keg.t0 = 50;
        auto wls = keg;
        wls.policy.kind = PolicyKind::WlsEpsGreedy;
        wls.policy.ridge = true;
        const Environment env = make_environment(keg);
        for (std::uint64_t r = 0; r < 25; ++r) {
            keg.policy.solver = r == 0 ? SolverPath::Dual : SolverPath::Auto;
            const auto seed = run_seed(808, r);
            Episode a(keg, env, seed), b(wls, env, seed);
            const auto& ka = dynamic_cast<const KernelEpsGreedyLearner&>(a.learner()).estimator();
            const auto& wb = dynamic_cast<const WlsEpsGreedyLearner&>(b.learner()).model();
            while (!a.done()) {
                const auto& sa = a.step();
                const auto& sb = b.step();
                ++steps;
                if (sa.chosen != sb.chosen) ++mismatched_arms;
                if (a.t() >= keg.t0) {
                    const Vector x = a.learner_context(sa.context);
                    for (int arm = 0; arm < env.num_arms(); ++arm) worst = std::max(worst, std::abs(ka.predict(arm, x) - wb.predict(arm, x)));
                }
            }
        }
    }
    return {mismatched_arms == 0 && worst <= 1e-8, std::to_string(mismatched_arms) + " differing arms in " + std::to_string(steps) +
                                                        " steps, max |prediction gap| " + num(worst) + " (tol 1e-8, settings 1 and 4, 25 seeds each)"};
}

// 9. Same master seed, byte-identical CSV output.
Outcome determinism() {
    std::size_t files = 0;
    for (int which = 1; which <= 4; ++which) {
        ExperimentConfig c;
        c.env = setting_spec(which);
        c.kernel = KernelSpec::gaussian(which >= 3 ? 0.3 : 1.0);
        c.policy.solver = SolverPath::Auto;
        c.horizon = 300;
        c.t0 = 20;
        c.n_runs = 3;
        c.master_seed = 909;
        auto render = [&](int threads) {
            const auto traces = run_experiment(c, threads);
            std::ostringstream out;
            for (std::size_t r = 0; r < traces.size(); ++r) write_run_csv(out, static_cast<int>(r), traces[r]);
            write_summary_csv(out, average_traces(traces));
            return out.str();
        };
        const auto first = render(1);
        if (first != render(1) || first != render(3)) return {false, "setting " + std::to_string(which) + " output differs between reruns"};
        files += 4;
    }
    return {true, std::to_string(files) + " CSV files identical across reruns and thread counts"};
}

}  // namespace

int main() {
    std::printf("kbandit acceptance suite (threads: %d)\n", resolve_threads());
    criterion(1, "dual-primal equivalence", 1, dual_primal);
    criterion(2, "reduced-full equivalence", 5, reduced_full);
    criterion(3, "weighted covariance unbiasedness", 60, covariance);
    criterion(4, "randomization rate", 60, randomization);
    criterion(5, "regret exponent without margin", 900, regret_exponent);
    criterion(6, "estimation error decay", 900, estimation_decay);
    criterion(7, "setting 1 ordering after CV", 3600, setting1_ordering);
    criterion(8, "linear baseline identity", 60, baseline_identity);
    criterion(9, "determinism", 60, determinism);
    std::printf("%s: %d of 9 criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
