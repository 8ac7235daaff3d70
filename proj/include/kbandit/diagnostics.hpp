#pragma once

// Monte-Carlo checks of the estimator's theoretical properties. Each check
// returns a TheoryReport whose verdict is statistic <= tolerance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kbandit/environments.hpp"
#include "kbandit/errors.hpp"
#include "kbandit/harness.hpp"

namespace kbandit {

struct TheoryReport {
    std::string name;
    double statistic = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::size_t n_samples = 0;
    std::uint64_t master_seed = 0;
    std::uint64_t config_hash = 0;
    std::string detail;  // how the tolerance was set, plus raw values
};

[[nodiscard]] inline TheoryReport make_report(std::string name, double statistic, double tolerance, std::size_t n,
                                              const ExperimentConfig& config, std::string detail) {
    if (!std::isfinite(statistic) || !std::isfinite(tolerance)) throw NumericalError("diagnostic statistic is not finite", 0.0, 0.0);
    TheoryReport r;
    r.name = std::move(name);
    r.statistic = statistic;
    r.tolerance = tolerance;
    r.passed = statistic <= tolerance;
    r.n_samples = n;
    r.master_seed = config.master_seed;
    r.config_hash = config_hash(config);
    r.detail = std::move(detail);
    return r;
}

/// N(lambda) = tr((Sigma + lambda I)^{-1} Sigma) from the eigenvalues of Sigma.
[[nodiscard]] inline double effective_dimension(const Matrix& sigma, double lambda) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw InvalidInput("effective_dimension: need a nonempty square matrix");
    if (!(lambda > 0.0)) throw InvalidInput("effective_dimension: lambda must be > 0");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InvalidInput("effective_dimension: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    double n = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double eta = std::max(0.0, eig.eigenvalues()[i]);
        n += eta / (eta + lambda);
    }
    return n;
}

/// Sigma-hat_{i,t} = (1/t) sum_{s<=t, a_s=i} (1/p_s) x_s x_s^T from a trace prefix.
[[nodiscard]] inline Matrix weighted_covariance(const RegretTrace& trace, int arm, Step t) {
    if (t < 1 || static_cast<std::size_t>(t) > trace.steps.size()) throw InvalidInput("weighted_covariance: t out of range");
    const auto d = trace.steps.front().context.size();
    Matrix s = Matrix::Zero(d, d);
    for (Step i = 0; i < t; ++i) {
        const auto& row = trace.steps[static_cast<std::size_t>(i)];
        if (row.chosen != arm) continue;
        s.selfadjointView<Eigen::Lower>().rankUpdate(row.context, 1.0 / row.propensity);
    }
    Matrix full = s.selfadjointView<Eigen::Lower>();
    return full / static_cast<double>(t);
}

struct CovarianceCheck {
    TheoryReport report;
    std::vector<Matrix> mean_estimate;  // per arm
    Matrix sigma;
};

/// Averages Sigma-hat_{i,t} over n_mc episodes and compares it with the
/// analytic second moment of the context law. Statistic: the largest
/// Frobenius distance over arms.
[[nodiscard]] inline CovarianceCheck check_covariance_unbiasedness(ExperimentConfig config, Step t, int n_mc,
                                                                   double tolerance = 0.05, int threads = 0) {
    if (config.kernel.kind != KernelKind::Linear) throw InvalidInput("covariance check: needs the linear kernel");
    if (n_mc < 1) throw InvalidInput("covariance check: n_mc must be >= 1");
    config.horizon = t;
    config.n_runs = n_mc;
    config.validate();
    const Environment env = make_environment(config);
    const int arms = env.num_arms();
    std::vector<std::vector<Matrix>> per_run(static_cast<std::size_t>(n_mc));
    parallel_for(per_run.size(), resolve_threads(threads), [&](std::size_t r) {
        const auto trace = run_episode(config, env, run_seed(config.master_seed, r));
        for (int a = 0; a < arms; ++a) per_run[r].push_back(weighted_covariance(trace, a, t));
    });
    CovarianceCheck out;
    out.sigma = env.second_moment();
    double worst = 0.0;
    for (int a = 0; a < arms; ++a) {
        Matrix mean = Matrix::Zero(env.dim(), env.dim());
        for (const auto& run : per_run) mean += run[static_cast<std::size_t>(a)];
        mean /= static_cast<double>(n_mc);
        worst = std::max(worst, (mean - out.sigma).norm());
        out.mean_estimate.push_back(std::move(mean));
    }
    out.report = make_report("covariance_unbiasedness", worst, tolerance, static_cast<std::size_t>(n_mc), config,
                             "max over arms of ||mean Sigma_hat - Sigma||_F at t=" + std::to_string(t));
    return out;
}

struct RandomizationCheck {
    TheoryReport report;
    double mean_count = 0.0;
    double stderr_count = 0.0;
    double expected = 0.0;  // sum over t > t0 of P(chosen != greedy) = eps_t
};

/// Counts post-initialization steps whose chosen arm differs from the greedy
/// arm. Under the epsilon-greedy rule that event has probability eps_t.
/// Statistic: |mean count - expected| / stderr, tolerance: z_tolerance.
[[nodiscard]] inline RandomizationCheck randomization_rate_check(const ExperimentConfig& config, int n_seeds,
                                                                 double z_tolerance = 5.0, int threads = 0) {
    if (config.policy.kind == PolicyKind::KernelUcb) throw InvalidInput("randomization check: needs an epsilon-greedy policy");
    if (n_seeds < 2) throw InvalidInput("randomization check: need at least two seeds");
    config.validate();
    const Environment env = make_environment(config);
    std::vector<double> counts(static_cast<std::size_t>(n_seeds));
    parallel_for(counts.size(), resolve_threads(threads), [&](std::size_t r) {
        const auto trace = run_episode(config, env, run_seed(config.master_seed, r));
        double c = 0.0;
        for (const auto& s : trace.steps) {
            if (s.t > config.t0 && s.chosen != s.greedy) c += 1.0;
        }
        counts[r] = c;
    });
    RandomizationCheck out;
    for (Step t = config.t0 + 1; t <= config.horizon; ++t) out.expected += epsilon_at(config.schedule, t, config.env.num_arms);
    const auto n = static_cast<double>(n_seeds);
    out.mean_count = stable_sum(counts) / n;
    double ss = 0.0;
    for (double c : counts) ss += (c - out.mean_count) * (c - out.mean_count);
    out.stderr_count = std::sqrt(ss / (n - 1.0) / n);
    const double diff = std::abs(out.mean_count - out.expected);
    const double z = out.stderr_count > 0.0 ? diff / out.stderr_count : (diff == 0.0 ? 0.0 : INFINITY);
    out.report = make_report("randomization_rate", z, z_tolerance, counts.size(), config,
                             "mean=" + config_detail::fmt_double(out.mean_count) + " expected=" + config_detail::fmt_double(out.expected) +
                                 " stderr=" + config_detail::fmt_double(out.stderr_count));
    return out;
}

struct DecayCheck {
    TheoryReport report;
    std::vector<Step> checkpoints;
    std::vector<double> envelope;                        // [(1/t^2) sum 1/eps_s]^{1/2} at each checkpoint
    std::vector<std::vector<std::vector<double>>> errors;  // [seed][arm][checkpoint]
    std::vector<std::vector<double>> slopes;             // [arm][seed], log error vs log t
    std::vector<double> median_slope;                    // per arm
    double expected_slope = 0.0;                         // log-log slope of the envelope vs t
};

[[nodiscard]] inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidInput("median of an empty list");
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Records ||f_hat_{i,t} - f_i||_H at the checkpoints in n_seeds episodes of an
/// in-RKHS environment, fits log error against log t per seed and arm, and
/// compares the median slope with the slope of the finite-dimensional
/// envelope. Statistic: the largest |median slope - envelope slope| over arms.
[[nodiscard]] inline DecayCheck estimation_error_decay(ExperimentConfig config, std::vector<Step> checkpoints, int n_seeds,
                                                       double tolerance = 0.3, int threads = 0) {
    if (config.env.setting != SettingKind::InRkhs) throw InvalidInput("decay check: needs an in-RKHS environment");
    if (config.policy.kind != PolicyKind::KernelEpsGreedy) throw InvalidInput("decay check: needs the kernel epsilon-greedy policy");
    if (config.policy.augment_bias) throw InvalidInput("decay check: target expansions live in the raw context space");
    if (checkpoints.size() < 2) throw InvalidInput("decay check: need at least two checkpoints");
    std::sort(checkpoints.begin(), checkpoints.end());
    if (checkpoints.front() <= config.t0) throw InvalidInput("decay check: checkpoints must come after initialization");
    config.horizon = checkpoints.back();
    config.validate();
    const Environment env = make_environment(config);
    const int arms = env.num_arms();

    DecayCheck out;
    out.checkpoints = checkpoints;
    out.errors.resize(static_cast<std::size_t>(n_seeds));
    parallel_for(out.errors.size(), resolve_threads(threads), [&](std::size_t r) {
        Episode ep(config, env, run_seed(config.master_seed, r));
        const auto& learner = dynamic_cast<const KernelEpsGreedyLearner&>(ep.learner());
        auto& errs = out.errors[r];
        errs.assign(static_cast<std::size_t>(arms), {});
        for (Step c : checkpoints) {
            while (ep.t() < c) ep.step();
            for (int a = 0; a < arms; ++a) errs[static_cast<std::size_t>(a)].push_back(learner.estimator().rkhs_error_norm(a, env.expansion(a)));
        }
    });

    ScheduleTracker tracker(config.schedule, arms);
    std::vector<double> ts;
    for (Step c : checkpoints) {
        while (tracker.t() < c) tracker.advance(tracker.t() + 1);
        out.envelope.push_back(std::sqrt(lambda_inner(c, tracker.inverse_eps_sum())));
        ts.push_back(static_cast<double>(c));
    }
    out.expected_slope = fit_loglog(ts, out.envelope).slope;

    double worst = 0.0;
    out.slopes.assign(static_cast<std::size_t>(arms), {});
    for (int a = 0; a < arms; ++a) {
        for (const auto& seed_errs : out.errors) out.slopes[static_cast<std::size_t>(a)].push_back(fit_loglog(ts, seed_errs[static_cast<std::size_t>(a)]).slope);
        out.median_slope.push_back(median(out.slopes[static_cast<std::size_t>(a)]));
        worst = std::max(worst, std::abs(out.median_slope.back() - out.expected_slope));
    }
    std::string detail = "envelope slope=" + config_detail::fmt_double(out.expected_slope) + " median slopes:";
    for (double s : out.median_slope) detail += " " + config_detail::fmt_double(s);
    out.report = make_report("estimation_error_decay", worst, tolerance, static_cast<std::size_t>(n_seeds), config, detail);
    return out;
}

struct ExponentCheck {
    TheoryReport report;
    PowerFit fit;
    MeanCurve curve;
};

/// Fits the log-log slope of the mean cumulative regret over [window T, T] and
/// checks it against the band [lo, hi]. Statistic: distance outside the band.
[[nodiscard]] inline ExponentCheck regret_exponent_check(const ExperimentConfig& config, double window, double lo, double hi,
                                                         int threads = 0) {
    ExponentCheck out;
    out.curve = average_traces(run_experiment(config, threads));
    out.fit = fit_regret_exponent(out.curve.mean, window);
    const double outside = std::max({0.0, lo - out.fit.slope, out.fit.slope - hi});
    out.report = make_report("regret_exponent", outside, 0.0, static_cast<std::size_t>(config.n_runs), config,
                             "slope=" + config_detail::fmt_double(out.fit.slope) + " band=[" + config_detail::fmt_double(lo) + ", " +
                                 config_detail::fmt_double(hi) + "] r2=" + config_detail::fmt_double(out.fit.r2));
    return out;
}

}  // namespace kbandit
