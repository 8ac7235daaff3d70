#pragma once

// Experiment execution: episodes, multi-run averaging, cross-validation and
// regret-exponent fitting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kbandit/baselines.hpp"
#include "kbandit/config.hpp"
#include "kbandit/environments.hpp"
#include "kbandit/errors.hpp"
#include "kbandit/estimator.hpp"
#include "kbandit/experiment.hpp"
#include "kbandit/policy.hpp"
#include "kbandit/rng.hpp"

namespace kbandit {

// ---------------------------------------------------------------- parallelism

/// Worker count: explicit value if > 0, else KBANDIT_THREADS, else 1.
[[nodiscard]] inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("KBANDIT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

/// Runs fn(i) for i in [0, n). Tasks write to disjoint slots, so results do not
/// depend on the thread count. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
        pool.emplace_back([&] {
            while (true) {
                const auto i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(n);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ------------------------------------------------------------------- schedule

/// Running epsilon schedule with the sum of 1/eps_s needed by lambda_t.
class ScheduleTracker {
public:
    ScheduleTracker(ScheduleSpec spec, int num_arms) : spec_(spec), arms_(num_arms) {}

    /// Advances to step t (must be called for t = 1, 2, ... in order); returns eps_t.
    double advance(Step t) {
        if (t != t_ + 1) throw StateError("schedule tracker: steps must advance by one");
        t_ = t;
        eps_ = epsilon_at(spec_, t, arms_);
        if (lambda_needs_eps_history(spec_)) {
            if (!(eps_ > 0.0)) throw InvalidInput("schedule: lambda regime needs eps_t > 0");
            inverse_sum_ += 1.0 / eps_;
        }
        return eps_;
    }

    [[nodiscard]] double epsilon() const noexcept { return eps_; }
    [[nodiscard]] double lambda() const { return lambda_from_inverse_sum(spec_, t_, inverse_sum_); }
    [[nodiscard]] Step t() const noexcept { return t_; }
    [[nodiscard]] double inverse_eps_sum() const noexcept { return inverse_sum_; }

private:
    ScheduleSpec spec_;
    int arms_;
    Step t_ = 0;
    double eps_ = 0.0;
    double inverse_sum_ = 0.0;
};

// ------------------------------------------------------------------- learners

class Learner {
public:
    virtual ~Learner() = default;
    /// Adds an observation without refitting.
    virtual void record(int arm, Step t, const Vector& x, double y, double propensity) = 0;
    /// Refit after the observation at step t (eps-greedy learners use lambda).
    virtual void refit(int arm, Step t, double lambda) = 0;
    /// Fits every arm once at the end of initialization.
    virtual void fit_all(Step t, double lambda) {
        for (int a = 0; a < num_arms(); ++a) refit(a, t, lambda);
    }
    [[nodiscard]] virtual PolicyDecision decide(const Vector& x, double eps, Rng& rng) const = 0;
    [[nodiscard]] virtual int num_arms() const = 0;
    /// Whether decisions depend on eps (false for UCB).
    [[nodiscard]] virtual bool explores() const { return true; }
};

namespace harness_detail {

inline PolicyDecision eps_greedy_decide(const std::vector<double>& estimates, double eps, Rng& rng) {
    return select_arm(std::span<const double>(estimates), eps, rng);
}

}  // namespace harness_detail

class KernelEpsGreedyLearner final : public Learner {
public:
    KernelEpsGreedyLearner(KernelSpec kernel, int num_arms, int dim, EstimatorOptions options)
        : est_(kernel, num_arms, dim, options) {}

    void record(int arm, Step t, const Vector& x, double y, double propensity) override { est_.record(arm, t, x, y, propensity); }
    void refit(int arm, Step t, double lambda) override { est_.fit(arm, t, lambda); }

    [[nodiscard]] PolicyDecision decide(const Vector& x, double eps, Rng& rng) const override {
        std::vector<double> est(static_cast<std::size_t>(est_.num_arms()));
        for (int a = 0; a < est_.num_arms(); ++a) est[static_cast<std::size_t>(a)] = est_.is_fitted(a) ? est_.predict(a, x) : 0.0;
        return harness_detail::eps_greedy_decide(est, eps, rng);
    }

    [[nodiscard]] int num_arms() const override { return est_.num_arms(); }
    [[nodiscard]] const IpwkrEstimator& estimator() const noexcept { return est_; }

private:
    IpwkrEstimator est_;
};

class WlsEpsGreedyLearner final : public Learner {
public:
    WlsEpsGreedyLearner(int num_arms, int dim, bool ridge) : model_(num_arms, dim, ridge), arms_(num_arms) {}

    void record(int arm, Step t, const Vector& x, double y, double propensity) override { model_.record(arm, t, x, y, propensity); }
    void refit(int arm, Step t, double lambda) override { model_.fit(arm, t, lambda); }

    [[nodiscard]] PolicyDecision decide(const Vector& x, double eps, Rng& rng) const override {
        std::vector<double> est(static_cast<std::size_t>(arms_));
        for (int a = 0; a < arms_; ++a) est[static_cast<std::size_t>(a)] = model_.is_fitted(a) ? model_.predict(a, x) : 0.0;
        return harness_detail::eps_greedy_decide(est, eps, rng);
    }

    [[nodiscard]] int num_arms() const override { return arms_; }
    [[nodiscard]] const WeightedLinearModel& model() const noexcept { return model_; }

private:
    WeightedLinearModel model_;
    int arms_;
};

class UcbLearner final : public Learner {
public:
    UcbLearner(double gamma, double lambda, double tau, int num_arms) : ucb_(gamma, lambda, tau, num_arms) {}

    void record(int arm, Step, const Vector& x, double y, double) override { ucb_.observe(arm, x, y); }
    void refit(int, Step, double) override {}

    [[nodiscard]] PolicyDecision decide(const Vector& x, double, Rng&) const override {
        PolicyDecision d;
        d.chosen_arm = d.greedy_arm = ucb_.select(x);
        d.propensities.assign(static_cast<std::size_t>(ucb_.num_arms()), 0.0);
        d.propensities[static_cast<std::size_t>(d.chosen_arm)] = 1.0;
        d.explored = false;
        return d;
    }

    [[nodiscard]] int num_arms() const override { return ucb_.num_arms(); }
    [[nodiscard]] bool explores() const override { return false; }
    [[nodiscard]] const KernelUcb& ucb() const noexcept { return ucb_; }

private:
    KernelUcb ucb_;
};

/// Kernel the learner actually uses: a Linear kernel gets kappa from the
/// context support (plus one for the bias coordinate).
[[nodiscard]] inline KernelSpec learner_kernel(const ExperimentConfig& c, const Environment& env) {
    if (c.kernel.kind == KernelKind::Gaussian) return c.kernel;
    const double r = env.support_radius();
    return KernelSpec::linear(r * r + (c.policy.augment_bias ? 1.0 : 0.0));
}

[[nodiscard]] inline std::unique_ptr<Learner> make_learner(const ExperimentConfig& c, const Environment& env) {
    const int bias = c.policy.augment_bias ? 1 : 0;
    const int dim = env.dim() + bias;
    switch (c.policy.kind) {
        case PolicyKind::KernelEpsGreedy: {
            EstimatorOptions opt;
            opt.path = c.policy.solver;
            const double r = env.support_radius();
            opt.domain_radius = std::sqrt(r * r + bias);
            return std::make_unique<KernelEpsGreedyLearner>(learner_kernel(c, env), env.num_arms(), dim, opt);
        }
        case PolicyKind::WlsEpsGreedy:
            return std::make_unique<WlsEpsGreedyLearner>(env.num_arms(), dim, c.policy.ridge);
        case PolicyKind::KernelUcb:
            if (c.kernel.kind != KernelKind::Gaussian) throw ConfigError("kernel.kind", "kernel_ucb requires the gaussian kernel");
            return std::make_unique<UcbLearner>(c.kernel.gamma, c.policy.ucb_lambda, c.policy.tau, env.num_arms());
    }
    throw ConfigError("policy.name", "unknown policy");
}

// ---------------------------------------------------------------------- trace

struct TraceStep {
    Step t = 0;
    Vector context;
    int chosen = 0;
    int greedy = -1;  // -1 during initialization
    int optimal = 0;
    double epsilon = 0.0;
    double propensity = 0.0;
    double reward = 0.0;
    double inst_regret = 0.0;
    double cum_regret = 0.0;
    double lambda = 0.0;  // lambda of the refit at this step (0 when none)
};

struct RegretTrace {
    std::vector<TraceStep> steps;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;

    [[nodiscard]] std::vector<double> cumulative() const {
        std::vector<double> out(steps.size());
        for (std::size_t i = 0; i < steps.size(); ++i) out[i] = steps[i].cum_regret;
        return out;
    }
    [[nodiscard]] double final_regret() const { return steps.empty() ? 0.0 : steps.back().cum_regret; }
};

/// Throws StateError if r_t < 0, R_t decreases, or R_t differs from the running sum.
inline void check_trace_invariants(const RegretTrace& trace) {
    double sum = 0.0;
    double prev = 0.0;
    for (const auto& s : trace.steps) {
        sum += s.inst_regret;
        if (!(s.inst_regret >= 0.0)) throw StateError("trace: negative instantaneous regret at t=" + std::to_string(s.t));
        if (s.cum_regret != sum) throw StateError("trace: cumulative regret is not the running sum at t=" + std::to_string(s.t));
        if (s.cum_regret < prev) throw StateError("trace: cumulative regret decreased at t=" + std::to_string(s.t));
        prev = s.cum_regret;
    }
}

// -------------------------------------------------------------------- episode

/// One run of a policy in an environment, advanced one step at a time.
///
/// Steps 1..t0 pull a shuffled balanced arm sequence (remainder pulls go to the
/// lowest arm indices) with propensity 1/L; all arms are then fitted at t0.
/// Steps after t0 follow the configured policy. Per-step draws use separate
/// streams: one context and one noise draw every step, policy coins from the
/// policy stream. A fixed context list replaces the context stream when given.
class Episode {
public:
    Episode(const ExperimentConfig& config, const Environment& env, std::uint64_t seed,
            std::span<const Vector> fixed_contexts = {})
        : config_(config),
          env_(env),
          learner_(make_learner(config, env)),
          schedule_(config.schedule, env.num_arms()),
          contexts_rng_(make_rng(seed, Stream::Contexts)),
          noise_rng_(make_rng(seed, Stream::Noise)),
          policy_rng_(make_rng(seed, Stream::Policy)),
          fixed_(fixed_contexts) {
        if (!fixed_.empty() && static_cast<Step>(fixed_.size()) < config.horizon) {
            throw InvalidInput("episode: fixed context list shorter than the horizon");
        }
        trace_.seed = seed;
        const int arms = env.num_arms();
        init_arms_.resize(static_cast<std::size_t>(config.t0));
        for (Step s = 0; s < config.t0; ++s) init_arms_[static_cast<std::size_t>(s)] = static_cast<int>(s % arms);
        std::shuffle(init_arms_.begin(), init_arms_.end(), policy_rng_);
        trace_.steps.reserve(static_cast<std::size_t>(config.horizon));
    }

    [[nodiscard]] Step t() const noexcept { return t_; }
    [[nodiscard]] bool done() const noexcept { return t_ >= config_.horizon; }
    [[nodiscard]] const RegretTrace& trace() const noexcept { return trace_; }
    [[nodiscard]] RegretTrace take_trace() { return std::move(trace_); }
    [[nodiscard]] const Learner& learner() const noexcept { return *learner_; }
    [[nodiscard]] const ScheduleTracker& schedule() const noexcept { return schedule_; }

    /// Learner-side context: the raw context, plus a trailing 1 when augment_bias is set.
    [[nodiscard]] Vector learner_context(const Vector& x) const {
        if (!config_.policy.augment_bias) return x;
        Vector z(x.size() + 1);
        z.head(x.size()) = x;
        z[x.size()] = 1.0;
        return z;
    }

    const TraceStep& step() {
        if (done()) throw StateError("episode: horizon reached");
        const Step t = ++t_;
        const int arms = env_.num_arms();
        const double eps = schedule_.advance(t);

        Vector x = fixed_.empty() ? env_.sample_context(contexts_rng_) : fixed_[static_cast<std::size_t>(t - 1)];
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double z = gauss(noise_rng_);
        const Vector xl = learner_context(x);

        TraceStep row;
        row.t = t;
        row.epsilon = eps;
        if (t <= config_.t0) {
            row.chosen = init_arms_[static_cast<std::size_t>(t - 1)];
            row.greedy = -1;
            row.propensity = 1.0 / arms;
        } else {
            const PolicyDecision d = learner_->decide(xl, learner_->explores() ? eps : 0.0, policy_rng_);
            row.chosen = d.chosen_arm;
            row.greedy = d.greedy_arm;
            row.propensity = d.chosen_propensity();
            if (!learner_->explores()) row.epsilon = 0.0;
        }
        row.reward = env_.reward_from_noise(row.chosen, x, z);
        learner_->record(row.chosen, t, xl, row.reward, row.propensity);
        if (t == config_.t0) {
            row.lambda = schedule_.lambda();
            learner_->fit_all(t, row.lambda);
        } else if (t > config_.t0) {
            row.lambda = schedule_.lambda();
            learner_->refit(row.chosen, t, row.lambda);
        }

        const auto opt = env_.optimal_arm(x);
        row.optimal = opt.arm;
        row.inst_regret = opt.value - env_.mean_reward(row.chosen, x);
        cum_ += row.inst_regret;
        row.cum_regret = cum_;
        row.context = std::move(x);
        trace_.steps.push_back(std::move(row));
        return trace_.steps.back();
    }

    void run() {
        while (!done()) step();
    }

private:
    const ExperimentConfig& config_;
    const Environment& env_;
    std::unique_ptr<Learner> learner_;
    ScheduleTracker schedule_;
    Rng contexts_rng_;
    Rng noise_rng_;
    Rng policy_rng_;
    std::span<const Vector> fixed_;
    std::vector<int> init_arms_;
    Step t_ = 0;
    double cum_ = 0.0;
    RegretTrace trace_;
};

/// Environment for a config; Setting 3 parameters come from the master seed.
[[nodiscard]] inline Environment make_environment(const ExperimentConfig& config) {
    try {
        return Environment::make(config.env, config.master_seed);
    } catch (const InvalidInput& e) {
        throw ConfigError("environment", e.what());
    }
}

[[nodiscard]] inline RegretTrace run_episode(const ExperimentConfig& config, const Environment& env, std::uint64_t seed,
                                             std::span<const Vector> fixed_contexts = {}) {
    Episode ep(config, env, seed, fixed_contexts);
    ep.run();
    RegretTrace trace = ep.take_trace();
    trace.config_hash = config_hash(config);
    check_trace_invariants(trace);
    return trace;
}

[[nodiscard]] inline RegretTrace run_episode(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    const Environment env = make_environment(config);
    return run_episode(config, env, seed);
}

/// n_runs episodes with seeds run_seed(master_seed, r).
[[nodiscard]] inline std::vector<RegretTrace> run_experiment(const ExperimentConfig& config, int threads = 0) {
    config.validate();
    const Environment env = make_environment(config);
    std::vector<RegretTrace> out(static_cast<std::size_t>(config.n_runs));
    parallel_for(out.size(), resolve_threads(threads), [&](std::size_t r) {
        out[r] = run_episode(config, env, run_seed(config.master_seed, r));
    });
    return out;
}

// ------------------------------------------------------------------ averaging

struct MeanCurve {
    std::vector<double> mean;
    std::vector<double> stderr_;  // sample standard deviation / sqrt(n); 0 for one trace
};

[[nodiscard]] inline MeanCurve average_curves(const std::vector<std::vector<double>>& curves) {
    if (curves.empty()) throw InvalidInput("average: no curves");
    const std::size_t len = curves.front().size();
    for (const auto& c : curves) {
        if (c.size() != len) throw InvalidInput("average: curves differ in length");
    }
    const auto n = static_cast<double>(curves.size());
    MeanCurve out{std::vector<double>(len, 0.0), std::vector<double>(len, 0.0)};
    for (std::size_t i = 0; i < len; ++i) {
        double s = 0.0;
        for (const auto& c : curves) s += c[i];
        const double m = s / n;
        double ss = 0.0;
        for (const auto& c : curves) ss += (c[i] - m) * (c[i] - m);
        out.mean[i] = m;
        out.stderr_[i] = curves.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    }
    return out;
}

[[nodiscard]] inline MeanCurve average_traces(const std::vector<RegretTrace>& traces) {
    std::vector<std::vector<double>> curves;
    curves.reserve(traces.size());
    for (const auto& tr : traces) curves.push_back(tr.cumulative());
    return average_curves(curves);
}

/// Order-independent sum: sort, then accumulate.
[[nodiscard]] inline double stable_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return std::accumulate(values.begin(), values.end(), 0.0);
}

// ------------------------------------------------------------ exponent fitting

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// OLS of log y on log x.
[[nodiscard]] inline PowerFit fit_loglog(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw InvalidInput("fit_loglog: need at least two paired points");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw InvalidInput("fit_loglog: values must be positive");
        mx += std::log(xs[i]);
        my += std::log(ys[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = std::log(xs[i]) - mx;
        const double dy = std::log(ys[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw InvalidInput("fit_loglog: x values are all equal");
    PowerFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

/// Slope of log R_t against log t over t in [ceil(window * T), T]; curve[i] is R_{i+1}.
[[nodiscard]] inline PowerFit fit_regret_exponent(std::span<const double> curve, double window) {
    if (!(window > 0.0 && window < 1.0)) throw InvalidInput("fit_regret_exponent: window must lie in (0, 1)");
    const auto big_t = static_cast<Step>(curve.size());
    const Step first = std::max<Step>(1, static_cast<Step>(std::ceil(window * static_cast<double>(big_t))));
    std::vector<double> xs, ys;
    for (Step t = first; t <= big_t; ++t) {
        const double v = curve[static_cast<std::size_t>(t - 1)];
        if (!(v > 0.0)) throw InvalidInput("fit_regret_exponent: nonpositive regret at t=" + std::to_string(t));
        xs.push_back(static_cast<double>(t));
        ys.push_back(v);
    }
    return fit_loglog(xs, ys);
}

// ------------------------------------------------------------ cross-validation

struct CvCandidate {
    LambdaChoice lambda;
    double gamma = 1.0;
    double tau = 0.0;
    double ucb_lambda = 0.0;

    bool operator==(const CvCandidate&) const = default;
};

/// Human-readable candidate; axes the policy does not tune are omitted.
[[nodiscard]] inline std::string describe(const CvCandidate& c, const ExperimentConfig& base) {
    using config_detail::fmt_double;
    std::string out;
    auto add = [&](const std::string& part) { out += (out.empty() ? "" : " ") + part; };
    if (base.kernel.kind == KernelKind::Gaussian) add("gamma=" + fmt_double(c.gamma));
    if (base.policy.kind == PolicyKind::KernelUcb) {
        add("lambda=" + fmt_double(c.ucb_lambda));
        add("tau=" + fmt_double(c.tau));
    } else if (!(base.policy.kind == PolicyKind::WlsEpsGreedy && !base.policy.ridge)) {
        add("lambda=" + config_detail::format_lambda_choice(c.lambda));
    }
    return out.empty() ? "(no tuned parameters)" : out;
}

/// Config with a candidate's parameters applied.
[[nodiscard]] inline ExperimentConfig apply_candidate(ExperimentConfig c, const CvCandidate& cand) {
    if (c.kernel.kind == KernelKind::Gaussian) c.kernel.gamma = cand.gamma;
    if (c.policy.kind == PolicyKind::KernelUcb) {
        c.policy.tau = cand.tau;
        c.policy.ucb_lambda = cand.ucb_lambda;
        return c;
    }
    auto& s = c.schedule;
    s.lambda_regime = cand.lambda.regime;
    switch (cand.lambda.regime) {
        case LambdaRegime::Fixed: s.lambda_value = cand.lambda.value; break;
        case LambdaRegime::PowerLog:
            s.lambda_power = cand.lambda.value;
            s.lambda_scale = 1.0;
            break;
        case LambdaRegime::FiniteDim:
        case LambdaRegime::InfiniteDim: s.lambda_scale = cand.lambda.value; break;
    }
    return c;
}

/// Cartesian product of the grids in grid order (lambda outermost, then gamma,
/// then tau). Empty grids fall back to the default grids for the policy; grids
/// a policy does not use collapse to its current value.
[[nodiscard]] inline std::vector<CvCandidate> candidate_grid(const ExperimentConfig& c) {
    const bool ucb = c.policy.kind == PolicyKind::KernelUcb;
    const CvSpec defaults = ucb ? default_ucb_grid() : default_eps_greedy_grid();
    auto pick = [](const auto& given, const auto& fallback) { return given.empty() ? fallback : given; };

    std::vector<double> gammas = c.kernel.kind == KernelKind::Gaussian ? pick(c.cv.gammas, defaults.gammas)
                                                                       : std::vector<double>{c.kernel.gamma};
    std::vector<CvCandidate> out;
    if (ucb) {
        for (double lam : pick(c.cv.ucb_lambdas, defaults.ucb_lambdas))
            for (double g : gammas)
                for (double tau : pick(c.cv.taus, defaults.taus)) out.push_back({LambdaChoice{}, g, tau, lam});
        return out;
    }
    const bool uses_lambda = !(c.policy.kind == PolicyKind::WlsEpsGreedy && !c.policy.ridge);
    std::vector<LambdaChoice> lambdas = uses_lambda ? pick(c.cv.lambdas, defaults.lambdas)
                                                    : std::vector<LambdaChoice>{LambdaChoice{LambdaRegime::Fixed, 1.0}};
    for (const auto& lam : lambdas)
        for (double g : gammas) out.push_back({lam, g, 0.0, 0.0});
    return out;
}

struct CvRow {
    CvCandidate candidate;
    std::vector<double> fold_regret;  // final R_T on each training fold
    double mean_regret = 0.0;
};

struct CvResult {
    std::vector<CvRow> table;
    std::size_t best = 0;
    ExperimentConfig best_config;
    std::vector<RegretTrace> evaluation;  // n_runs runs of the winner on the test fold
};

/// k-fold protocol: draw T(k+1) contexts from the folds stream of the master
/// seed, use blocks 0..k-1 as training folds and block k as the test fold.
/// Every candidate sees the same fold contexts and the same per-fold seeds.
/// Candidates are scored by the mean final regret over folds (sorted summation);
/// the first minimum in grid order wins. The winner is then run n_runs times on
/// the test fold with seeds run_seed(master, k + r).
[[nodiscard]] inline CvResult cross_validate(const ExperimentConfig& base, int threads = 0) {
    base.validate();
    const auto grid = candidate_grid(base);
    if (grid.empty()) throw ConfigError("cv", "empty parameter grid");
    const int k = base.cv.folds;
    const Environment env = make_environment(base);

    Rng fold_rng = make_rng(base.master_seed, Stream::Folds);
    const auto total = static_cast<std::size_t>(base.horizon) * static_cast<std::size_t>(k + 1);
    std::vector<Vector> contexts;
    contexts.reserve(total);
    for (std::size_t i = 0; i < total; ++i) contexts.push_back(env.sample_context(fold_rng));
    const auto block = [&](int j) {
        return std::span<const Vector>(contexts).subspan(static_cast<std::size_t>(j) * static_cast<std::size_t>(base.horizon),
                                                         static_cast<std::size_t>(base.horizon));
    };

    std::vector<ExperimentConfig> configs;
    configs.reserve(grid.size());
    for (const auto& cand : grid) {
        configs.push_back(apply_candidate(base, cand));
        configs.back().validate();
    }

    CvResult result;
    result.table.resize(grid.size());
    std::vector<double> finals(grid.size() * static_cast<std::size_t>(k));
    parallel_for(finals.size(), resolve_threads(threads), [&](std::size_t idx) {
        const std::size_t g = idx / static_cast<std::size_t>(k);
        const int fold = static_cast<int>(idx % static_cast<std::size_t>(k));
        finals[idx] = run_episode(configs[g], env, run_seed(base.master_seed, static_cast<std::uint64_t>(fold)), block(fold)).final_regret();
    });
    for (std::size_t g = 0; g < grid.size(); ++g) {
        auto& row = result.table[g];
        row.candidate = grid[g];
        row.fold_regret.assign(finals.begin() + static_cast<std::ptrdiff_t>(g * k), finals.begin() + static_cast<std::ptrdiff_t>((g + 1) * k));
        row.mean_regret = stable_sum(row.fold_regret) / k;
        if (row.mean_regret < result.table[result.best].mean_regret) result.best = g;
    }

    result.best_config = configs[result.best];
    result.evaluation.resize(static_cast<std::size_t>(base.n_runs));
    parallel_for(result.evaluation.size(), resolve_threads(threads), [&](std::size_t r) {
        result.evaluation[r] = run_episode(result.best_config, env, run_seed(base.master_seed, static_cast<std::uint64_t>(k) + r), block(k));
    });
    return result;
}

}  // namespace kbandit
