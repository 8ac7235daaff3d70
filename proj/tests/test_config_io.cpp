#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "kbandit/config.hpp"
#include "kbandit/io.hpp"

using namespace kbandit;

namespace {

const char* kMinimal = R"(
[environment]
setting = setting1
[kernel]
kind = gaussian
gamma = 2
[policy]
name = kernel_eps_greedy
)";

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

ExperimentConfig tiny() {
    auto c = parse_config(kMinimal);
    c.horizon = 30;
    c.t0 = 4;
    c.n_runs = 3;
    c.master_seed = 11;
    return c;
}

}  // namespace

TEST(ParseConfig, MinimalUsesDefaults) {
    const auto c = parse_config(kMinimal);
    EXPECT_EQ(c.env, setting_spec(1));
    EXPECT_EQ(c.kernel, KernelSpec::gaussian(2.0));
    EXPECT_EQ(c.policy.kind, PolicyKind::KernelEpsGreedy);
    EXPECT_EQ(c.schedule, ScheduleSpec{});
    EXPECT_EQ(c.horizon, 1000);
    EXPECT_EQ(c.n_runs, 25);
}

TEST(ParseConfig, UnknownKeyIsNamed) {
    const std::string text = std::string(kMinimal) + "[schedule]\nepsilonn = papersim\n";
    try {
        (void)parse_config(text);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "schedule.epsilonn");
        EXPECT_EQ(e.line(), 10);
        EXPECT_NE(std::string(e.what()).find("epsilonn"), std::string::npos);
    }
}

TEST(ParseConfig, RangeErrorsNameTheKey) {
    auto key_of = [](const std::string& extra) {
        try {
            (void)parse_config(std::string(kMinimal) + extra);
        } catch (const ConfigError& e) {
            return e.key();
        }
        return std::string("<no error>");
    };
    EXPECT_EQ(key_of("[schedule]\nepsilon = powerlaw\nbeta = 1.5\n"), "schedule.beta");
    EXPECT_EQ(key_of("[schedule]\nlambda = infinitedim\nalpha = 0.5\n"), "schedule.alpha");
    EXPECT_EQ(key_of("[schedule]\nlambda = infinitedim\ndelta = 1\n"), "schedule.delta");
    EXPECT_EQ(key_of("[run]\nt0 = 1\n"), "run.t0");
    EXPECT_EQ(key_of("[run]\nT = 10\nt0 = 10\n"), "run.T");
    EXPECT_EQ(key_of("[run]\nT = ten\n"), "run.T");
    EXPECT_EQ(key_of("[schedule]\nepsilon = greedy\n"), "schedule.epsilon");
    EXPECT_EQ(key_of("[policy]\nsolver = magic\n"), "policy.solver");
    EXPECT_EQ(key_of("[nonsense]\n"), "nonsense");
    EXPECT_EQ(key_of("[run]\nT = 10\nT = 20\n"), "run.T");
}

TEST(ParseConfig, MissingRequiredKey) {
    try {
        (void)parse_config("[environment]\nsetting = setting1\n[policy]\nname = kernel_ucb\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "kernel.kind");
    }
}

TEST(ParseConfig, FractionsAndGrids) {
    const auto c = parse_config(std::string(kMinimal) +
                                "[schedule]\nepsilon = powerlaw\nbeta = 1/3\n[cv]\nfolds = 3\nlambda_grid = powlog(1/2), fixed(5e-5)\ngamma_grid = 0.5, 1\n");
    EXPECT_EQ(c.schedule.beta, 1.0 / 3.0);
    ASSERT_EQ(c.cv.lambdas.size(), 2u);
    EXPECT_EQ(c.cv.lambdas[0], (LambdaChoice{LambdaRegime::PowerLog, 0.5}));
    EXPECT_EQ(c.cv.lambdas[1], (LambdaChoice{LambdaRegime::Fixed, 5e-5}));
    EXPECT_EQ(c.cv.gammas, (std::vector<double>{0.5, 1.0}));
}

TEST(ParseConfig, RoundTripIsExact) {
    std::vector<ExperimentConfig> configs;
    configs.push_back(parse_config(kMinimal));
    configs.push_back(parse_config(R"(
[environment]
setting = inrkhs
noise_sigma = 0.25
arms = 3
dim = 2
contexts = truncnormal
kernel = gaussian
gamma = 0.7
arm.0 = 1 @ 0.1 0.2 ; -0.5 @ 0.3 0.4
arm.1 = 0.3333333333333333 @ 0 0
arm.2 = 2 @ 1 -1
[kernel]
kind = linear
[policy]
name = wls_ridge_eps_greedy
augment_bias = true
[schedule]
epsilon = constant
epsilon_value = 0.123456789012345678
lambda = infinitedim
alpha = 2.5
gamma_source = 0.25
delta = 0.05
[run]
T = 77
t0 = 9
n_runs = 4
seed = 18446744073709551615
[cv]
folds = 4
lambda_grid = powlog(1/6), fixed(0.5), finitedim(0.01)
gamma_grid = 0.1, 0.3
)"));
    configs.push_back(parse_config(R"(
[environment]
setting = setting2
board_cells = 5
[kernel]
kind = gaussian
gamma = 3.3
[policy]
name = kernel_ucb
tau = 0.35
ucb_lambda = 0.15
[cv]
tau_grid = 0.05, 0.1
ucb_lambda_grid = 0.05
)"));
    for (const auto& c : configs) {
        const auto text = serialize_config(c);
        const auto back = parse_config(text);
        EXPECT_EQ(back, c) << text;
        EXPECT_EQ(serialize_config(back), text);
        EXPECT_EQ(config_hash(back), config_hash(c));
    }
    EXPECT_NE(config_hash(configs[0]), config_hash(configs[1]));
}

TEST(RunCsv, RowCountAndDeterminism) {
    const auto c = tiny();
    const auto tr = run_episode(c, run_seed(c.master_seed, 0));
    std::ostringstream a, b;
    write_run_csv(a, 0, tr);
    write_run_csv(b, 0, run_episode(c, run_seed(c.master_seed, 0)));
    EXPECT_EQ(a.str(), b.str());
    const auto rows = read_csv(a.str());
    ASSERT_EQ(rows.size(), 31u);
    EXPECT_EQ(rows[0].size(), 9u);
    EXPECT_EQ(rows[0][0], "run_id");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].size(), 9u);
        EXPECT_EQ(std::stoi(rows[i][1]), static_cast<int>(i));
        if (i <= 4) EXPECT_EQ(rows[i][3], "-1");
    }
}

TEST(SummaryCsv, MatchesIndependentAverage) {
    const auto c = tiny();
    const auto traces = run_experiment(c, 1);
    std::vector<std::string> run_texts;
    for (std::size_t r = 0; r < traces.size(); ++r) {
        std::ostringstream o;
        write_run_csv(o, static_cast<int>(r), traces[r]);
        run_texts.push_back(o.str());
    }
    std::ostringstream s;
    write_summary_csv(s, average_traces(traces));
    const auto summary = read_csv(s.str());
    ASSERT_EQ(summary.size(), 31u);
    for (std::size_t i = 1; i < summary.size(); ++i) {
        std::vector<double> vals;
        for (const auto& text : run_texts) vals.push_back(std::stod(read_csv(text)[i][8]));
        double m = 0;
        for (double v : vals) m += v;
        m /= vals.size();
        double ss = 0;
        for (double v : vals) ss += (v - m) * (v - m);
        const double se = std::sqrt(ss / (vals.size() - 1) / vals.size());
        EXPECT_NEAR(std::stod(summary[i][1]), m, 1e-9 * (1 + std::abs(m)));
        EXPECT_NEAR(std::stod(summary[i][2]), se, 1e-9 * (1 + se));
    }
}

TEST(PlotData, WideTableAndSvg) {
    const auto c = tiny();
    const auto curve = average_traces(run_experiment(c, 1));
    std::vector<PlotSeries> series{{"a", curve}, {"b", curve}};
    std::ostringstream csv, svg, logsvg;
    write_plotdata_csv(csv, series);
    const auto rows = read_csv(csv.str());
    ASSERT_EQ(rows.size(), 31u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "a_mean", "a_stderr", "b_mean", "b_stderr"}));
    write_regret_svg(svg, series);
    write_regret_svg(logsvg, series, true);
    for (const auto* s : {&svg, &logsvg}) {
        const auto text = s->str();
        EXPECT_EQ(text.rfind("<svg", 0), 0u);
        EXPECT_NE(text.find("</svg>"), std::string::npos);
        std::size_t n = 0;
        for (auto p = text.find("<polyline"); p != std::string::npos; p = text.find("<polyline", p + 1)) ++n;
        EXPECT_EQ(n, 2u);
    }
    series[1].curve.mean.pop_back();
    EXPECT_THROW(write_plotdata_csv(csv, series), InvalidInput);
}

TEST(ReportsCsv, OneRowPerReport) {
    const ExperimentConfig c;
    std::ostringstream o;
    write_reports_csv(o, {make_report("a", 0.1, 0.2, 5, c, "x \"quoted\""), make_report("b", 1.0, 0.2, 5, c, "")});
    const auto rows = read_csv(o.str());
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][3], "true");
    EXPECT_EQ(rows[2][3], "false");
    EXPECT_EQ(o.str().find("\"quoted\""), std::string::npos);
}
