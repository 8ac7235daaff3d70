#pragma once

// Line-oriented experiment configuration: `[section]` headers and
// `key = value` lines, `#` starts a comment. Sections: environment, kernel,
// policy, schedule, run, cv. Unknown sections or keys are errors. The full
// grammar and every key with its default is documented in docs/formats.md.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kbandit/errors.hpp"
#include "kbandit/experiment.hpp"

namespace kbandit {

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Entry {
    std::string value;
    int line = 0;
};

// Section -> key -> entry, with consumption tracking so unknown keys are reported.
class Table {
public:
    std::map<std::string, std::map<std::string, Entry>> data;
    std::set<std::string> used;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = data.find(sec);
        return s != data.end() && s->second.count(key);
    }

    const Entry* get(const std::string& sec, const std::string& key) {
        auto s = data.find(sec);
        if (s == data.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        used.insert(sec + "." + key);
        return &k->second;
    }

    void check_all_used() const {
        for (const auto& [sec, keys] : data) {
            for (const auto& [key, entry] : keys) {
                if (!used.count(sec + "." + key)) throw ConfigError(sec + "." + key, "unknown key", entry.line);
            }
        }
    }
};

inline double parse_number(const std::string& text, const std::string& key, int line) {
    auto one = [&](const std::string& s) {
        double v = 0.0;
        const auto* first = s.data();
        const auto* last = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || s.empty()) throw ConfigError(key, "not a number: '" + text + "'", line);
        return v;
    };
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        const double den = one(trim(text.substr(slash + 1)));
        if (den == 0.0) throw ConfigError(key, "division by zero in '" + text + "'", line);
        return one(trim(text.substr(0, slash))) / den;
    }
    return one(text);
}

inline std::int64_t parse_int(const std::string& text, const std::string& key, int line) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) throw ConfigError(key, "not an integer: '" + text + "'", line);
    return v;
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& key, int line) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) throw ConfigError(key, "not an unsigned 64-bit integer: '" + text + "'", line);
    return v;
}

inline bool parse_bool(const std::string& text, const std::string& key, int line) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'", line);
}

template <class E>
E parse_enum(const std::string& text, const std::string& key, int line, std::initializer_list<std::pair<const char*, E>> options) {
    std::string allowed;
    for (const auto& [name, value] : options) {
        if (text == name) return value;
        allowed += allowed.empty() ? name : std::string("|") + name;
    }
    throw ConfigError(key, "expected one of " + allowed + ", got '" + text + "'", line);
}

// "c @ x1 x2 ... ; c @ ..."
inline KernelExpansion parse_expansion(const std::string& text, const std::string& key, int line) {
    KernelExpansion e;
    std::vector<double> coeffs;
    for (const auto& term : split(text, ';')) {
        const auto at = term.find('@');
        if (at == std::string::npos) throw ConfigError(key, "expansion term must be 'coeff @ x1 x2 ...'", line);
        coeffs.push_back(parse_number(trim(term.substr(0, at)), key, line));
        std::istringstream coords(term.substr(at + 1));
        std::vector<double> xs;
        std::string tok;
        while (coords >> tok) xs.push_back(parse_number(tok, key, line));
        if (xs.empty()) throw ConfigError(key, "expansion point has no coordinates", line);
        e.points.push_back(Eigen::Map<Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())));
    }
    e.coeffs = Eigen::Map<Vector>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    return e;
}

inline std::string format_expansion(const KernelExpansion& e) {
    std::string out;
    for (std::size_t j = 0; j < e.points.size(); ++j) {
        if (j) out += " ; ";
        out += fmt_double(e.coeffs[static_cast<Eigen::Index>(j)]) + " @";
        for (Eigen::Index i = 0; i < e.points[j].size(); ++i) out += " " + fmt_double(e.points[j][i]);
    }
    return out;
}

// "powlog(1/2)", "fixed(5e-5)", "finitedim(1)", "infinitedim(1)"
inline LambdaChoice parse_lambda_choice(const std::string& text, const std::string& key, int line) {
    const auto open = text.find('(');
    const auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open || close + 1 != text.size()) {
        throw ConfigError(key, "lambda grid entry must look like powlog(p) or fixed(v), got '" + text + "'", line);
    }
    const auto name = trim(text.substr(0, open));
    LambdaChoice c;
    c.regime = parse_enum<LambdaRegime>(name, key, line,
                                        {{"powlog", LambdaRegime::PowerLog}, {"fixed", LambdaRegime::Fixed},
                                         {"finitedim", LambdaRegime::FiniteDim}, {"infinitedim", LambdaRegime::InfiniteDim}});
    c.value = parse_number(trim(text.substr(open + 1, close - open - 1)), key, line);
    return c;
}

inline std::string format_lambda_choice(const LambdaChoice& c) {
    const char* name = c.regime == LambdaRegime::PowerLog ? "powlog"
                       : c.regime == LambdaRegime::Fixed  ? "fixed"
                       : c.regime == LambdaRegime::FiniteDim ? "finitedim"
                                                             : "infinitedim";
    return std::string(name) + "(" + fmt_double(c.value) + ")";
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_double(v[i]);
    return out;
}

}  // namespace config_detail

/// Parses and validates a configuration. Throws ConfigError with line and key path.
[[nodiscard]] inline ExperimentConfig parse_config(const std::string& text) {
    using namespace config_detail;
    static const std::set<std::string> sections = {"environment", "kernel", "policy", "schedule", "run", "cv"};
    Table tab;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("", "malformed section header '" + line + "'", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (!sections.count(section)) throw ConfigError(section, "unknown section", line_no);
            tab.data[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("", "expected 'key = value', got '" + line + "'", line_no);
        if (section.empty()) throw ConfigError("", "key outside of any [section]", line_no);
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(section, "empty key", line_no);
        auto& slot = tab.data[section];
        if (slot.count(key)) throw ConfigError(section + "." + key, "duplicate key", line_no);
        slot[key] = Entry{trim(line.substr(eq + 1)), line_no};
    }

    ExperimentConfig c;
    auto num = [&](const char* sec, const char* key, double& out) {
        if (const auto* e = tab.get(sec, key)) out = parse_number(e->value, std::string(sec) + "." + key, e->line);
    };
    auto integer = [&](const char* sec, const char* key, auto& out) {
        if (const auto* e = tab.get(sec, key)) out = static_cast<std::remove_reference_t<decltype(out)>>(parse_int(e->value, std::string(sec) + "." + key, e->line));
    };
    auto require = [&](const char* sec, const char* key) -> const Entry& {
        const auto* e = tab.get(sec, key);
        if (!e) throw ConfigError(std::string(sec) + "." + key, "required key is missing");
        return *e;
    };

    // [environment]
    {
        const auto& e = require("environment", "setting");
        c.env.setting = parse_enum<SettingKind>(e.value, "environment.setting", e.line,
                                                {{"setting1", SettingKind::Setting1}, {"setting2", SettingKind::Setting2},
                                                 {"setting3", SettingKind::Setting3}, {"setting4", SettingKind::Setting4},
                                                 {"inrkhs", SettingKind::InRkhs}});
        num("environment", "noise_sigma", c.env.noise_sigma);
        if (c.env.setting == SettingKind::InRkhs) {
            const auto& arms = require("environment", "arms");
            c.env.num_arms = static_cast<int>(parse_int(arms.value, "environment.arms", arms.line));
            const auto& dim = require("environment", "dim");
            c.env.dim = static_cast<int>(parse_int(dim.value, "environment.dim", dim.line));
            if (const auto* ce = tab.get("environment", "contexts")) {
                c.env.contexts = parse_enum<ContextDist>(ce->value, "environment.contexts", ce->line,
                                                         {{"uniform", ContextDist::Uniform}, {"truncnormal", ContextDist::TruncNormal}});
            }
            if (const auto* ke = tab.get("environment", "kernel")) {
                const auto kind = parse_enum<KernelKind>(ke->value, "environment.kernel", ke->line,
                                                         {{"gaussian", KernelKind::Gaussian}, {"linear", KernelKind::Linear}});
                double gamma = 1.0;
                num("environment", "gamma", gamma);
                if (kind == KernelKind::Gaussian) {
                    if (!(gamma > 0.0)) throw ConfigError("environment.gamma", "must be > 0");
                    c.env.kernel = KernelSpec::gaussian(gamma);
                } else {
                    c.env.kernel = KernelSpec::linear(1.0);
                }
            } else {
                num("environment", "gamma", c.env.kernel.gamma);
            }
            for (int i = 0; i < std::max(c.env.num_arms, 0); ++i) {
                const std::string key = "arm." + std::to_string(i);
                const auto* ae = tab.get("environment", key.c_str());
                if (!ae) throw ConfigError("environment." + key, "required key is missing");
                c.env.expansions.push_back(parse_expansion(ae->value, "environment." + key, ae->line));
            }
        } else {
            const int which = c.env.setting == SettingKind::Setting1 ? 1 : c.env.setting == SettingKind::Setting2 ? 2
                              : c.env.setting == SettingKind::Setting3 ? 3 : 4;
            const auto canon = setting_spec(which, c.env.noise_sigma);
            c.env.num_arms = canon.num_arms;
            c.env.dim = canon.dim;
            c.env.contexts = canon.contexts;
            if (which == 2) integer("environment", "board_cells", c.env.board_cells);
        }
    }

    // [kernel]
    {
        const auto& e = require("kernel", "kind");
        const auto kind = parse_enum<KernelKind>(e.value, "kernel.kind", e.line,
                                                 {{"gaussian", KernelKind::Gaussian}, {"linear", KernelKind::Linear}});
        double gamma = 1.0;
        num("kernel", "gamma", gamma);
        if (kind == KernelKind::Gaussian) {
            if (!(gamma > 0.0)) throw ConfigError("kernel.gamma", "must be > 0");
            c.kernel = KernelSpec::gaussian(gamma);
        } else {
            c.kernel = KernelSpec::linear(1.0);
        }
    }

    // [policy]
    {
        const auto& e = require("policy", "name");
        const auto name = e.value;
        if (name == "kernel_eps_greedy") {
            c.policy.kind = PolicyKind::KernelEpsGreedy;
        } else if (name == "kernel_ucb") {
            c.policy.kind = PolicyKind::KernelUcb;
        } else if (name == "wls_eps_greedy" || name == "wls_ridge_eps_greedy") {
            c.policy.kind = PolicyKind::WlsEpsGreedy;
            c.policy.ridge = name == "wls_ridge_eps_greedy";
        } else {
            throw ConfigError("policy.name", "expected kernel_eps_greedy|kernel_ucb|wls_eps_greedy|wls_ridge_eps_greedy, got '" + name + "'", e.line);
        }
        if (const auto* s = tab.get("policy", "solver")) {
            c.policy.solver = parse_enum<SolverPath>(s->value, "policy.solver", s->line,
                                                     {{"dual", SolverPath::Dual}, {"primal", SolverPath::Primal}, {"auto", SolverPath::Auto}});
        }
        num("policy", "tau", c.policy.tau);
        num("policy", "ucb_lambda", c.policy.ucb_lambda);
        if (const auto* b = tab.get("policy", "augment_bias")) c.policy.augment_bias = parse_bool(b->value, "policy.augment_bias", b->line);
    }

    // [schedule]
    {
        auto& s = c.schedule;
        if (const auto* e = tab.get("schedule", "epsilon")) {
            s.eps_kind = parse_enum<EpsilonKind>(e->value, "schedule.epsilon", e->line,
                                                 {{"papersim", EpsilonKind::PaperSim}, {"powerlaw", EpsilonKind::PowerLaw},
                                                  {"constant", EpsilonKind::Constant}});
        }
        num("schedule", "beta", s.beta);
        num("schedule", "epsilon_scale", s.eps_scale);
        num("schedule", "epsilon_value", s.eps_value);
        if (const auto* e = tab.get("schedule", "lambda")) {
            s.lambda_regime = parse_enum<LambdaRegime>(e->value, "schedule.lambda", e->line,
                                                       {{"finitedim", LambdaRegime::FiniteDim}, {"infinitedim", LambdaRegime::InfiniteDim},
                                                        {"fixed", LambdaRegime::Fixed}, {"powlog", LambdaRegime::PowerLog}});
        }
        num("schedule", "alpha", s.alpha);
        num("schedule", "gamma_source", s.gamma_source);
        num("schedule", "delta", s.delta);
        num("schedule", "lambda_value", s.lambda_value);
        num("schedule", "lambda_power", s.lambda_power);
        num("schedule", "lambda_scale", s.lambda_scale);
        // field-level range checks with the precise key
        if (s.eps_kind == EpsilonKind::PowerLaw && !(s.beta > 0.0 && s.beta < 1.0)) throw ConfigError("schedule.beta", "must lie in (0, 1)");
        if (s.lambda_regime == LambdaRegime::InfiniteDim) {
            if (!(s.alpha > 1.0)) throw ConfigError("schedule.alpha", "must be > 1");
            if (!(s.gamma_source > 0.0 && s.gamma_source <= 0.5)) throw ConfigError("schedule.gamma_source", "must lie in (0, 1/2]");
            if (!(s.delta > 0.0 && s.delta < 1.0)) throw ConfigError("schedule.delta", "must lie in (0, 1)");
        }
    }

    // [run]
    integer("run", "T", c.horizon);
    integer("run", "t0", c.t0);
    integer("run", "n_runs", c.n_runs);
    if (const auto* e = tab.get("run", "seed")) c.master_seed = parse_u64(e->value, "run.seed", e->line);

    // [cv]
    integer("cv", "folds", c.cv.folds);
    if (const auto* e = tab.get("cv", "lambda_grid")) {
        for (const auto& tok : split(e->value, ',')) c.cv.lambdas.push_back(parse_lambda_choice(tok, "cv.lambda_grid", e->line));
    }
    auto grid = [&](const char* key, std::vector<double>& out) {
        if (const auto* e = tab.get("cv", key)) {
            for (const auto& tok : split(e->value, ',')) out.push_back(parse_number(tok, std::string("cv.") + key, e->line));
        }
    };
    grid("gamma_grid", c.cv.gammas);
    grid("tau_grid", c.cv.taus);
    grid("ucb_lambda_grid", c.cv.ucb_lambdas);

    tab.check_all_used();
    c.validate();
    return c;
}

/// Canonical text form; parse_config(serialize_config(c)) == c.
[[nodiscard]] inline std::string serialize_config(const ExperimentConfig& c) {
    using config_detail::fmt_double;
    std::ostringstream o;
    const char* settings[] = {"setting1", "setting2", "setting3", "setting4", "inrkhs"};
    o << "[environment]\n";
    o << "setting = " << settings[static_cast<int>(c.env.setting)] << "\n";
    o << "noise_sigma = " << fmt_double(c.env.noise_sigma) << "\n";
    if (c.env.setting == SettingKind::Setting2) o << "board_cells = " << c.env.board_cells << "\n";
    if (c.env.setting == SettingKind::InRkhs) {
        o << "arms = " << c.env.num_arms << "\n";
        o << "dim = " << c.env.dim << "\n";
        o << "contexts = " << (c.env.contexts == ContextDist::Uniform ? "uniform" : "truncnormal") << "\n";
        o << "kernel = " << to_string(c.env.kernel.kind) << "\n";
        if (c.env.kernel.kind == KernelKind::Gaussian) o << "gamma = " << fmt_double(c.env.kernel.gamma) << "\n";
        for (std::size_t i = 0; i < c.env.expansions.size(); ++i) {
            o << "arm." << i << " = " << config_detail::format_expansion(c.env.expansions[i]) << "\n";
        }
    }
    o << "\n[kernel]\n";
    o << "kind = " << to_string(c.kernel.kind) << "\n";
    if (c.kernel.kind == KernelKind::Gaussian) o << "gamma = " << fmt_double(c.kernel.gamma) << "\n";
    o << "\n[policy]\n";
    o << "name = " << policy_name(c.policy) << "\n";
    o << "solver = " << (c.policy.solver == SolverPath::Dual ? "dual" : c.policy.solver == SolverPath::Primal ? "primal" : "auto") << "\n";
    o << "tau = " << fmt_double(c.policy.tau) << "\n";
    o << "ucb_lambda = " << fmt_double(c.policy.ucb_lambda) << "\n";
    o << "augment_bias = " << (c.policy.augment_bias ? "true" : "false") << "\n";
    o << "\n[schedule]\n";
    const auto& s = c.schedule;
    o << "epsilon = " << (s.eps_kind == EpsilonKind::PaperSim ? "papersim" : s.eps_kind == EpsilonKind::PowerLaw ? "powerlaw" : "constant") << "\n";
    o << "beta = " << fmt_double(s.beta) << "\n";
    o << "epsilon_scale = " << fmt_double(s.eps_scale) << "\n";
    o << "epsilon_value = " << fmt_double(s.eps_value) << "\n";
    const char* regimes[] = {"finitedim", "infinitedim", "fixed", "powlog"};
    o << "lambda = " << regimes[static_cast<int>(s.lambda_regime)] << "\n";
    o << "alpha = " << fmt_double(s.alpha) << "\n";
    o << "gamma_source = " << fmt_double(s.gamma_source) << "\n";
    o << "delta = " << fmt_double(s.delta) << "\n";
    o << "lambda_value = " << fmt_double(s.lambda_value) << "\n";
    o << "lambda_power = " << fmt_double(s.lambda_power) << "\n";
    o << "lambda_scale = " << fmt_double(s.lambda_scale) << "\n";
    o << "\n[run]\n";
    o << "T = " << c.horizon << "\n";
    o << "t0 = " << c.t0 << "\n";
    o << "n_runs = " << c.n_runs << "\n";
    o << "seed = " << c.master_seed << "\n";
    o << "\n[cv]\n";
    o << "folds = " << c.cv.folds << "\n";
    if (!c.cv.lambdas.empty()) {
        o << "lambda_grid = ";
        for (std::size_t i = 0; i < c.cv.lambdas.size(); ++i) o << (i ? ", " : "") << config_detail::format_lambda_choice(c.cv.lambdas[i]);
        o << "\n";
    }
    if (!c.cv.gammas.empty()) o << "gamma_grid = " << config_detail::join_doubles(c.cv.gammas) << "\n";
    if (!c.cv.taus.empty()) o << "tau_grid = " << config_detail::join_doubles(c.cv.taus) << "\n";
    if (!c.cv.ucb_lambdas.empty()) o << "ucb_lambda_grid = " << config_detail::join_doubles(c.cv.ucb_lambdas) << "\n";
    return o.str();
}

/// FNV-1a over the canonical serialization.
[[nodiscard]] inline std::uint64_t config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace kbandit
